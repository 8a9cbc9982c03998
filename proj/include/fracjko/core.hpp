#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fracjko {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct SizeMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SingularInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iterative solver gave up; carries the last residual it saw.
struct ConvergenceError : std::runtime_error {
    double residual;
    ConvergenceError(const std::string& what, double r)
        : std::runtime_error(what + " (residual " + std::to_string(r) + ")"), residual(r) {}
};

// Failure inside a time loop, tagged with where it happened.
struct NumericalError : std::runtime_error {
    std::string module;
    long step;
    NumericalError(std::string mod, long k, const std::string& what)
        : std::runtime_error(mod + " step " + std::to_string(k) + ": " + what),
          module(std::move(mod)), step(k) {}
};

inline bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

// Uniform cell-centred grid, Dim = 1 or 2. Cell i on axis a is
// [origin[a] + i h, origin[a] + (i+1) h), sample at its centre.
template <typename Scalar, int Dim>
struct Grid {
    static_assert(Dim == 1 || Dim == 2, "only d = 1, 2");
    std::array<Index, Dim> n{};
    std::array<Scalar, Dim> length{};
    std::array<Scalar, Dim> origin{};

    Grid() = default;
    Grid(std::array<Index, Dim> n_, std::array<Scalar, Dim> len, std::array<Scalar, Dim> org)
        : n(n_), length(len), origin(org) {
        for (int a = 0; a < Dim; ++a) {
            if (n[a] < 8 || !is_pow2(n[a]))
                throw DomainError("grid: cells per axis must be a power of two >= 8");
            if (!(length[a] > 0) || !std::isfinite(double(length[a])))
                throw DomainError("grid: length must be positive");
        }
    }

    Scalar h(int a = 0) const { return length[a] / Scalar(n[a]); }
    Scalar cell_volume() const {
        Scalar v(1);
        for (int a = 0; a < Dim; ++a) v *= h(a);
        return v;
    }
    Index size() const {
        Index s = 1;
        for (int a = 0; a < Dim; ++a) s *= n[a];
        return s;
    }
    Scalar center(int a, Index i) const { return origin[a] + (Scalar(i) + Scalar(0.5)) * h(a); }

    // Same cell size, `factor` times the extent, original box centred.
    Grid padded(Index factor = 2) const {
        Grid g = *this;
        for (int a = 0; a < Dim; ++a) {
            g.n[a] = n[a] * factor;
            g.length[a] = length[a] * Scalar(factor);
            g.origin[a] = origin[a] - Scalar(n[a] * (factor - 1) / 2) * h(a);
        }
        return g;
    }

    bool same_shape(const Grid& o) const { return n == o.n; }
    bool operator==(const Grid& o) const = default;
};

template <typename Scalar>
using Grid1D = Grid<Scalar, 1>;
template <typename Scalar>
using Grid2D = Grid<Scalar, 2>;

// Flat storage: axis 0 runs fastest, index = i0 + n0 * i1.
template <typename Scalar, int Dim>
struct GridFunction {
    Grid<Scalar, Dim> grid;
    ArrayX<Scalar> values;

    GridFunction() = default;
    GridFunction(Grid<Scalar, Dim> g, ArrayX<Scalar> v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid.size()) throw SizeMismatch("grid function: value count != grid size");
    }
    Scalar integral() const { return values.sum() * grid.cell_volume(); }
};

template <typename Scalar, int Dim>
class GridDensity {
public:
    GridDensity() = default;
    GridDensity(Grid<Scalar, Dim> g, ArrayX<Scalar> v) : f_(std::move(g), std::move(v)) {
        if (!f_.values.allFinite()) throw DomainError("density: non-finite value");
        if ((f_.values < Scalar(0)).any()) throw DomainError("density: negative value");
        mass_ = f_.integral();
        if (!(mass_ > Scalar(0))) throw DomainError("density: zero mass");
    }
    explicit GridDensity(GridFunction<Scalar, Dim> f) : GridDensity(std::move(f.grid), std::move(f.values)) {}

    const Grid<Scalar, Dim>& grid() const { return f_.grid; }
    const ArrayX<Scalar>& values() const { return f_.values; }
    Scalar mass() const { return mass_; }
    const GridFunction<Scalar, Dim>& function() const { return f_; }

    GridDensity normalized() const { return GridDensity(f_.grid, f_.values / mass_); }

private:
    GridFunction<Scalar, Dim> f_;
    Scalar mass_{0};
};

template <typename Scalar>
struct FracParams {
    int d = 1;
    Scalar s = Scalar(0.25);

    FracParams() = default;
    FracParams(int d_, Scalar s_) : d(d_), s(s_) { validate(); }

    void validate() const {
        if (d != 1 && d != 2) throw DomainError("FracParams: d must be 1 or 2");
        const Scalar hi = d == 1 ? Scalar(0.5) : Scalar(1);
        if (!(s > Scalar(0) && s < hi))
            throw DomainError("FracParams: need 0 < s < min(1, d/2), got d=" + std::to_string(d) +
                              " s=" + std::to_string(double(s)));
    }
};

template <typename Scalar, typename Derived>
GridFunction<Scalar, 1> make_function(const Grid1D<Scalar>& g, const Eigen::ArrayBase<Derived>& v) {
    return GridFunction<Scalar, 1>(g, v.template cast<Scalar>());
}

}  // namespace fracjko
