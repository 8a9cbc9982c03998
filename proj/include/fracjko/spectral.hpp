#pragma once

#include "fracjko/core.hpp"
#include "fracjko/quadrature.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>

namespace fracjko {

template <typename Scalar>
Scalar riesz_constant(int d, Scalar s) {
    using std::pow;
    using std::tgamma;
    const Scalar half_d = Scalar(d) / 2;
    if (!(s > 0 && s < half_d)) throw DomainError("riesz_constant: need 0 < s < d/2");
    const Scalar pi = std::numbers::pi_v<Scalar>;
    return pow(pi, -half_d) * pow(Scalar(2), -2 * s) * tgamma(half_d - s) / tgamma(s);
}

// Sharp constant of ||u||_{L^q} <= S ||u||_{H^r-dot}, q = 2d/(d - 2r).
template <typename Scalar>
Scalar sobolev_constant(int d, Scalar r) {
    using std::pow;
    using std::tgamma;
    const Scalar half_d = Scalar(d) / 2;
    if (!(r > 0 && r < half_d)) throw DomainError("sobolev_constant: need 0 < r < d/2");
    const Scalar pi = std::numbers::pi_v<Scalar>;
    return pow(Scalar(2), -2 * r) * pow(pi, -r) * tgamma(half_d - r) / tgamma(half_d + r) *
           pow(tgamma(Scalar(d)) / tgamma(half_d), 2 * r / Scalar(d));
}

template <typename Scalar, int Dim>
struct SpectralField {
    using Complex = std::complex<Scalar>;
    Grid<Scalar, Dim> grid;
    Eigen::Array<Complex, Eigen::Dynamic, 1> coeffs;

    // Angular frequency of FFT index k on axis a; Nyquist is taken negative.
    Scalar xi(int a, Index k) const { return frequency(grid, a, k); }

    static Scalar frequency(const Grid<Scalar, Dim>& g, int a, Index k) {
        const Index n = g.n[a];
        const Index ks = k < n / 2 ? k : k - n;
        return Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(ks) / g.length[a];
    }
};

namespace detail {

template <typename Scalar>
using CArray = Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar, int Dim>
void fft_inplace(CArray<Scalar>& data, const Grid<Scalar, Dim>& g, bool inverse) {
    Eigen::FFT<Scalar> fft;
    std::vector<std::complex<Scalar>> in, out;
    for (int a = 0; a < Dim; ++a) {
        const Index n = g.n[a];
        const Index stride = a == 0 ? 1 : g.n[0];
        const Index lines = g.size() / n;
        in.resize(n);
        for (Index l = 0; l < lines; ++l) {
            // start of line l for axis a
            const Index base = a == 0 ? l * n : l;
            for (Index i = 0; i < n; ++i) in[i] = data(base + i * stride);
            if (inverse)
                fft.inv(out, in);
            else
                fft.fwd(out, in);
            for (Index i = 0; i < n; ++i) data(base + i * stride) = out[i];
        }
    }
}

template <typename Scalar, int Dim>
std::array<Index, Dim> unflatten(const Grid<Scalar, Dim>& g, Index idx) {
    std::array<Index, Dim> k{};
    for (int a = 0; a < Dim; ++a) {
        k[a] = idx % g.n[a];
        idx /= g.n[a];
    }
    return k;
}

// exp(-i xi . x0) with x0 the first cell centre.
template <typename Scalar, int Dim>
CArray<Scalar> origin_phase(const Grid<Scalar, Dim>& g, Scalar sign) {
    CArray<Scalar> ph(g.size());
    for (Index idx = 0; idx < g.size(); ++idx) {
        auto k = unflatten(g, idx);
        Scalar arg(0);
        for (int a = 0; a < Dim; ++a) arg += SpectralField<Scalar, Dim>::frequency(g, a, k[a]) * g.center(a, 0);
        ph(idx) = std::polar(Scalar(1), sign * arg);
    }
    return ph;
}

template <typename Scalar, int Dim>
ArrayX<Scalar> abs_xi(const Grid<Scalar, Dim>& g) {
    ArrayX<Scalar> out(g.size());
    for (Index idx = 0; idx < g.size(); ++idx) {
        auto k = unflatten(g, idx);
        Scalar r2(0);
        for (int a = 0; a < Dim; ++a) {
            const Scalar x = SpectralField<Scalar, Dim>::frequency(g, a, k[a]);
            r2 += x * x;
        }
        out(idx) = std::sqrt(r2);
    }
    return out;
}

// Hurwitz zeta by Euler-Maclaurin, z != 1, q > 0.
inline double hurwitz_zeta(double z, double q) {
    constexpr int N = 20;
    constexpr double B[] = {1. / 6, -1. / 30, 1. / 42, -1. / 30, 5. / 66, -691. / 2730, 7. / 6, -3617. / 510};
    double acc = 0;
    for (int n = 0; n < N; ++n) acc += std::pow(n + q, -z);
    const double x = N + q;
    acc += std::pow(x, 1 - z) / (z - 1) + 0.5 * std::pow(x, -z);
    double poch = z, fact = 2;
    for (int j = 1; j <= 8; ++j) {
        acc += B[j - 1] / fact * poch * std::pow(x, -z - 2 * j + 1);
        poch *= (z + 2 * j - 1) * (z + 2 * j);
        fact *= (2 * j + 1) * (2 * j + 2);
    }
    return acc;
}

// sum_{k in Z^2, k != 0} |k|^a (analytically continued) = 4 zeta(-a/2) beta(-a/2).
inline double square_lattice_zeta(double a) {
    const double z = -a / 2;
    const double beta = std::pow(4.0, -z) * (hurwitz_zeta(z, 0.25) - hurwitz_zeta(z, 0.75));
    return 4 * hurwitz_zeta(z, 1.0) * beta;
}

// Mean of |eta|^a over the rectangle [-d1/2, d1/2] x [-d2/2, d2/2], a > -2.
template <typename Scalar>
Scalar cell_average_2d(Scalar a, Scalar d1, Scalar d2) {
    using std::atan2;
    using std::cos;
    using std::pow;
    using std::sin;
    const Scalar split = atan2(d2, d1);
    Scalar acc(0);
    auto [x1, w1] = gauss_legendre(64, 0.0, double(split));
    for (size_t i = 0; i < x1.size(); ++i)
        acc += Scalar(w1[i]) * pow(d1 / (2 * cos(Scalar(x1[i]))), a + 2);
    auto [x2, w2] = gauss_legendre(64, double(split), std::numbers::pi / 2);
    for (size_t i = 0; i < x2.size(); ++i)
        acc += Scalar(w2[i]) * pow(d2 / (2 * sin(Scalar(x2[i]))), a + 2);
    return 4 * acc / (a + 2) / (d1 * d2);
}

}  // namespace detail

// Quadrature weights standing in for |xi|^a on the FFT lattice of g.
// d = 1, -1 < a < 2: the modes 0 and +-1 carry the generalised Euler-Maclaurin
// (zeta) correction for the |xi|^a singularity, so that (L)^{-1} sum_k w_k G(xi_k)
// approximates (2 pi)^{-1} int |xi|^a G to O(dxi^{4+a}) for smooth G.
// d = 2, square lattice, -2 < a < 2: the same correction with the lattice sum
// Z(a) = sum_{k != 0} |k|^a on the zero mode and its four neighbours.
// Rectangular lattices with a < 0 fall back to the cell average on the zero mode.
template <typename Scalar, int Dim>
ArrayX<Scalar> power_symbol(const Grid<Scalar, Dim>& g, Scalar a) {
    using std::pow;
    if (!(a > -Scalar(Dim))) throw DomainError("power_symbol: |xi|^a not locally integrable");
    if (a == 0) return ArrayX<Scalar>::Ones(g.size());
    ArrayX<Scalar> m = detail::abs_xi(g);
    for (Index k = 1; k < m.size(); ++k) m(k) = pow(m(k), a);
    if constexpr (Dim == 1) {
        const Scalar dxi = Scalar(2) * std::numbers::pi_v<Scalar> / g.length[0];
        if (a < 2) {
            const Scalar z0 = Scalar(std::riemann_zeta(double(-a)));
            const Scalar z2 = Scalar(std::riemann_zeta(double(-a - 2)));
            m(0) = pow(dxi, a) * (2 * z2 - 2 * z0);
            m(1) = m(g.n[0] - 1) = pow(dxi, a) * (1 - z2);
        } else {
            m(0) = 0;
        }
    } else {
        const Scalar d1 = Scalar(2) * std::numbers::pi_v<Scalar> / g.length[0];
        const Scalar d2 = Scalar(2) * std::numbers::pi_v<Scalar> / g.length[1];
        if (d1 == d2 && a < 2) {
            const Scalar z0 = Scalar(detail::square_lattice_zeta(double(a)));
            const Scalar z2 = Scalar(detail::square_lattice_zeta(double(a + 2)));
            m(0) = pow(d1, a) * (z2 - z0);
            const Index n0 = g.n[0], n1 = g.n[1];
            for (Index idx : {Index(1), n0 - 1, n0, n0 * (n1 - 1)}) m(idx) = pow(d1, a) * (1 - z2 / 4);
        } else if (a < 0) {
            m(0) = detail::cell_average_2d(a, d1, d2);
        } else {
            m(0) = 0;
        }
    }
    return m;
}

template <typename Scalar, int Dim>
GridFunction<Scalar, Dim> pad(const GridFunction<Scalar, Dim>& f, Index factor = 2) {
    const auto pg = f.grid.padded(factor);
    ArrayX<Scalar> v = ArrayX<Scalar>::Zero(pg.size());
    if constexpr (Dim == 1) {
        const Index off = f.grid.n[0] * (factor - 1) / 2;
        v.segment(off, f.grid.n[0]) = f.values;
    } else {
        const Index o0 = f.grid.n[0] * (factor - 1) / 2, o1 = f.grid.n[1] * (factor - 1) / 2;
        for (Index j = 0; j < f.grid.n[1]; ++j)
            v.segment(o0 + pg.n[0] * (o1 + j), f.grid.n[0]) = f.values.segment(f.grid.n[0] * j, f.grid.n[0]);
    }
    return {pg, v};
}

// Restrict f to the sub-grid `target` (same cell size, aligned cells).
template <typename Scalar, int Dim>
GridFunction<Scalar, Dim> crop(const GridFunction<Scalar, Dim>& f, const Grid<Scalar, Dim>& target) {
    std::array<Index, Dim> off{};
    for (int a = 0; a < Dim; ++a) {
        const Scalar shift = (target.origin[a] - f.grid.origin[a]) / f.grid.h(a);
        off[a] = Index(std::llround(double(shift)));
        using std::abs;
        if (abs(shift - Scalar(off[a])) > Scalar(1e-6) || off[a] < 0 || off[a] + target.n[a] > f.grid.n[a] ||
            abs(target.h(a) / f.grid.h(a) - 1) > Scalar(1e-12))
            throw SizeMismatch("crop: target is not an aligned sub-grid");
    }
    ArrayX<Scalar> v(target.size());
    if constexpr (Dim == 1) {
        v = f.values.segment(off[0], target.n[0]);
    } else {
        for (Index j = 0; j < target.n[1]; ++j)
            v.segment(target.n[0] * j, target.n[0]) = f.values.segment(off[0] + f.grid.n[0] * (off[1] + j), target.n[0]);
    }
    return {target, v};
}

// Coefficients approximate f^(xi) = int exp(-i x.xi) f(x) dx (cell-centre rule),
// so coeffs(0) is the integral of f. No padding here; see the density overload.
template <typename Scalar, int Dim>
SpectralField<Scalar, Dim> forward_transform(const GridFunction<Scalar, Dim>& f) {
    SpectralField<Scalar, Dim> F;
    F.grid = f.grid;
    F.coeffs = f.values.template cast<std::complex<Scalar>>();
    detail::fft_inplace(F.coeffs, f.grid, false);
    F.coeffs *= detail::origin_phase(f.grid, Scalar(-1)) * f.grid.cell_volume();
    return F;
}

// Densities live on R^d: zero-pad to twice the extent first.
template <typename Scalar, int Dim>
SpectralField<Scalar, Dim> forward_transform(const GridDensity<Scalar, Dim>& u) {
    return forward_transform(pad(u.function()));
}

template <typename Scalar, int Dim>
GridFunction<Scalar, Dim> inverse_transform(const SpectralField<Scalar, Dim>& F) {
    if (F.coeffs.size() != F.grid.size()) throw SizeMismatch("inverse_transform: coefficient count != grid size");
    detail::CArray<Scalar> c = F.coeffs * detail::origin_phase(F.grid, Scalar(1));
    detail::fft_inplace(c, F.grid, true);
    return {F.grid, c.real() / F.grid.cell_volume()};
}

template <typename Scalar, int Dim>
GridFunction<Scalar, Dim> apply_symbol(const GridFunction<Scalar, Dim>& f, const ArrayX<Scalar>& m) {
    auto F = forward_transform(f);
    F.coeffs *= m.template cast<std::complex<Scalar>>();
    return inverse_transform(F);
}

// v = K_s * u. Returned on the padded grid (twice the extent of u's grid),
// so that fractional_laplacian(riesz_potential(u)) recovers pad(u) exactly.
template <typename Scalar, int Dim>
GridFunction<Scalar, Dim> riesz_potential(const GridDensity<Scalar, Dim>& u, const FracParams<Scalar>& p) {
    if (p.d != Dim) throw SizeMismatch("riesz_potential: dimension mismatch");
    p.validate();
    const auto f = pad(u.function());
    return apply_symbol(f, power_symbol(f.grid, -2 * p.s));
}

// Periodic on v's own grid; symbol is the reciprocal of the Riesz weights.
template <typename Scalar, int Dim>
GridFunction<Scalar, Dim> fractional_laplacian(const GridFunction<Scalar, Dim>& v, const FracParams<Scalar>& p) {
    if (p.d != Dim) throw SizeMismatch("fractional_laplacian: dimension mismatch");
    p.validate();
    return apply_symbol(v, ArrayX<Scalar>(power_symbol(v.grid, -2 * p.s).inverse()));
}

// d f / d x_axis, spectral, Nyquist mode dropped.
template <typename Scalar, int Dim>
GridFunction<Scalar, Dim> spectral_derivative(const GridFunction<Scalar, Dim>& f, int axis = 0) {
    auto F = forward_transform(f);
    for (Index idx = 0; idx < F.coeffs.size(); ++idx) {
        auto k = detail::unflatten(f.grid, idx);
        if (k[axis] == f.grid.n[axis] / 2)
            F.coeffs(idx) = 0;
        else
            F.coeffs(idx) *= std::complex<Scalar>(0, F.xi(axis, k[axis]));
    }
    return inverse_transform(F);
}

// Values of f at x + h/2 along `axis` (band-limited interpolation).
template <typename Scalar, int Dim>
GridFunction<Scalar, Dim> half_cell_shift(const GridFunction<Scalar, Dim>& f, int axis = 0) {
    auto F = forward_transform(f);
    const Scalar h = f.grid.h(axis);
    for (Index idx = 0; idx < F.coeffs.size(); ++idx) {
        auto k = detail::unflatten(f.grid, idx);
        if (k[axis] == f.grid.n[axis] / 2)
            F.coeffs(idx) *= std::cos(F.xi(axis, k[axis]) * h / 2);
        else
            F.coeffs(idx) *= std::polar(Scalar(1), F.xi(axis, k[axis]) * h / 2);
    }
    return inverse_transform(F);
}

// <f, g>_r = (2 pi)^{-d} int |xi|^{2r} f^ conj(g^). Both are zero-padded first.
template <typename Scalar, int Dim>
Scalar hdot_inner(const GridFunction<Scalar, Dim>& f, const GridFunction<Scalar, Dim>& g, Scalar r) {
    if (!(f.grid == g.grid)) throw SizeMismatch("hdot_inner: grids differ");
    const auto F = forward_transform(pad(f));
    const auto G = forward_transform(pad(g));
    Scalar vol(1);
    for (int a = 0; a < Dim; ++a) vol *= F.grid.length[a];
    ArrayX<Scalar> w;
    if (2 * r > -Scalar(Dim)) {
        w = power_symbol(F.grid, 2 * r);
    } else {
        using std::abs;
        const Scalar scale = std::max(F.coeffs.abs().maxCoeff(), G.coeffs.abs().maxCoeff());
        if (abs(F.coeffs(0)) > Scalar(1e-12) * scale || abs(G.coeffs(0)) > Scalar(1e-12) * scale)
            throw DomainError("hdot: |xi|^{2r} not integrable at 0 for a field with nonzero mean");
        if (!(2 * r > -Scalar(Dim) - 2)) throw DomainError("hdot: r too negative");
        w = detail::abs_xi(F.grid);
        w(0) = 1;
        w = w.pow(2 * r);
        w(0) = 0;
    }
    return (w * (F.coeffs * G.coeffs.conjugate()).real()).sum() / vol;
}

template <typename Scalar, int Dim>
Scalar hdot_norm(const GridFunction<Scalar, Dim>& f, Scalar r) {
    using std::sqrt;
    using std::max;
    return sqrt(max(Scalar(0), hdot_inner(f, f, r)));
}

template <typename Scalar, int Dim>
Scalar hdot_norm(const GridDensity<Scalar, Dim>& u, Scalar r) {
    return hdot_norm(u.function(), r);
}

template <typename Scalar, int Dim>
Scalar h_norm(const GridFunction<Scalar, Dim>& f, Scalar r) {
    const auto F = forward_transform(pad(f));
    Scalar vol(1);
    for (int a = 0; a < Dim; ++a) vol *= F.grid.length[a];
    const ArrayX<Scalar> w = (1 + detail::abs_xi(F.grid).square()).pow(r);
    using std::sqrt;
    return sqrt((w * F.coeffs.abs2()).sum() / vol);
}

// F_s(u) = 1/2 ||u||^2_{H^{-s}-dot}.
template <typename Scalar, int Dim>
Scalar energy_Fs(const GridDensity<Scalar, Dim>& u, const FracParams<Scalar>& p) {
    if (p.d != Dim) throw SizeMismatch("energy_Fs: dimension mismatch");
    p.validate();
    return hdot_inner(u.function(), u.function(), -p.s) / 2;
}

}  // namespace fracjko
