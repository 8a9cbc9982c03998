#pragma once

#include "fracjko/core.hpp"
#include "fracjko/quantile_profile.hpp"

#include <cmath>
#include <limits>

namespace fracjko {

// Entropy integrands; 0 log 0 = 0.
template <typename Scalar>
Scalar xlogx(Scalar u) {
    using std::log;
    return u > 0 ? u * log(u) : Scalar(0);
}

template <typename Scalar, int Dim, typename F>
Scalar integrate_density(const GridDensity<Scalar, Dim>& u, F&& V) {
    Scalar acc(0);
    for (Index i = 0; i < u.values().size(); ++i) acc += V(u.values()(i));
    return acc * u.grid().cell_volume();
}

// Grid densities: cell-average quadrature. Profiles: exact on the induced density.
template <typename Scalar, int Dim>
Scalar entropy_H(const GridDensity<Scalar, Dim>& u) {
    return integrate_density(u, [](Scalar x) { return xlogx(x); });
}
template <typename Scalar>
Scalar entropy_H(const QuantileProfile<Scalar>& q) {
    return induced_density(q).integrate([](Scalar x) { return xlogx(x); });
}

template <typename Scalar, int Dim>
Scalar entropy_K(const GridDensity<Scalar, Dim>& u) {
    return integrate_density(u, [](Scalar x) { return x * std::log1p(x); });
}
template <typename Scalar>
Scalar entropy_K(const QuantileProfile<Scalar>& q) {
    return induced_density(q).integrate([](Scalar x) { return x * std::log1p(x); });
}

// ||u||_p^p; p = inf handled by lp_norm.
template <typename Scalar, int Dim>
Scalar lp_power(const GridDensity<Scalar, Dim>& u, Scalar p) {
    return integrate_density(u, [p](Scalar x) { return std::pow(x, p); });
}
template <typename Scalar>
Scalar lp_power(const QuantileProfile<Scalar>& q, Scalar p) {
    return induced_density(q).integrate([p](Scalar x) { return std::pow(x, p); });
}

template <typename Scalar, typename State>
Scalar lp_norm(const State& u, Scalar p) {
    if (std::isinf(double(p))) {
        if constexpr (std::is_same_v<State, QuantileProfile<Scalar>>)
            return induced_density(u).sup();
        else
            return u.values().maxCoeff();
    }
    return std::pow(lp_power(u, p), 1 / p);
}

template <typename Scalar, typename State>
Scalar entropy_Gp(const State& u, Scalar p) {
    if (!(p > 1)) throw DomainError("entropy_Gp: need p > 1");
    return lp_power(u, p) / (p - 1);
}

// int (u - M)_+^2
template <typename Scalar, int Dim>
Scalar excess_l2(const GridDensity<Scalar, Dim>& u, Scalar M) {
    return integrate_density(u, [M](Scalar x) { return x > M ? (x - M) * (x - M) : Scalar(0); });
}
template <typename Scalar>
Scalar excess_l2(const QuantileProfile<Scalar>& q, Scalar M) {
    return induced_density(q).integrate([M](Scalar x) { return x > M ? (x - M) * (x - M) : Scalar(0); });
}

template <typename Scalar>
Scalar second_moment(const QuantileProfile<Scalar>& q) {
    // exact for the induced density: sum over segments of mass * mean of x^2
    const auto pc = induced_density(q);
    Scalar acc(0);
    for (Index k = 0; k < pc.heights.size(); ++k) {
        const Scalar a = pc.breaks(k), b = pc.breaks(k + 1);
        acc += pc.masses(k) * (a * a + a * b + b * b) / 3;
    }
    return acc;
}
template <typename Scalar, int Dim>
Scalar second_moment(const GridDensity<Scalar, Dim>& u) {
    Scalar acc(0);
    for (Index idx = 0; idx < u.grid().size(); ++idx) {
        Index rest = idx;
        Scalar r2(0);
        for (int a = 0; a < Dim; ++a) {
            const Scalar x = u.grid().center(a, rest % u.grid().n[a]);
            r2 += x * x;
            rest /= u.grid().n[a];
        }
        acc += r2 * u.values()(idx);
    }
    return acc * u.grid().cell_volume();
}

}  // namespace fracjko
