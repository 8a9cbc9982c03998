#pragma once

#include "fracjko/core.hpp"

namespace fracjko {

// Inverse CDF sampled at z_i = (i - 1/2)/m; always unit mass.
template <typename Scalar>
struct QuantileProfile {
    VectorX<Scalar> X;

    QuantileProfile() = default;
    explicit QuantileProfile(VectorX<Scalar> x) : X(std::move(x)) {
        if (X.size() < 1) throw DomainError("quantile profile: no nodes");
        if (!X.allFinite()) throw DomainError("quantile profile: non-finite node");
        for (Index i = 1; i < X.size(); ++i)
            if (X(i) < X(i - 1)) throw DomainError("quantile profile: nodes must be nondecreasing");
    }

    Index m() const { return X.size(); }
    Scalar z(Index i) const { return (Scalar(i) + Scalar(0.5)) / Scalar(X.size()); }
    bool strictly_increasing() const {
        for (Index i = 1; i < X.size(); ++i)
            if (!(X(i) > X(i - 1))) return false;
        return true;
    }
};

// The density a profile stands for: its CDF interpolates (X_i, z_i) linearly,
// with half-gap end caps, i.e. height 1/(m g) on each gap g. This is what all
// integral diagnostics of a Lagrangian state are evaluated on.
template <typename Scalar>
struct PiecewiseConstant {
    VectorX<Scalar> breaks;   // size K+1
    VectorX<Scalar> heights;  // size K
    VectorX<Scalar> masses;   // size K, sums to 1

    // int V(u) dx for V(0) = 0.
    template <typename F>
    Scalar integrate(F&& V) const {
        Scalar acc(0);
        for (Index k = 0; k < heights.size(); ++k) {
            const Scalar len = breaks(k + 1) - breaks(k);
            if (len > 0) acc += len * V(heights(k));
        }
        return acc;
    }
    Scalar sup() const { return heights.maxCoeff(); }
};

template <typename Scalar>
PiecewiseConstant<Scalar> induced_density(const QuantileProfile<Scalar>& q) {
    const Index m = q.m();
    if (m < 2) throw DomainError("induced density: need at least two nodes");
    if (!q.strictly_increasing()) throw SingularInputError("induced density: coincident nodes carry an atom");
    PiecewiseConstant<Scalar> pc;
    pc.breaks.resize(m + 2);
    pc.masses.resize(m + 1);
    pc.heights.resize(m + 1);
    const Scalar g0 = q.X(1) - q.X(0), g1 = q.X(m - 1) - q.X(m - 2);
    pc.breaks(0) = q.X(0) - g0 / 2;
    pc.breaks.segment(1, m) = q.X;
    pc.breaks(m + 1) = q.X(m - 1) + g1 / 2;
    const Scalar w = Scalar(1) / Scalar(m);
    pc.masses.setConstant(w);
    pc.masses(0) = pc.masses(m) = w / 2;
    for (Index k = 0; k <= m; ++k) pc.heights(k) = pc.masses(k) / (pc.breaks(k + 1) - pc.breaks(k));
    return pc;
}

}  // namespace fracjko
