#pragma once

#include "fracjko/quantile_profile.hpp"
#include "fracjko/spectral.hpp"

#include <cmath>
#include <limits>

namespace fracjko {

template <typename Scalar>
struct ValueGradient {
    Scalar value;
    VectorX<Scalar> gradient;
};

// (C/(2m^2)) sum_{i != j} |X_i - X_j|^{2s-1} and its exact gradient.
template <typename Scalar>
ValueGradient<Scalar> pairwise_energy_1d(const QuantileProfile<Scalar>& q, const FracParams<Scalar>& p) {
    using std::pow;
    if (p.d != 1) throw DomainError("pairwise_energy_1d: d must be 1");
    p.validate();
    const Index m = q.m();
    const Scalar a = 2 * p.s - 1;
    const Scalar c = riesz_constant(1, p.s) / (Scalar(m) * Scalar(m));
    ValueGradient<Scalar> out{Scalar(0), VectorX<Scalar>::Zero(m)};
    for (Index i = 0; i < m; ++i) {
        for (Index j = i + 1; j < m; ++j) {
            const Scalar d = q.X(j) - q.X(i);
            if (!(d > 0)) throw SingularInputError("pairwise_energy_1d: coincident nodes");
            const Scalar pw = pow(d, a);
            out.value += pw;
            const Scalar g = a * pw / d;
            out.gradient(j) += g;
            out.gradient(i) -= g;
        }
    }
    out.value *= c;
    out.gradient *= c;
    return out;
}

// The energy the Lagrangian scheme minimises. The plain pair sum misses the
// self-interaction of each node's cell, an O(m^{-2s}) relative error. The
// local term -2 zeta(1-2s) sum_i l_i^{2s-1}, l_i the local spacing, is
// exact on uniform lattices, keeps E(lambda X) = lambda^{2s-1} E(X) and
// keeps E convex on the ordered cone.
template <typename Scalar>
class LagrangianEnergy {
public:
    explicit LagrangianEnergy(FracParams<Scalar> p, bool self_correction = true)
        : p_(p), corrected_(self_correction) {
        if (p_.d != 1) throw DomainError("LagrangianEnergy: d must be 1");
        p_.validate();
        a_ = 2 * p_.s - 1;
        C_ = riesz_constant(1, p_.s);
        kappa_ = corrected_ ? Scalar(-2 * std::riemann_zeta(double(-a_))) : Scalar(0);
    }

    const FracParams<Scalar>& params() const { return p_; }
    Scalar exponent() const { return a_; }

    // Returns +inf on collisions or order violations, never throws.
    Scalar value(const VectorX<Scalar>& X) const {
        using std::pow;
        const Index m = X.size();
        Scalar acc(0);
        for (Index i = 0; i < m; ++i) {
            for (Index j = i + 1; j < m; ++j) {
                const Scalar d = X(j) - X(i);
                if (!(d > 0)) return std::numeric_limits<Scalar>::infinity();
                acc += pow(d, a_);
            }
        }
        acc *= 2;
        if (corrected_ && m > 1) {
            for (Index i = 0; i < m; ++i) acc += kappa_ * pow(spacing(X, i), a_);
        }
        return C_ / (2 * Scalar(m) * Scalar(m)) * acc;
    }

    // Value, gradient and (optionally) dense Hessian. X must be strictly increasing.
    Scalar evaluate(const VectorX<Scalar>& X, VectorX<Scalar>* grad, MatrixX<Scalar>* hess) const {
        using std::pow;
        const Index m = X.size();
        const Scalar c = C_ / (Scalar(m) * Scalar(m));
        Scalar acc(0);
        if (grad) grad->setZero(m);
        if (hess) hess->setZero(m, m);
        for (Index i = 0; i < m; ++i) {
            for (Index j = i + 1; j < m; ++j) {
                const Scalar d = X(j) - X(i);
                if (!(d > 0)) throw SingularInputError("LagrangianEnergy: coincident nodes");
                const Scalar pw = pow(d, a_);
                acc += pw;
                if (grad) {
                    const Scalar g = a_ * pw / d;
                    (*grad)(j) += g;
                    (*grad)(i) -= g;
                }
                if (hess) {
                    const Scalar h = a_ * (a_ - 1) * pw / (d * d);
                    (*hess)(i, j) -= h;
                    (*hess)(j, i) -= h;
                    (*hess)(i, i) += h;
                    (*hess)(j, j) += h;
                }
            }
        }
        Scalar val = acc;
        if (corrected_ && m > 1) {
            // l_i = sum_k w_ik X_k with at most two nonzero weights
            for (Index i = 0; i < m; ++i) {
                const Scalar l = spacing(X, i);
                const Scalar pw = pow(l, a_);
                val += kappa_ / 2 * pw;
                auto [lo, hi, w] = stencil(m, i);
                if (grad) {
                    const Scalar g = kappa_ / 2 * a_ * pw / l;
                    (*grad)(hi) += g * w;
                    (*grad)(lo) -= g * w;
                }
                if (hess) {
                    const Scalar h = kappa_ / 2 * a_ * (a_ - 1) * pw / (l * l) * w * w;
                    (*hess)(hi, hi) += h;
                    (*hess)(lo, lo) += h;
                    (*hess)(hi, lo) -= h;
                    (*hess)(lo, hi) -= h;
                }
            }
        }
        if (grad) *grad *= c;
        if (hess) *hess *= c;
        return c * val;
    }

private:
    struct Stencil {
        Index lo, hi;
        Scalar w;
    };
    static Stencil stencil(Index m, Index i) {
        if (i == 0) return {0, 1, Scalar(1)};
        if (i == m - 1) return {m - 2, m - 1, Scalar(1)};
        return {i - 1, i + 1, Scalar(0.5)};
    }
    static Scalar spacing(const VectorX<Scalar>& X, Index i) {
        auto s = stencil(X.size(), i);
        return s.w * (X(s.hi) - X(s.lo));
    }

    FracParams<Scalar> p_;
    bool corrected_;
    Scalar a_{}, C_{}, kappa_{};
};

}  // namespace fracjko
