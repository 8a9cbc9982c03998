#pragma once

#include "fracjko/core.hpp"
#include "fracjko/quantile_profile.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace fracjko {

template <typename Scalar>
struct MonotoneMap {
    Grid1D<Scalar> source;
    ArrayX<Scalar> T;             // image of each source cell centre
    Eigen::Array<bool, Eigen::Dynamic, 1> defined;  // false off the source support
};

// Dense coupling between two point clouds (rows = source, cols = target).
template <typename Scalar>
struct TransportPlan {
    MatrixX<Scalar> x, y;  // positions, one point per row
    VectorX<Scalar> a, b;  // marginals
    MatrixX<Scalar> gamma;
    std::vector<Index> source_cells;  // grid cell of each row, when built from a grid
};

namespace detail {

// CDF of a 1D grid density at the cell edges, normalised to end at 1.
template <typename Scalar>
ArrayX<Scalar> edge_cdf(const GridDensity<Scalar, 1>& u) {
    const Index n = u.grid().n[0];
    ArrayX<Scalar> F(n + 1);
    F(0) = 0;
    const Scalar h = u.grid().h();
    for (Index i = 0; i < n; ++i) F(i + 1) = F(i) + h * u.values()(i);
    return F / F(n);
}

// Smallest x with CDF(x) >= z on the piecewise-linear CDF through (edges, F).
template <typename Scalar>
Scalar inverse_cdf(const ArrayX<Scalar>& F, const Grid1D<Scalar>& g, Scalar z) {
    const Index n = F.size() - 1;
    const Scalar* begin = F.data();
    // first edge index with F >= z
    Index j = Index(std::lower_bound(begin, begin + n + 1, z) - begin);
    if (j == 0) return g.origin[0];
    if (j > n) j = n;
    const Scalar lo = F(j - 1), hi = F(j);
    const Scalar e = g.origin[0] + Scalar(j - 1) * g.h();
    return e + g.h() * (z - lo) / (hi - lo);
}

}  // namespace detail

template <typename Scalar>
QuantileProfile<Scalar> quantile_from_density(const GridDensity<Scalar, 1>& u, Index m) {
    if (m < 1) throw DomainError("quantile_from_density: m must be positive");
    const auto F = detail::edge_cdf(u);
    VectorX<Scalar> X(m);
    for (Index i = 0; i < m; ++i) X(i) = detail::inverse_cdf(F, u.grid(), (Scalar(i) + Scalar(0.5)) / Scalar(m));
    return QuantileProfile<Scalar>(std::move(X));
}

// CDF of the induced density (see induced_density) at x.
template <typename Scalar>
Scalar profile_cdf(const QuantileProfile<Scalar>& q, Scalar x) {
    const Index m = q.m();
    const Scalar w = Scalar(1) / Scalar(m);
    const Scalar g0 = m > 1 ? q.X(1) - q.X(0) : Scalar(0);
    const Scalar g1 = m > 1 ? q.X(m - 1) - q.X(m - 2) : Scalar(0);
    const Scalar left = q.X(0) - g0 / 2, right = q.X(m - 1) + g1 / 2;
    if (x <= left) return x < left || g0 > 0 ? Scalar(0) : w / 2;
    if (x >= right) return Scalar(1);
    if (x < q.X(0)) return w / 2 * (x - left) / (q.X(0) - left);
    if (x >= q.X(m - 1)) return Scalar(1) - w / 2 + w / 2 * (x - q.X(m - 1)) / (right - q.X(m - 1));
    // X_k <= x < X_{k+1}
    const Index k = Index(std::upper_bound(q.X.data(), q.X.data() + m, x) - q.X.data()) - 1;
    const Scalar zk = (Scalar(k) + Scalar(0.5)) * w;
    return zk + w * (x - q.X(k)) / (q.X(k + 1) - q.X(k));
}

// Cell averages of the induced density; the support must fit in the grid.
template <typename Scalar>
GridDensity<Scalar, 1> density_from_quantile(const QuantileProfile<Scalar>& q, const Grid1D<Scalar>& g) {
    const Index n = g.n[0];
    const Scalar h = g.h();
    const Index m = q.m();
    if (m < 2) throw DomainError("density_from_quantile: need at least two nodes");
    const Scalar left = q.X(0) - (q.X(1) - q.X(0)) / 2, right = q.X(m - 1) + (q.X(m - 1) - q.X(m - 2)) / 2;
    if (left < g.origin[0] || right > g.origin[0] + g.length[0])
        throw DomainError("density_from_quantile: profile support exceeds the grid");
    ArrayX<Scalar> v(n);
    Scalar prev = profile_cdf(q, g.origin[0]);
    for (Index i = 0; i < n; ++i) {
        const Scalar next = i + 1 == n ? Scalar(1) : profile_cdf(q, g.origin[0] + Scalar(i + 1) * h);
        v(i) = (next - prev) / h;
        prev = next;
    }
    return GridDensity<Scalar, 1>(g, v);
}

template <typename Scalar>
Scalar w2_1d(const QuantileProfile<Scalar>& u, const QuantileProfile<Scalar>& v) {
    if (u.m() != v.m()) throw SizeMismatch("w2_1d: node counts differ");
    using std::sqrt;
    return sqrt((u.X - v.X).squaredNorm() / Scalar(u.m()));
}

// T = F_v^{-1} o F_u, evaluated at the source cell centres.
template <typename Scalar>
MonotoneMap<Scalar> monotone_map_1d(const GridDensity<Scalar, 1>& u, const GridDensity<Scalar, 1>& v) {
    using std::abs;
    if (abs(u.mass() - v.mass()) > Scalar(1e-9) * u.mass()) throw DomainError("monotone_map_1d: masses differ");
    const auto Fu = detail::edge_cdf(u);
    const auto Fv = detail::edge_cdf(v);
    const Index n = u.grid().n[0];
    MonotoneMap<Scalar> T{u.grid(), ArrayX<Scalar>(n), Eigen::Array<bool, Eigen::Dynamic, 1>(n)};
    for (Index i = 0; i < n; ++i) {
        T.defined(i) = u.values()(i) > 0;
        const Scalar z = (Fu(i) + Fu(i + 1)) / 2;
        T.T(i) = detail::inverse_cdf(Fv, v.grid(), z);
    }
    return T;
}

// Push the cell masses of u through T. Each source cell is spread uniformly over
// the image of the cell, whose edges are T interpolated between neighbouring
// centres; degenerate images are deposited with linear (cloud-in-cell) weights.
template <typename Scalar>
GridDensity<Scalar, 1> pushforward(const GridDensity<Scalar, 1>& u, const MonotoneMap<Scalar>& T,
                                   const Grid1D<Scalar>& target) {
    const Index n = target.n[0], ns = u.grid().n[0];
    if (T.T.size() != ns) throw SizeMismatch("pushforward: map does not match the source grid");
    const Scalar h = target.h(), x0 = target.origin[0];
    ArrayX<Scalar> edge(ns + 1);
    for (Index i = 1; i < ns; ++i) edge(i) = (T.T(i - 1) + T.T(i)) / 2;
    edge(0) = ns > 1 ? T.T(0) - (T.T(1) - T.T(0)) / 2 : T.T(0);
    edge(ns) = ns > 1 ? T.T(ns - 1) + (T.T(ns - 1) - T.T(ns - 2)) / 2 : T.T(0);
    ArrayX<Scalar> mass = ArrayX<Scalar>::Zero(n);
    auto clamp_cell = [&](Scalar x) { return std::clamp(Index(std::floor(double((x - x0) / h))), Index(0), n - 1); };
    for (Index i = 0; i < ns; ++i) {
        const Scalar mi = u.values()(i) * u.grid().h();
        if (mi == 0) continue;
        const Scalar a = std::min(edge(i), edge(i + 1)), b = std::max(edge(i), edge(i + 1));
        if (!(b - a > Scalar(1e-12) * h)) {
            const Scalar t = (T.T(i) - x0) / h - Scalar(0.5);
            Index k = Index(std::floor(double(t)));
            Scalar f = t - Scalar(k);
            if (k < 0) k = 0, f = 0;
            if (k >= n - 1) k = n - 1, f = 0;
            mass(k) += (1 - f) * mi;
            if (f > 0) mass(k + 1) += f * mi;
            continue;
        }
        const Index ka = clamp_cell(a), kb = clamp_cell(b);
        for (Index k = ka; k <= kb; ++k) {
            const Scalar lo = k == 0 ? a : std::max(a, x0 + Scalar(k) * h);
            const Scalar hi = k == n - 1 ? b : std::min(b, x0 + Scalar(k + 1) * h);
            if (hi > lo) mass(k) += mi * (hi - lo) / (b - a);
        }
    }
    return GridDensity<Scalar, 1>(target, mass / h);
}

template <typename Scalar>
MonotoneMap<Scalar> barycentric_map(const TransportPlan<Scalar>& plan, const Grid1D<Scalar>& source) {
    const Index n = source.n[0];
    const Index rows_n = plan.gamma.rows();
    const bool indexed = !plan.source_cells.empty();
    if (plan.y.cols() != 1 || (indexed ? Index(plan.source_cells.size()) != rows_n : rows_n != n))
        throw SizeMismatch("barycentric_map: plan does not match a 1D source grid");
    MonotoneMap<Scalar> T{source, ArrayX<Scalar>::Constant(n, std::numeric_limits<Scalar>::quiet_NaN()),
                          Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, false)};
    const VectorX<Scalar> rows = plan.gamma.rowwise().sum();
    const VectorX<Scalar> moment = plan.gamma * plan.y.col(0);
    for (Index r = 0; r < rows_n; ++r) {
        const Index i = indexed ? plan.source_cells[size_t(r)] : r;
        if (rows(r) > 0) {
            T.defined(i) = true;
            T.T(i) = moment(r) / rows(r);
        }
    }
    return T;
}

struct SinkhornConfig {
    double epsilon = 1e-2;
    double tol = 1e-9;           // marginal L1 residual
    long max_iter = 10000;
    double scaling = 0.5;        // epsilon schedule ratio
    long stage_iter = 20;        // iterations per intermediate epsilon
    long newton_after = 50;      // plain sweeps before switching to Newton
};

template <typename Scalar>
struct SinkhornResult {
    Scalar divergence;           // debiased
    Scalar ot_ab, ot_aa, ot_bb;  // entropic costs
    TransportPlan<Scalar> plan;
    VectorX<Scalar> f_ab, g_ab, f_aa, g_bb;  // dual potentials
    Scalar residual;
    long iterations;
};

namespace detail {

template <typename Scalar>
MatrixX<Scalar> sq_cost(const MatrixX<Scalar>& x, const MatrixX<Scalar>& y) {
    MatrixX<Scalar> C(x.rows(), y.rows());
    for (Index j = 0; j < y.rows(); ++j)
        for (Index i = 0; i < x.rows(); ++i) C(i, j) = (x.row(i) - y.row(j)).squaredNorm();
    return C;
}

// out_i = -eps log sum_j exp(logw_j + (pot_j - C_ij)/eps), C accessed as C(i,j) or C(j,i).
template <typename Scalar, bool Transposed>
void softmin(const MatrixX<Scalar>& C, const VectorX<Scalar>& logw, const VectorX<Scalar>& pot, Scalar eps,
             VectorX<Scalar>& out) {
    const Index n = Transposed ? C.cols() : C.rows();
    const Index k = logw.size();
    out.resize(n);
    VectorX<Scalar> t(k);
    for (Index i = 0; i < n; ++i) {
        Scalar mx = -std::numeric_limits<Scalar>::infinity();
        for (Index j = 0; j < k; ++j) {
            const Scalar c = Transposed ? C(j, i) : C(i, j);
            t(j) = logw(j) + (pot(j) - c) / eps;
            mx = std::max(mx, t(j));
        }
        Scalar acc(0);
        for (Index j = 0; j < k; ++j) acc += std::exp(t(j) - mx);
        out(i) = -eps * (mx + std::log(acc));
    }
}

template <typename Scalar>
Scalar row_residual(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b,
                    const VectorX<Scalar>& f, const VectorX<Scalar>& g, Scalar eps) {
    Scalar r(0);
    for (Index i = 0; i < C.rows(); ++i) {
        Scalar row(0);
        for (Index j = 0; j < C.cols(); ++j) row += b(j) * std::exp((f(i) + g(j) - C(i, j)) / eps);
        r += std::abs(a(i) * row - a(i));
    }
    return r;
}

template <typename Scalar>
Scalar eps_start(const MatrixX<Scalar>& C, Scalar eps) {
    return std::max(eps, C.maxCoeff());
}

// Newton ascent on the two-sided dual
//   D(f, g) = a.f + b.g - eps sum_ij a_i b_j (exp((f_i + g_j - C_ij)/eps) - 1),
// g eliminated through the Schur complement; the constant shift (1, -1) is
// pinned by a rank-one term. Returns true once both marginal residuals are <= tol.
template <typename Scalar>
bool newton_pair(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b, Scalar eps,
                 Scalar tol, VectorX<Scalar>& f, VectorX<Scalar>& g, long& iters, long max_newton = 60) {
    const Index n = a.size(), k = b.size();
    auto plan = [&](const VectorX<Scalar>& ff, const VectorX<Scalar>& gg) {
        MatrixX<Scalar> P(n, k);
        for (Index j = 0; j < k; ++j)
            for (Index i = 0; i < n; ++i) P(i, j) = a(i) * b(j) * std::exp((ff(i) + gg(j) - C(i, j)) / eps);
        return P;
    };
    auto dual = [&](const VectorX<Scalar>& ff, const VectorX<Scalar>& gg, const MatrixX<Scalar>& P) {
        return a.dot(ff) + b.dot(gg) - eps * (P.sum() - 1);
    };
    MatrixX<Scalar> P = plan(f, g);
    Scalar D = dual(f, g, P);
    for (long it = 0; it < max_newton; ++it) {
        const VectorX<Scalar> r = P.rowwise().sum(), c = P.colwise().sum().transpose();
        const VectorX<Scalar> ra = a - r, rb = b - c;
        if (ra.cwiseAbs().sum() <= tol && rb.cwiseAbs().sum() <= tol) return true;
        const VectorX<Scalar> ic = c.cwiseInverse();
        // Schur complement in Jacobi-scaled form: row masses span many decades
        const VectorX<Scalar> sr = r.cwiseSqrt(), isr = sr.cwiseInverse();
        const MatrixX<Scalar> Pt = isr.asDiagonal() * P * ic.cwiseSqrt().asDiagonal();
        MatrixX<Scalar> S = -(Pt * Pt.transpose());
        S.diagonal().array() += 1;
        S += sr * sr.transpose();  // pins the gauge direction sqrt(r)
        const VectorX<Scalar> rhs = eps * isr.cwiseProduct(ra - P * ic.cwiseProduct(rb));
        const VectorX<Scalar> df = isr.cwiseProduct(S.ldlt().solve(rhs));
        const VectorX<Scalar> dg = ic.cwiseProduct(eps * rb - P.transpose() * df);
        if (!df.allFinite() || !dg.allFinite()) return false;
        ++iters;
        const Scalar res = ra.cwiseAbs().sum() + rb.cwiseAbs().sum();
        const Scalar noise = Scalar(1e3) * std::numeric_limits<Scalar>::epsilon() *
                             (std::abs(a.dot(f)) + std::abs(b.dot(g)) + eps);
        Scalar t(1);
        bool moved = false;
        for (int ls = 0; ls < 30; ++ls, t /= 2) {
            const VectorX<Scalar> f1 = f + t * df, g1 = g + t * dg;
            MatrixX<Scalar> P1 = plan(f1, g1);
            const Scalar D1 = dual(f1, g1, P1);
            if (!std::isfinite(double(D1))) continue;
            // near the optimum the dual gain drops below roundoff; the residual still decides
            const Scalar res1 = (a - P1.rowwise().sum()).cwiseAbs().sum() + (b - P1.colwise().sum().transpose()).cwiseAbs().sum();
            if (D1 > D + noise || (D1 >= D - noise && res1 < res)) {
                f = f1, g = g1, P = std::move(P1), D = D1;
                moved = true;
                break;
            }
        }
        if (!moved) return false;
    }
    return false;
}

// Newton ascent on the symmetric dual D(f) = 2a.f - eps sum_ij a_i a_j (exp((f_i + f_j - C_ij)/eps) - 1).
template <typename Scalar>
bool newton_self(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, Scalar eps, Scalar tol, VectorX<Scalar>& f,
                 long& iters, long max_newton = 60) {
    const Index n = a.size();
    auto plan = [&](const VectorX<Scalar>& ff) {
        MatrixX<Scalar> P(n, n);
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < n; ++i) P(i, j) = a(i) * a(j) * std::exp((ff(i) + ff(j) - C(i, j)) / eps);
        return P;
    };
    MatrixX<Scalar> P = plan(f);
    Scalar D = 2 * a.dot(f) - eps * (P.sum() - 1);
    for (long it = 0; it < max_newton; ++it) {
        const VectorX<Scalar> r = P.rowwise().sum();
        const VectorX<Scalar> ra = a - r;
        if (ra.cwiseAbs().sum() <= tol) return true;
        const VectorX<Scalar> isr = r.cwiseSqrt().cwiseInverse();
        MatrixX<Scalar> H = isr.asDiagonal() * P * isr.asDiagonal();
        H.diagonal().array() += 1;
        const VectorX<Scalar> df = isr.cwiseProduct(H.llt().solve(eps * isr.cwiseProduct(ra)));
        if (!df.allFinite()) return false;
        ++iters;
        const Scalar res = ra.cwiseAbs().sum();
        const Scalar noise = Scalar(1e3) * std::numeric_limits<Scalar>::epsilon() * (2 * std::abs(a.dot(f)) + eps);
        Scalar t(1);
        bool moved = false;
        for (int ls = 0; ls < 30; ++ls, t /= 2) {
            const VectorX<Scalar> f1 = f + t * df;
            MatrixX<Scalar> P1 = plan(f1);
            const Scalar D1 = 2 * a.dot(f1) - eps * (P1.sum() - 1);
            if (!std::isfinite(double(D1))) continue;
            const Scalar res1 = (a - P1.rowwise().sum()).cwiseAbs().sum();
            if (D1 > D + noise || (D1 >= D - noise && res1 < res)) {
                f = f1, P = std::move(P1), D = D1;
                moved = true;
                break;
            }
        }
        if (!moved) return false;
    }
    return false;
}

// Two-sided OT_eps(a, b); warm start from f, g when sized.
template <typename Scalar>
Scalar sinkhorn_pair(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b,
                     const SinkhornConfig& cfg, VectorX<Scalar>& f, VectorX<Scalar>& g, Scalar& residual,
                     long& iters, bool warm) {
    const VectorX<Scalar> la = a.array().log(), lb = b.array().log();
    const Scalar eps = Scalar(cfg.epsilon);
    if (!warm || f.size() != a.size() || g.size() != b.size()) {
        f = VectorX<Scalar>::Zero(a.size());
        g = VectorX<Scalar>::Zero(b.size());
        Scalar e = eps_start(C, eps);
        while (e > eps) {
            for (long it = 0; it < cfg.stage_iter; ++it) {
                softmin<Scalar, false>(C, lb, g, e, f);
                softmin<Scalar, true>(C, la, f, e, g);
                ++iters;
            }
            e = std::max(eps, e * Scalar(cfg.scaling));
        }
    }
    for (long sweeps = 0;; ++sweeps) {
        softmin<Scalar, false>(C, lb, g, eps, f);
        softmin<Scalar, true>(C, la, f, eps, g);
        ++iters;
        // columns are exact after the g update; check rows every few sweeps
        if (iters % 5 == 0 || iters >= cfg.max_iter) {
            residual = row_residual(C, a, b, f, g, eps);
            if (residual <= Scalar(cfg.tol)) break;
            if (iters >= cfg.max_iter) throw ConvergenceError("sinkhorn: no convergence", double(residual));
        }
        // small eps: plain sweeps crawl; polish with Newton on the dual, retried periodically
        if (sweeps >= cfg.newton_after && (sweeps - cfg.newton_after) % (4 * cfg.newton_after) == 0) {
            newton_pair(C, a, b, eps, Scalar(cfg.tol), f, g, iters);
            softmin<Scalar, true>(C, la, f, eps, g);
            residual = row_residual(C, a, b, f, g, eps);
            if (residual <= Scalar(cfg.tol)) break;
        }
    }
    return a.dot(f) + b.dot(g);
}

// Symmetric OT_eps(a, a): f = (f + T(f))/2.
template <typename Scalar>
Scalar sinkhorn_self(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const SinkhornConfig& cfg,
                     VectorX<Scalar>& f, long& iters, bool warm) {
    const VectorX<Scalar> la = a.array().log();
    const Scalar eps = Scalar(cfg.epsilon);
    VectorX<Scalar> t;
    if (!warm || f.size() != a.size()) {
        f = VectorX<Scalar>::Zero(a.size());
        Scalar e = eps_start(C, eps);
        while (e > eps) {
            for (long it = 0; it < cfg.stage_iter; ++it) {
                softmin<Scalar, false>(C, la, f, e, t);
                f = (f + t) / 2;
            }
            e = std::max(eps, e * Scalar(cfg.scaling));
        }
    }
    for (long it = 0;; ++it) {
        softmin<Scalar, false>(C, la, f, eps, t);
        const Scalar change = (t - f).cwiseAbs().maxCoeff();
        f = (f + t) / 2;
        ++iters;
        if (change <= Scalar(cfg.tol) * eps) break;
        if (it >= cfg.max_iter) throw ConvergenceError("sinkhorn: symmetric potential did not converge", double(change));
        if (it >= cfg.newton_after && (it - cfg.newton_after) % (4 * cfg.newton_after) == 0) {
            if (newton_self(C, a, eps, Scalar(cfg.tol), f, iters)) break;
        }
    }
    return 2 * a.dot(f);
}

}  // namespace detail

// Support points and masses of a grid density (cells with positive mass only).
template <typename Scalar, int Dim>
void grid_cloud(const GridDensity<Scalar, Dim>& u, MatrixX<Scalar>& x, VectorX<Scalar>& w, std::vector<Index>* idx = nullptr) {
    std::vector<Index> keep;
    for (Index k = 0; k < u.grid().size(); ++k)
        if (u.values()(k) > 0) keep.push_back(k);
    x.resize(Index(keep.size()), Dim);
    w.resize(Index(keep.size()));
    const Scalar vol = u.grid().cell_volume();
    for (size_t r = 0; r < keep.size(); ++r) {
        Index rest = keep[r];
        for (int a = 0; a < Dim; ++a) {
            x(Index(r), a) = u.grid().center(a, rest % u.grid().n[a]);
            rest /= u.grid().n[a];
        }
        w(Index(r)) = u.values()(keep[r]) * vol / u.mass();
    }
    if (idx) *idx = std::move(keep);
}

// Warm-start state carried between calls by the Eulerian stepper.
template <typename Scalar>
struct SinkhornWarm {
    VectorX<Scalar> f_ab, g_ab, f_aa, g_bb;
};

namespace detail {

// Debiased divergence from precomputed costs; no plan.
template <typename Scalar>
SinkhornResult<Scalar> sinkhorn_costs(const MatrixX<Scalar>& Cab, const MatrixX<Scalar>& Caa, const MatrixX<Scalar>& Cbb,
                                      const VectorX<Scalar>& a, const VectorX<Scalar>& b, const SinkhornConfig& cfg,
                                      SinkhornWarm<Scalar>* warm) {
    SinkhornResult<Scalar> r;
    const bool w = warm != nullptr;
    if (w) r.f_ab = warm->f_ab, r.g_ab = warm->g_ab, r.f_aa = warm->f_aa, r.g_bb = warm->g_bb;
    r.iterations = 0;
    r.ot_ab = sinkhorn_pair(Cab, a, b, cfg, r.f_ab, r.g_ab, r.residual, r.iterations, w);
    long it_self = 0;
    r.ot_aa = sinkhorn_self(Caa, a, cfg, r.f_aa, it_self, w);
    r.ot_bb = sinkhorn_self(Cbb, b, cfg, r.g_bb, it_self, w);
    r.divergence = r.ot_ab - (r.ot_aa + r.ot_bb) / 2;
    if (warm) *warm = {r.f_ab, r.g_ab, r.f_aa, r.g_bb};
    return r;
}

}  // namespace detail

template <typename Scalar>
SinkhornResult<Scalar> sinkhorn_points(const MatrixX<Scalar>& x, const VectorX<Scalar>& a, const MatrixX<Scalar>& y,
                                       const VectorX<Scalar>& b, const SinkhornConfig& cfg,
                                       SinkhornWarm<Scalar>* warm = nullptr, bool want_plan = true) {
    if (!(cfg.epsilon > 0)) throw DomainError("sinkhorn: epsilon must be positive");
    if ((a.array() <= 0).any() || (b.array() <= 0).any()) throw DomainError("sinkhorn: marginals must be positive");
    const MatrixX<Scalar> Cab = detail::sq_cost(x, y);
    auto r = detail::sinkhorn_costs(Cab, detail::sq_cost(x, x), detail::sq_cost(y, y), a, b, cfg, warm);
    if (want_plan) {
        const Scalar eps = Scalar(cfg.epsilon);
        r.plan.x = x, r.plan.y = y, r.plan.a = a, r.plan.b = b;
        r.plan.gamma.resize(a.size(), b.size());
        for (Index j = 0; j < b.size(); ++j)
            for (Index i = 0; i < a.size(); ++i)
                r.plan.gamma(i, j) = a(i) * b(j) * std::exp((r.f_ab(i) + r.g_ab(j) - Cab(i, j)) / eps);
    }
    return r;
}

// Debiased entropic divergence between two unit-mass grid densities. The plan
// lives on the supports of u and v; use sinkhorn_points for anything fancier.
template <typename Scalar, int Dim>
SinkhornResult<Scalar> sinkhorn(const GridDensity<Scalar, Dim>& u, const GridDensity<Scalar, Dim>& v,
                                const SinkhornConfig& cfg) {
    MatrixX<Scalar> x, y;
    VectorX<Scalar> a, b;
    std::vector<Index> idx;
    grid_cloud(u, x, a, &idx);
    grid_cloud(v, y, b);
    auto r = sinkhorn_points(x, a, y, b, cfg);
    r.plan.source_cells = std::move(idx);
    return r;
}

// Row sums vs a, column sums vs b, L1.
template <typename Scalar>
std::pair<Scalar, Scalar> marginal_residuals(const TransportPlan<Scalar>& p) {
    return {(p.gamma.rowwise().sum() - p.a).cwiseAbs().sum(), (p.gamma.colwise().sum().transpose() - p.b).cwiseAbs().sum()};
}

}  // namespace fracjko
