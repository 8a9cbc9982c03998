#pragma once

#include "fracjko/entropies.hpp"
#include "fracjko/isotonic.hpp"
#include "fracjko/pairwise_energy.hpp"
#include "fracjko/spectral.hpp"
#include "fracjko/transport.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace fracjko {

enum class Representation { lagrangian_1d, eulerian_sinkhorn };

template <typename Scalar>
struct JkoConfig {
    FracParams<Scalar> params;
    Scalar tau = Scalar(1e-2);
    Scalar horizon = Scalar(1);
    Representation representation = Representation::lagrangian_1d;
    Scalar tol = Scalar(1e-9);          // projected-gradient max norm, relative to the force scale
    int max_iter = 200;
    Index nodes = 256;                  // Lagrangian m
    bool self_correction = true;        // see LagrangianEnergy
    bool regularize = true;             // mollify u0 before stepping
    double sinkhorn_epsilon = 1e-3;
    Scalar eulerian_tol = Scalar(1e-6);
    int eulerian_max_iter = 500;
    Scalar truncation_r = Scalar(-1);   // d = 1 interpolation order, < 0 means (1 - s)/2
    long store_stride = 1;              // keep every n-th state

    void validate() const {
        params.validate();
        if (!(tau > 0)) throw DomainError("jko: tau must be positive");
        if (!(horizon >= tau)) throw DomainError("jko: horizon must be >= tau");
        if (!(tol > 0) || max_iter < 1) throw DomainError("jko: tolerances must be positive");
        if (representation == Representation::lagrangian_1d && (params.d != 1 || nodes < 2))
            throw DomainError("jko: lagrangian representation needs d = 1 and at least two nodes");
        if (store_stride < 1) throw DomainError("jko: store_stride must be >= 1");
    }
    Scalar r_param() const { return truncation_r > 0 ? truncation_r : (1 - params.s) / 2; }
};

// omega(tau) of the logarithmic mollifier.
template <typename Scalar>
Scalar mollifier_time(Scalar tau) {
    using std::log;
    if (!(tau > 0)) throw DomainError("mollifier_time: tau must be positive");
    return tau < Scalar(0.5) ? -1 / log(tau) : 1 / log(Scalar(2));
}

namespace detail {

// Exact cell integrals of a 1D Gaussian of variance 2 omega, applied along one axis.
template <typename Scalar>
MatrixX<Scalar> heat_matrix(const Grid1D<Scalar>& g, Scalar omega) {
    using std::sqrt;
    const Index n = g.n[0];
    const Scalar sig = sqrt(2 * omega), h = g.h();
    // W(i, j) = P(x_i - Y in cell j), Y ~ N(0, sig^2): depends on i - j only
    ArrayX<Scalar> w(2 * n - 1);
    for (Index k = -(n - 1); k <= n - 1; ++k) {
        const Scalar lo = (Scalar(k) - Scalar(0.5)) * h / (sig * std::numbers::sqrt2_v<Scalar>);
        const Scalar hi = (Scalar(k) + Scalar(0.5)) * h / (sig * std::numbers::sqrt2_v<Scalar>);
        w(k + n - 1) = (std::erf(hi) - std::erf(lo)) / 2;
    }
    MatrixX<Scalar> W(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) W(i, j) = w(i - j + n - 1);
    return W;
}

}  // namespace detail

// Gamma_omega * u0, omega = mollifier_time(tau). Cell averages convolved with the
// exact cell mass of the heat kernel, so the result is nonnegative; mass leaking
// out of the box must be below 1e-10 and the remainder is renormalised.
template <typename Scalar, int Dim>
GridDensity<Scalar, Dim> mollify(const GridDensity<Scalar, Dim>& u0, Scalar omega) {
    ArrayX<Scalar> v = u0.values();
    for (int a = 0; a < Dim; ++a) {
        Grid1D<Scalar> g({u0.grid().n[a]}, {u0.grid().length[a]}, {u0.grid().origin[a]});
        const MatrixX<Scalar> W = detail::heat_matrix(g, omega);
        const Index n = u0.grid().n[a];
        const Index stride = a == 0 ? 1 : u0.grid().n[0];
        const Index lines = u0.grid().size() / n;
        VectorX<Scalar> line(n);
        for (Index l = 0; l < lines; ++l) {
            const Index base = a == 0 ? l * n : l;
            for (Index i = 0; i < n; ++i) line(i) = v(base + i * stride);
            const VectorX<Scalar> out = W * line;
            for (Index i = 0; i < n; ++i) v(base + i * stride) = out(i);
        }
    }
    const Scalar kept = v.sum() * u0.grid().cell_volume();
    using std::abs;
    if (abs(kept - u0.mass()) > Scalar(1e-10) * u0.mass())
        throw DomainError("mollify: box too small, heat kernel pushes mass off the grid");
    return GridDensity<Scalar, Dim>(u0.grid(), v * (u0.mass() / kept));
}

template <typename Scalar, int Dim>
GridDensity<Scalar, Dim> regularize_initial(const GridDensity<Scalar, Dim>& u0, Scalar tau) {
    return mollify(u0, mollifier_time(tau));
}

struct StepInfo {
    int iterations = 0;
    double residual = 0;  // scaled projected gradient / force scale
};

namespace detail {

template <typename Scalar>
bool strictly_increasing(const VectorX<Scalar>& X) {
    for (Index i = 1; i < X.size(); ++i)
        if (!(X(i) > X(i - 1))) return false;
    return true;
}

}  // namespace detail

// argmin E(X) + |X - Y|^2/(2 step m) over the ordered cone. Damped Newton on
// the exact Hessian; trial points are PAV-projected and rejected if the
// projection had to pool nodes (the energy is +inf on the cone boundary).
template <typename Scalar>
QuantileProfile<Scalar> prox_lagrangian(const QuantileProfile<Scalar>& Y, Scalar step,
                                        const LagrangianEnergy<Scalar>& E, Scalar tol, int max_iter,
                                        StepInfo* info = nullptr) {
    using std::abs;
    if (!(step > 0)) throw DomainError("prox_lagrangian: step must be positive");
    if (!Y.strictly_increasing()) throw SingularInputError("prox_lagrangian: coincident input nodes");
    const Index m = Y.m();
    const Scalar sm = Scalar(m);
    VectorX<Scalar> X = Y.X, g(m), r(m), gt(m);
    MatrixX<Scalar> H(m, m);
    // objective scaled by m: m E(X) + |X - Y|^2 / (2 step)
    auto phi = [&](const VectorX<Scalar>& Z) { return sm * E.value(Z) + (Z - Y.X).squaredNorm() / (2 * step); };
    auto residual = [&](const VectorX<Scalar>& Z, const VectorX<Scalar>& grad, VectorX<Scalar>& res) {
        const VectorX<Scalar> force = sm * grad;
        const VectorX<Scalar> disp = (Z - Y.X) / step;
        res = force + disp;
        const Scalar scale = std::max(force.cwiseAbs().maxCoeff(), disp.cwiseAbs().maxCoeff());
        return scale > 0 ? res.cwiseAbs().maxCoeff() / scale : Scalar(0);
    };
    Eigen::LLT<MatrixX<Scalar>> llt;
    Scalar f = phi(X);
    E.evaluate(X, &g, &H);
    Scalar rel = residual(X, g, r);
    int it = 0;
    for (; it < max_iter && rel > tol; ++it) {
        H *= sm;
        H.diagonal().array() += 1 / step;
        llt.compute(H);
        if (llt.info() != Eigen::Success) throw ConvergenceError("prox_lagrangian: Hessian not positive definite", double(rel));
        const VectorX<Scalar> dir = -llt.solve(r);
        const Scalar slope = r.dot(dir);
        Scalar alpha(1);
        bool accepted = false;
        VectorX<Scalar> trial;
        Scalar ft = 0;
        for (int ls = 0; ls < 60; ++ls, alpha /= 2) {
            trial = isotonic_projection(X + alpha * dir);
            if (!detail::strictly_increasing(trial)) continue;
            ft = phi(trial);
            if (ft <= f + Scalar(1e-4) * alpha * slope) {
                accepted = true;
                break;
            }
            // below roundoff the objective cannot resolve the decrease; use the gradient
            if (ft - f <= Scalar(64) * std::numeric_limits<Scalar>::epsilon() * abs(f)) {
                E.evaluate(trial, &gt, nullptr);
                VectorX<Scalar> rt;
                if (residual(trial, gt, rt) < rel) {
                    accepted = true;
                    break;
                }
            }
        }
        if (!accepted) break;
        X = trial;
        f = ft;
        E.evaluate(X, &g, &H);
        rel = residual(X, g, r);
    }
    if (info) *info = {it, double(rel)};
    if (rel > tol) throw ConvergenceError("prox_lagrangian: gradient tolerance not reached", double(rel));
    return QuantileProfile<Scalar>(X);
}

template <typename Scalar>
QuantileProfile<Scalar> jko_step_lagrangian(const QuantileProfile<Scalar>& Y, const JkoConfig<Scalar>& cfg,
                                            StepInfo* info = nullptr) {
    const LagrangianEnergy<Scalar> E(cfg.params, cfg.self_correction);
    return prox_lagrangian(Y, cfg.tau, E, cfg.tol, cfg.max_iter, info);
}

template <typename Scalar>
QuantileProfile<Scalar> variational_interpolant(const QuantileProfile<Scalar>& u_prev, Scalar delta,
                                                const JkoConfig<Scalar>& cfg, StepInfo* info = nullptr) {
    if (!(delta > 0 && delta <= cfg.tau * (1 + Scalar(1e-12))))
        throw DomainError("variational_interpolant: need 0 < delta <= tau");
    const LagrangianEnergy<Scalar> E(cfg.params, cfg.self_correction);
    return prox_lagrangian(u_prev, delta, E, cfg.tol, cfg.max_iter, info);
}

// ---------------------------------------------------------------- Eulerian

template <typename Scalar>
struct EulerianWarm {
    SinkhornWarm<Scalar> sinkhorn;
};

namespace detail {

template <typename Scalar, int Dim>
struct EulerianObjective {
    const GridDensity<Scalar, Dim>& prev;
    const JkoConfig<Scalar>& cfg;
    MatrixX<Scalar> Cab, Caa, Cbb;
    MatrixX<Scalar> R;  // v = R u on the grid cells
    VectorX<Scalar> b;
    SinkhornWarm<Scalar> warm;
    SinkhornConfig scfg;
    // state of the last eval
    VectorX<Scalar> a, G;
    SinkhornResult<Scalar> sk;

    EulerianObjective(const GridDensity<Scalar, Dim>& p, const JkoConfig<Scalar>& c) : prev(p), cfg(c) {
        MatrixX<Scalar> x, y;
        VectorX<Scalar> dummy;
        // every cell is a candidate location for the new density
        GridDensity<Scalar, Dim> full(p.grid(), ArrayX<Scalar>::Ones(p.grid().size()));
        grid_cloud(full, x, dummy);
        grid_cloud(p, y, b);
        Cab = sq_cost(x, y), Caa = sq_cost(x, x), Cbb = sq_cost(y, y);
        scfg.epsilon = c.sinkhorn_epsilon;
        scfg.tol = 1e-11;
        const Index n = p.grid().size();
        R.resize(n, n);
        for (Index k = 0; k < n; ++k) {
            ArrayX<Scalar> e = ArrayX<Scalar>::Zero(n);
            e(k) = 1;
            R.col(k) = crop(riesz_potential(GridDensity<Scalar, Dim>(p.grid(), e), c.params), p.grid()).values.matrix();
        }
        R = (R + R.transpose()).eval() / 2;
    }

    static VectorX<Scalar> softmax(const VectorX<Scalar>& th) {
        const Scalar mx = th.maxCoeff();
        VectorX<Scalar> w = (th.array() - mx).exp().matrix();
        return w / w.sum();
    }

    // J(theta) and dJ/dtheta; also the stationarity residual of the simplex problem.
    Scalar eval(const VectorX<Scalar>& th, VectorX<Scalar>& grad, Scalar& stat) {
        a = softmax(th);
        const Scalar vol = prev.grid().cell_volume(), mass = prev.mass();
        const VectorX<Scalar> v = R * (a * (mass / vol));
        const Scalar F = Scalar(0.5) * mass * a.dot(v);
        sk = sinkhorn_costs(Cab, Caa, Cbb, a, b, scfg, &warm);
        // d/da of F(mass * a / vol) = mass * v; divergence scales with mass too
        G = mass * v + mass * (sk.f_ab - sk.f_aa) / (2 * cfg.tau);
        const Scalar Gbar = a.dot(G);
        grad = a.cwiseProduct((G.array() - Gbar).matrix());
        const Scalar vbar = a.dot(v);
        stat = grad.cwiseAbs().sum() / (mass * a.cwiseProduct((v.array() - vbar).matrix()).cwiseAbs().sum() + Scalar(1e-300));
        return F + mass * sk.divergence / (2 * cfg.tau);
    }

    // Hessian in a, conjugated by diag(sqrt a). The Sinkhorn parts follow from
    // differentiating the optimality conditions of the pair and self problems:
    //   pair:  eps N (I - N)^+,   N = P P^T,  P_ij = sqrt(a_i b_j) exp((f_i + g_j - C_ij)/eps)
    //   self:  eps (I + Q)^{-1} Q,  Q_ij = sqrt(a_i a_j) exp((f_i + f_j - C_ij)/eps)
    // N has eigenvector sqrt a with eigenvalue 1; adding s s^T removes the null space.
    MatrixX<Scalar> scaled_hessian() const {
        const Index n = a.size(), k = b.size();
        const Scalar eps = Scalar(scfg.epsilon), vol = prev.grid().cell_volume(), mass = prev.mass();
        const VectorX<Scalar> s = a.cwiseSqrt(), sb = b.cwiseSqrt();
        MatrixX<Scalar> P(n, k), Q(n, n);
        for (Index j = 0; j < k; ++j)
            for (Index i = 0; i < n; ++i)
                P(i, j) = s(i) * sb(j) * std::exp((sk.f_ab(i) + sk.g_ab(j) - Cab(i, j)) / eps);
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < n; ++i) Q(i, j) = s(i) * s(j) * std::exp((sk.f_aa(i) + sk.f_aa(j) - Caa(i, j)) / eps);
        const MatrixX<Scalar> N = P * P.transpose();
        MatrixX<Scalar> K = -N;
        K.diagonal().array() += 1;
        K += s * s.transpose();
        MatrixX<Scalar> Hp = K.ldlt().solve(N);
        MatrixX<Scalar> IQ = Q;
        IQ.diagonal().array() += 1;
        MatrixX<Scalar> Hs = -IQ.llt().solve(MatrixX<Scalar>::Identity(n, n));
        Hs.diagonal().array() += 1;
        MatrixX<Scalar> H = (mass * mass / vol) * (s.asDiagonal() * R * s.asDiagonal());
        H += (mass * eps / (2 * cfg.tau)) * (Hp + Hs);
        // restrict to the tangent space s^perp
        const VectorX<Scalar> Hs_s = H * s;
        H -= s * Hs_s.transpose() + Hs_s * s.transpose();
        H += (s.dot(Hs_s)) * s * s.transpose();
        return (H + H.transpose()) / 2;
    }
};

}  // namespace detail

// argmin F_s(u) + S_eps(u, u_prev)/(2 tau) over densities on u_prev's grid with
// u_prev's mass. Logits, damped Newton with the exact Hessian, Armijo backtracking.
template <typename Scalar, int Dim>
GridDensity<Scalar, Dim> jko_step_eulerian(const GridDensity<Scalar, Dim>& u_prev, const JkoConfig<Scalar>& cfg,
                                           EulerianWarm<Scalar>* warm = nullptr, StepInfo* info = nullptr) {
    cfg.params.validate();
    if (cfg.params.d != Dim) throw SizeMismatch("jko_step_eulerian: dimension mismatch");
    detail::EulerianObjective<Scalar, Dim> obj(u_prev, cfg);
    if (warm) obj.warm = warm->sinkhorn;
    // logits below max - floor_gap would underflow the softmax
    const Scalar floor_gap(600);
    const Scalar top = std::log(u_prev.values().maxCoeff());
    VectorX<Scalar> th = u_prev.values().log().matrix().cwiseMax(top - floor_gap);
    VectorX<Scalar> g, gn;
    Scalar stat = 0, statn = 0;
    Scalar J = obj.eval(th, g, stat);
    Scalar lambda = -1;
    int it = 0;
    for (; it < cfg.eulerian_max_iter && stat > cfg.eulerian_tol; ++it) {
        const VectorX<Scalar> s = obj.a.cwiseSqrt();
        const VectorX<Scalar> a = obj.a;
        MatrixX<Scalar> H = obj.scaled_hessian();
        VectorX<Scalar> gs = s.cwiseProduct(obj.G);
        gs -= s.dot(gs) * s;
        if (lambda < 0) lambda = Scalar(1e-3) * H.diagonal().maxCoeff();
        VectorX<Scalar> z;
        for (;;) {
            MatrixX<Scalar> Hl = H;
            Hl.diagonal().array() += lambda;
            Eigen::LLT<MatrixX<Scalar>> llt(Hl);
            if (llt.info() == Eigen::Success) {
                z = -llt.solve(gs);
                if (z.allFinite()) break;
            }
            lambda *= 10;
        }
        const VectorX<Scalar> dir = z.cwiseQuotient(s);
        const Scalar slope = gs.dot(z);
        Scalar alpha(1), Jn = 0;
        VectorX<Scalar> thn;
        bool ok = false;
        for (int ls = 0; ls < 40; ++ls, alpha /= 2) {
            thn = th + alpha * dir;
            thn = thn.cwiseMax(thn.maxCoeff() - floor_gap);
            Jn = obj.eval(thn, gn, statn);
            if (Jn <= J + Scalar(1e-4) * alpha * slope) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            obj.eval(th, g, stat);  // restore state
            if (lambda > Scalar(1e30)) break;
            lambda *= 100;
            continue;
        }
        lambda = alpha == 1 ? std::max(lambda / 10, Scalar(1e-14) * H.diagonal().maxCoeff()) : lambda * 10;
        th = thn, g = gn, J = Jn, stat = statn;
    }
    if (warm) warm->sinkhorn = obj.warm;
    if (info) *info = {it, double(stat)};
    if (stat > cfg.eulerian_tol) throw ConvergenceError("jko_step_eulerian: stationarity tolerance not reached", double(stat));
    const VectorX<Scalar> a = detail::EulerianObjective<Scalar, Dim>::softmax(th);
    return GridDensity<Scalar, Dim>(u_prev.grid(), (a.array() * (u_prev.mass() / u_prev.grid().cell_volume())));
}

// ---------------------------------------------------------------- trajectories

// Upper integer part with t/tau snapped to integers within 1e-9 relative.
template <typename Scalar>
long upper_integer_part(Scalar t, Scalar tau) {
    if (!(t >= 0) || !(tau > 0)) throw DomainError("upper_integer_part: need t >= 0, tau > 0");
    const double x = double(t / tau);
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return long(r);
    return long(std::ceil(x));
}

// Lower integer part max{m : m < a}, same snapping.
template <typename Scalar>
long strict_lower_integer_part(Scalar a) {
    const double x = double(a);
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return long(r) - 1;
    return long(std::floor(x));
}

template <typename Scalar>
struct StepRecord {
    long k = 0;
    Scalar t = 0;
    Scalar W2 = 0;  // squared distance to the previous state
    Scalar F = 0, H = 0, K = 0, L2 = 0, L3 = 0, Linf = 0, M2 = 0;
    int iterations = 0;
    double opt_residual = 0;
};

template <typename Scalar, typename State>
struct JkoTrajectory {
    JkoConfig<Scalar> config;
    std::vector<State> states;        // states[i] is step state_index[i]
    std::vector<long> state_index;
    std::vector<StepRecord<Scalar>> records;  // one per k = 0..N
    Scalar mass = 1;                  // Lagrangian states are unit-mass shapes of mass * X

    long steps() const { return long(records.size()) - 1; }
    long index_at(Scalar t) const {
        const long k = upper_integer_part(t, config.tau);
        if (k > steps()) throw DomainError("trajectory: time beyond horizon");
        return k;
    }
    const State* state(long k) const {
        if (k % config.store_stride != 0 && k != steps()) return nullptr;
        for (size_t i = 0; i < state_index.size(); ++i)
            if (state_index[i] == k) return &states[i];
        return nullptr;
    }
    // u_tau(t) = u^{ceil(t/tau)}
    const State& at(Scalar t) const {
        const State* s = state(index_at(t));
        if (!s) throw DomainError("trajectory: state not stored (store_stride)");
        return *s;
    }
};

// Records of the state M * X (total mass M; X itself is always unit mass).
template <typename Scalar>
StepRecord<Scalar> make_record(long k, Scalar t, const QuantileProfile<Scalar>& X, const LagrangianEnergy<Scalar>& E,
                               Scalar W2, const StepInfo& info, Scalar mass = Scalar(1)) {
    const Scalar M = mass;
    const auto pc = induced_density(X);
    StepRecord<Scalar> r;
    r.k = k, r.t = t, r.W2 = W2;
    r.F = M * M * E.value(X.X);
    r.H = pc.integrate([M](Scalar x) { return xlogx(M * x); });
    r.K = pc.integrate([M](Scalar x) { return M * x * std::log1p(M * x); });
    r.L2 = M * std::sqrt(pc.integrate([](Scalar x) { return x * x; }));
    r.L3 = M * std::cbrt(pc.integrate([](Scalar x) { return x * x * x; }));
    r.Linf = M * pc.sup();
    r.M2 = M * second_moment(X);
    r.iterations = info.iterations;
    r.opt_residual = info.residual;
    return r;
}

using LagrangianObserver = std::function<void(long k)>;

template <typename Scalar>
JkoTrajectory<Scalar, QuantileProfile<Scalar>> run_trajectory_from(const QuantileProfile<Scalar>& X0,
                                                                    const JkoConfig<Scalar>& cfg,
                                                                    const LagrangianObserver& observer = {},
                                                                    Scalar mass = Scalar(1)) {
    cfg.validate();
    if (!(mass > 0) || !std::isfinite(double(mass))) throw DomainError("run_trajectory: mass must be positive");
    const LagrangianEnergy<Scalar> E(cfg.params, cfg.self_correction);
    JkoTrajectory<Scalar, QuantileProfile<Scalar>> tr;
    tr.config = cfg;
    tr.mass = mass;
    // F(M w) = M^2 F(w) and W^2(M w, M y) = M W^2(w, y): a mass-M step is a unit step of length M tau
    const Scalar step = cfg.tau * mass;
    const long N = upper_integer_part(cfg.horizon, cfg.tau);
    tr.records.reserve(size_t(N + 1));
    tr.records.push_back(make_record(0, Scalar(0), X0, E, Scalar(0), StepInfo{}, mass));
    tr.states.push_back(X0);
    tr.state_index.push_back(0);
    QuantileProfile<Scalar> X = X0;
    for (long k = 1; k <= N; ++k) {
        StepInfo info;
        QuantileProfile<Scalar> Xn;
        try {
            Xn = prox_lagrangian(X, step, E, cfg.tol, cfg.max_iter, &info);
        } catch (const std::exception& e) {
            throw NumericalError("jko", k, e.what());
        }
        const Scalar W = w2_1d(Xn, X);
        tr.records.push_back(make_record(k, Scalar(k) * cfg.tau, Xn, E, mass * W * W, info, mass));
        X = std::move(Xn);
        if (k % cfg.store_stride == 0 || k == N) {
            tr.states.push_back(X);
            tr.state_index.push_back(k);
        }
        if (observer) observer(k);
    }
    return tr;
}

// Lagrangian trajectory from a grid datum: mollify, take quantiles, step.
template <typename Scalar>
JkoTrajectory<Scalar, QuantileProfile<Scalar>> run_trajectory(const GridDensity<Scalar, 1>& u0,
                                                               const JkoConfig<Scalar>& cfg,
                                                               const LagrangianObserver& observer = {}) {
    cfg.validate();
    if (cfg.representation != Representation::lagrangian_1d)
        throw DomainError("run_trajectory: use run_trajectory_eulerian for the Eulerian representation");
    const auto datum = cfg.regularize ? regularize_initial(u0, cfg.tau) : u0;
    const auto X0 = quantile_from_density(datum.normalized(), cfg.nodes);
    const Scalar M = datum.mass();
    using std::abs;
    return run_trajectory_from(X0, cfg, observer, abs(M - 1) <= Scalar(1e-12) ? Scalar(1) : M);
}

template <typename Scalar, int Dim>
StepRecord<Scalar> make_record(long k, Scalar t, const GridDensity<Scalar, Dim>& u, const FracParams<Scalar>& p,
                               Scalar W2, const StepInfo& info) {
    StepRecord<Scalar> r;
    r.k = k, r.t = t, r.W2 = W2;
    r.F = energy_Fs(u, p);
    r.H = entropy_H(u);
    r.K = entropy_K(u);
    r.L2 = lp_norm(u, Scalar(2));
    r.L3 = lp_norm(u, Scalar(3));
    r.Linf = u.values().maxCoeff();
    r.M2 = second_moment(u);
    r.iterations = info.iterations;
    r.opt_residual = info.residual;
    return r;
}

// Eulerian trajectory; W2 records the debiased Sinkhorn divergence of each step.
template <typename Scalar, int Dim>
JkoTrajectory<Scalar, GridDensity<Scalar, Dim>> run_trajectory_eulerian(const GridDensity<Scalar, Dim>& u0,
                                                                        const JkoConfig<Scalar>& cfg) {
    cfg.params.validate();
    if (!(cfg.tau > 0) || !(cfg.horizon >= cfg.tau)) throw DomainError("jko: invalid tau/horizon");
    auto u = cfg.regularize ? regularize_initial(u0, cfg.tau) : u0;
    JkoTrajectory<Scalar, GridDensity<Scalar, Dim>> tr;
    tr.config = cfg;
    const long N = upper_integer_part(cfg.horizon, cfg.tau);
    tr.records.push_back(make_record(0, Scalar(0), u, cfg.params, Scalar(0), StepInfo{}));
    tr.states.push_back(u);
    tr.state_index.push_back(0);
    EulerianWarm<Scalar> warm;
    SinkhornConfig scfg;
    scfg.epsilon = cfg.sinkhorn_epsilon;
    for (long k = 1; k <= N; ++k) {
        StepInfo info;
        GridDensity<Scalar, Dim> un;
        Scalar W2 = 0;
        try {
            un = jko_step_eulerian(u, cfg, &warm, &info);
            W2 = sinkhorn(un.normalized(), u.normalized(), scfg).divergence * u.mass();
        } catch (const std::exception& e) {
            throw NumericalError("jko", k, e.what());
        }
        tr.records.push_back(make_record(k, Scalar(k) * cfg.tau, un, cfg.params, W2, info));
        u = std::move(un);
        if (k % cfg.store_stride == 0 || k == N) {
            tr.states.push_back(u);
            tr.state_index.push_back(k);
        }
    }
    return tr;
}

// ---------------------------------------------------------------- two-scale ladder

template <typename Scalar>
struct TruncationData {
    Scalar q, theta, exponent;  // exponent = 3q - 2 (d >= 2) or 2q - 2 + q theta (d = 1)
    Scalar S;                   // Sobolev constant used
    Scalar M;                   // M_tau(t)
    Scalar Q, R;                // recursion constants A_j <= Q R^j A_{j-1}^q
};

template <typename Scalar>
TruncationData<Scalar> truncation_data(Scalar A, Scalar t, const FracParams<Scalar>& p, Scalar r = Scalar(-1)) {
    using std::pow;
    p.validate();
    if (!(A > 0) || !(t > 0)) throw DomainError("truncation_level: need A > 0, t > 0");
    TruncationData<Scalar> td;
    if (p.d >= 2) {
        td.q = Scalar(p.d) / (Scalar(p.d) - 2 + 2 * p.s);
        td.theta = 1;
        td.exponent = 3 * td.q - 2;
        td.S = sobolev_constant(p.d, 1 - p.s);
    } else {
        if (r <= 0) r = (1 - p.s) / 2;
        if (!(r > 0 && r < Scalar(0.5))) throw DomainError("truncation_level: need 0 < r < 1/2");
        td.q = 1 / (1 - 2 * r);
        td.theta = r / (1 - p.s);
        td.exponent = 2 * td.q - 2 + td.q * td.theta;
        td.S = sobolev_constant(1, r);
    }
    const Scalar q = td.q, e = td.exponent;
    td.M = pow(Scalar(2), q / (q - 1)) * pow(td.S, 2 * q / e) * pow(A, (q - 1) / e) * pow(t, -q * td.theta / e);
    // d >= 2: Q = S^{2q} t^{-q} M^{2-3q}; d = 1: Q = S^{2q} t^{-q theta} M^{2-2q-q theta}
    td.Q = pow(td.S, 2 * q) * pow(t, -q * td.theta) * pow(td.M, -e);
    td.R = pow(Scalar(2), e);
    return td;
}

template <typename Scalar>
Scalar truncation_level(Scalar A, Scalar t, const FracParams<Scalar>& p, Scalar r = Scalar(-1)) {
    return truncation_data(A, t, p, r).M;
}

template <typename Scalar>
struct RefinementLadder {
    Scalar t = 0;
    long j_tau = 0;
    Scalar M_tau = 0;
    std::vector<long> j;
    std::vector<Scalar> T;       // T_j
    std::vector<Scalar> levels;  // M_{tau,j}
    std::vector<Scalar> A;       // A_j (A_{j(tau)} = ||u||_2^2)
    std::vector<Scalar> W2;      // W^2(u_j, u_{j-1}), 0 at j(tau)
    std::vector<Scalar> sup;     // sup of each state
    std::vector<QuantileProfile<Scalar>> states;
};

template <typename Scalar>
Scalar dyadic_time(Scalar t, long j) {
    return t * (1 - std::ldexp(Scalar(1), int(-j)));
}

// Smallest j with T_j > tau * floor(t / tau), floor the strict lower integer part.
template <typename Scalar>
long j_of_tau(Scalar t, Scalar tau) {
    const Scalar target = tau * Scalar(std::max(0L, strict_lower_integer_part(t / tau)));
    long j = 0;
    while (!(dyadic_time(t, j) > target)) {
        ++j;
        if (j > 200) throw DomainError("j_of_tau: no dyadic time beyond tau floor(t/tau)");
    }
    return j;
}

template <typename Scalar>
RefinementLadder<Scalar> two_scale_refine(const QuantileProfile<Scalar>& u_anchor, Scalar t, long j_max,
                                          const JkoConfig<Scalar>& cfg) {
    const long j0 = j_of_tau(t, cfg.tau);
    if (j_max < j0 + 1) throw DomainError("two_scale_refine: need j_max >= j(tau) + 1");
    const LagrangianEnergy<Scalar> E(cfg.params, cfg.self_correction);
    RefinementLadder<Scalar> L;
    L.t = t;
    L.j_tau = j0;
    const Scalar A0 = std::pow(lp_norm(u_anchor, Scalar(2)), 2);
    L.M_tau = truncation_level(A0, t, cfg.params, cfg.r_param());
    L.j.push_back(j0);
    L.T.push_back(dyadic_time(t, j0));
    L.levels.push_back((2 - std::ldexp(Scalar(1), int(-j0))) * L.M_tau);
    L.A.push_back(A0);
    L.W2.push_back(0);
    L.sup.push_back(lp_norm(u_anchor, std::numeric_limits<Scalar>::infinity()));
    L.states.push_back(u_anchor);
    for (long j = j0 + 1; j <= j_max; ++j) {
        const Scalar step = t * std::ldexp(Scalar(1), int(-j));
        QuantileProfile<Scalar> next;
        try {
            next = prox_lagrangian(L.states.back(), step, E, cfg.tol, cfg.max_iter);
        } catch (const std::exception& e) {
            throw NumericalError("two-scale", j, e.what());
        }
        const Scalar Mj = (2 - std::ldexp(Scalar(1), int(-j))) * L.M_tau;
        const Scalar W = w2_1d(next, L.states.back());
        L.j.push_back(j);
        L.T.push_back(dyadic_time(t, j));
        L.levels.push_back(Mj);
        L.A.push_back(excess_l2(next, Mj));
        L.W2.push_back(W * W);
        L.sup.push_back(lp_norm(next, std::numeric_limits<Scalar>::infinity()));
        L.states.push_back(std::move(next));
    }
    return L;
}

}  // namespace fracjko
