#pragma once

#include "fracjko/entropies.hpp"
#include "fracjko/jko.hpp"
#include "fracjko/spectral.hpp"
#include "fracjko/transport.hpp"

#include <optional>
#include <vector>

// Explicit finite-volume oracles on a fixed 1D grid. Nothing here calls the
// proximal solver except s_to_zero_experiment, which drives both sides.
namespace fracjko {

template <typename Scalar>
struct FvConfig {
    std::optional<FracParams<Scalar>> params;  // empty: s = 0, the porous medium limit
    Scalar dt = Scalar(1e-2);       // upper bound; the actual step adapts
    Scalar cfl = Scalar(0.4);
    Scalar dt_min = Scalar(1e-12);
    bool periodic = false;          // whole line (zero-padded potential, zero-flux ends) by default

    void validate() const {
        if (params) params->validate();
        if (!(dt > 0) || !(dt_min > 0)) throw DomainError("fv: dt must be positive");
        if (!(cfl > 0 && cfl < 1)) throw DomainError("fv: CFL factor must lie in (0, 1)");
    }
    Scalar s() const { return params ? params->s : Scalar(0); }
};

namespace detail {

// w at faces x_{i+1/2}, i = 0..n-1 (the last face is the right end).
template <typename Scalar>
ArrayX<Scalar> face_velocity(const GridDensity<Scalar, 1>& u, const FvConfig<Scalar>& cfg) {
    const auto& g = u.grid();
    const Index n = g.n[0];
    ArrayX<Scalar> w(n);
    if (!cfg.params) {
        // v = u: w = -(u_{i+1} - u_i)/h
        const auto& x = u.values();
        for (Index i = 0; i < n; ++i) {
            const Index j = i + 1 < n ? i + 1 : (cfg.periodic ? 0 : i);
            w(i) = -(x(j) - x(i)) / g.h();
        }
    } else if (cfg.periodic) {
        const auto v = apply_symbol(u.function(), power_symbol(g, -2 * cfg.params->s));
        w = -half_cell_shift(spectral_derivative(v)).values;
    } else {
        const auto v = riesz_potential(u, *cfg.params);
        w = -crop(half_cell_shift(spectral_derivative(v)), g).values;
    }
    if (!cfg.periodic) w(n - 1) = 0;
    return w;
}

}  // namespace detail

// Largest admissible step for u: transport CFL and the explicit-diffusion bound
// dt * max u * lambda_max <= 1, lambda_max = (pi/h)^{2-2s} (spectral) or 4/h^2 (s = 0).
template <typename Scalar>
Scalar fv_stable_dt(const GridDensity<Scalar, 1>& u, const ArrayX<Scalar>& w, const FvConfig<Scalar>& cfg) {
    const Scalar h = u.grid().h();
    const Scalar lam = cfg.params ? std::pow(std::numbers::pi_v<Scalar> / h, 2 - 2 * cfg.params->s) : 4 / (h * h);
    Scalar dt = cfg.dt;
    const Scalar wmax = w.abs().maxCoeff();
    if (wmax > 0) dt = std::min(dt, cfg.cfl * h / (2 * wmax));
    const Scalar umax = u.values().maxCoeff();
    if (umax > 0) dt = std::min(dt, cfg.cfl / (umax * lam));
    return dt;
}

// One upwind step of d_t u = d_x(u d_x v). dt_cap bounds the step from above
// (e.g. to land on a sample time); dt_used receives the step taken.
template <typename Scalar>
GridDensity<Scalar, 1> fv_step(const GridDensity<Scalar, 1>& u, const FvConfig<Scalar>& cfg, Scalar dt_cap = Scalar(-1),
                               Scalar* dt_used = nullptr) {
    cfg.validate();
    const auto& g = u.grid();
    const Index n = g.n[0];
    const ArrayX<Scalar> w = detail::face_velocity(u, cfg);
    Scalar dt = fv_stable_dt(u, w, cfg);
    if (dt_cap > 0) dt = std::min(dt, dt_cap);
    if (dt < cfg.dt_min) throw ConvergenceError("fv_step: admissible step fell below dt_min", double(dt));
    const auto& x = u.values();
    ArrayX<Scalar> F(n);  // flux through face i+1/2
    if (!cfg.params) {
        // centred (u^2)/2 flux, conservative and positive for dt <= h^2 / max u
        for (Index i = 0; i < n; ++i) {
            const Index j = i + 1 < n ? i + 1 : (cfg.periodic ? 0 : i);
            F(i) = -(x(j) * x(j) - x(i) * x(i)) / (2 * g.h());
        }
        if (!cfg.periodic) F(n - 1) = 0;
    } else {
        for (Index i = 0; i < n; ++i) {
            const Index j = i + 1 < n ? i + 1 : (cfg.periodic ? 0 : i);
            F(i) = w(i) > 0 ? w(i) * x(i) : w(i) * x(j);
        }
    }
    ArrayX<Scalar> next(n);
    const Scalar r = dt / g.h();
    for (Index i = 0; i < n; ++i) {
        const Scalar left = i > 0 ? F(i - 1) : (cfg.periodic ? F(n - 1) : Scalar(0));
        next(i) = x(i) - r * (F(i) - left);
    }
    // roundoff-level negatives only; anything larger is a CFL failure
    const Scalar floor = -Scalar(64) * std::numeric_limits<Scalar>::epsilon() * x.maxCoeff();
    if ((next < floor).any()) throw NumericalError("reference", 0, "fv_step: negative density");
    next = next.max(Scalar(0));
    if (dt_used) *dt_used = dt;
    return GridDensity<Scalar, 1>(g, next);
}

template <typename Scalar>
struct FvTrajectory {
    FvConfig<Scalar> config;
    std::vector<Scalar> times;                   // sampled times, starting at 0
    std::vector<GridDensity<Scalar, 1>> states;  // states at `times`
    std::vector<StepRecord<Scalar>> records;     // same scalars as a JKO record; W2 unused
    long steps = 0;

    const GridDensity<Scalar, 1>& at(Scalar t) const {
        for (size_t i = 0; i < times.size(); ++i)
            if (std::abs(times[i] - t) <= Scalar(1e-12) * std::max(Scalar(1), t)) return states[i];
        throw DomainError("fv trajectory: time was not sampled");
    }
};

template <typename Scalar>
StepRecord<Scalar> fv_record(long k, Scalar t, const GridDensity<Scalar, 1>& u, const FvConfig<Scalar>& cfg) {
    StepRecord<Scalar> r;
    r.k = k, r.t = t;
    r.F = cfg.params ? energy_Fs(u, *cfg.params) : lp_power(u, Scalar(2)) / 2;
    r.H = entropy_H(u);
    r.K = entropy_K(u);
    r.L2 = lp_norm(u, Scalar(2));
    r.L3 = lp_norm(u, Scalar(3));
    r.Linf = u.values().maxCoeff();
    r.M2 = second_moment(u);
    return r;
}

// Integrates to T, landing exactly on every sample time (T included).
template <typename Scalar>
FvTrajectory<Scalar> run_reference(const GridDensity<Scalar, 1>& u0, Scalar T, const FvConfig<Scalar>& cfg,
                                   std::vector<Scalar> sample_times = {}) {
    cfg.validate();
    if (!(T > 0)) throw DomainError("run_reference: horizon must be positive");
    sample_times.push_back(T);
    std::sort(sample_times.begin(), sample_times.end());
    sample_times.erase(std::unique(sample_times.begin(), sample_times.end()), sample_times.end());
    if (sample_times.front() <= 0 || sample_times.back() > T) throw DomainError("run_reference: samples must lie in (0, T]");
    FvTrajectory<Scalar> tr;
    tr.config = cfg;
    tr.times.push_back(0);
    tr.states.push_back(u0);
    tr.records.push_back(fv_record(0, Scalar(0), u0, cfg));
    GridDensity<Scalar, 1> u = u0;
    Scalar t = 0;
    long k = 0;
    for (const Scalar ts : sample_times) {
        while (t < ts) {
            Scalar dt = 0;
            try {
                u = fv_step(u, cfg, ts - t, &dt);
            } catch (const NumericalError& e) {
                throw NumericalError("reference", k + 1, e.what());
            }
            ++k;
            // snap to ts when the remainder is accumulated roundoff
            t = (ts - t - dt <= Scalar(1e-9) * dt) ? ts : t + dt;
        }
        tr.times.push_back(ts);
        tr.states.push_back(u);
        tr.records.push_back(fv_record(k, ts, u, cfg));
    }
    tr.steps = k;
    return tr;
}

// d_t u = (1/2) d_xx u^2
template <typename Scalar>
FvTrajectory<Scalar> pme_solver(const GridDensity<Scalar, 1>& u0, Scalar T, FvConfig<Scalar> cfg,
                                std::vector<Scalar> sample_times = {}) {
    cfg.params.reset();
    return run_reference(u0, T, cfg, std::move(sample_times));
}

// L1 distance of two densities on the same grid.
template <typename Scalar>
Scalar l1_distance(const GridDensity<Scalar, 1>& a, const GridDensity<Scalar, 1>& b) {
    if (!(a.grid() == b.grid())) throw SizeMismatch("l1_distance: grids differ");
    return (a.values() - b.values()).abs().sum() * a.grid().h();
}

// L1 distance of a Lagrangian state (cell averages of its induced density) to a grid density.
template <typename Scalar>
Scalar l1_distance(const QuantileProfile<Scalar>& X, const GridDensity<Scalar, 1>& b, Scalar mass = Scalar(1)) {
    const auto a = density_from_quantile(X, b.grid());
    return (a.values() * mass - b.values()).abs().sum() * b.grid().h();
}

template <typename Scalar>
struct SToZeroRow {
    Scalar s, t, L1_gap, W_gap;
};

template <typename Scalar>
struct SToZeroResult {
    std::vector<SToZeroRow<Scalar>> rows;
    std::vector<Scalar> s_list;
    std::vector<Scalar> energy_s;  // F_s(u0) per s
    Scalar energy_0 = 0;           // F_0(u0) = ||u0||_2^2 / 2
    std::vector<Scalar> final_gap; // L1 gap at T per s
};

// The common datum is regularized once (with jko.tau) and handed to both sides,
// so the JKO runs use regularize = false.
template <typename Scalar>
SToZeroResult<Scalar> s_to_zero_experiment(const GridDensity<Scalar, 1>& u0, const std::vector<Scalar>& s_list, Scalar T,
                                           JkoConfig<Scalar> jko, FvConfig<Scalar> fv,
                                           std::vector<Scalar> sample_times = {}) {
    if (s_list.empty()) throw DomainError("s_to_zero: empty s list");
    for (size_t i = 0; i < s_list.size(); ++i) {
        FracParams<Scalar>(1, s_list[i]);
        if (i > 0 && !(s_list[i] < s_list[i - 1])) throw DomainError("s_to_zero: s list must be decreasing");
    }
    const auto datum = jko.regularize ? regularize_initial(u0, jko.tau) : u0;
    jko.regularize = false;
    jko.horizon = T;
    sample_times.push_back(T);
    std::sort(sample_times.begin(), sample_times.end());
    sample_times.erase(std::unique(sample_times.begin(), sample_times.end()), sample_times.end());
    const auto pme = pme_solver(datum, T, fv, sample_times);
    SToZeroResult<Scalar> out;
    out.s_list = s_list;
    out.energy_0 = lp_power(datum, Scalar(2)) / 2;
    for (const Scalar s : s_list) {
        jko.params = FracParams<Scalar>(1, s);
        out.energy_s.push_back(energy_Fs(datum, jko.params));
        const auto tr = run_trajectory(datum, jko);
        for (const Scalar t : sample_times) {
            const auto& X = tr.at(t);
            const auto& P = pme.at(t);
            const Scalar W = w2_1d(X, quantile_from_density(P.normalized(), X.m()));
            out.rows.push_back({s, t, l1_distance(X, P, tr.mass), W});
        }
        out.final_gap.push_back(out.rows.back().L1_gap);
    }
    return out;
}

}  // namespace fracjko
