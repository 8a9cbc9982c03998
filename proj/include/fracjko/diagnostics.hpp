#pragma once

#include "fracjko/entropies.hpp"
#include "fracjko/jko.hpp"
#include "fracjko/quadrature.hpp"

#include <functional>
#include <limits>
#include <numeric>

namespace fracjko {

template <typename Scalar>
struct DecayConstants {
    int d = 1;
    Scalar s = 0, p = 0;
    Scalar gamma_p = 0, beta_p = 0, Ct_p = 0, C_p = 0;
    Scalar gamma_0 = 0, beta_0 = 0, Ct_0 = 0, C_0 = 0;
    Scalar gamma_inf = 0;
    Scalar S = 0;  // S_{d,1-s} (d >= 2) or S_{1,(1-s)/(4-2s)} (d = 1)
    Scalar A = 0, B = 0;
};

// p may be +inf; p = 1 gives the no-decay branch (gamma = 0, C = 1).
template <typename Scalar>
DecayConstants<Scalar> decay_constants(int d, Scalar s, Scalar p) {
    using std::pow;
    FracParams<Scalar>(d, s);
    if (!(p >= 1)) throw DomainError("decay_constants: need p >= 1");
    DecayConstants<Scalar> c;
    c.d = d, c.s = s, c.p = p;
    const Scalar D = Scalar(d), w = 2 * (1 - s);
    c.gamma_inf = D / (D + w);
    if (d >= 2) {
        c.S = sobolev_constant(d, 1 - s);
        c.A = c.B = pow(c.S, Scalar(-2));
    } else {
        c.S = sobolev_constant(1, (1 - s) / (4 - 2 * s));
        c.A = pow(c.S, 2 * s - 2);
        c.B = pow(c.S, 4 * s - 8);
    }
    c.gamma_0 = c.gamma_inf / 2;
    c.beta_0 = (3 * D + 4 * (1 - s)) / D;
    c.Ct_0 = pow(Scalar(2), -c.beta_0) * c.A;
    c.C_0 = pow(c.Ct_0 * (c.beta_0 - 1), -c.gamma_0);
    if (p == 1) {
        c.gamma_p = 0;
        c.beta_p = std::numeric_limits<Scalar>::infinity();
        c.Ct_p = 0;
        c.C_p = 1;
    } else if (std::isinf(double(p))) {
        c.gamma_p = c.gamma_inf;
        c.beta_p = 1;
        c.Ct_p = 4 * c.B;
        c.C_p = std::numeric_limits<Scalar>::quiet_NaN();  // see linf_constant
    } else {
        c.gamma_p = (p - 1) / p * c.gamma_inf;
        c.beta_p = (p * D + w) / ((p - 1) * D);
        c.Ct_p = 4 * p * (p - 1) / ((p + 1) * (p + 1)) * c.B;
        c.C_p = pow(c.Ct_p * (c.beta_p - 1), -c.gamma_p);
    }
    return c;
}

// C_inf of the L^inf decay: 2^{(2q-1)/(q-1)} S^{2q/e} C_2^{2(q-1)/e}.
template <typename Scalar>
Scalar linf_constant(int d, Scalar s, Scalar r = Scalar(-1)) {
    using std::pow;
    const auto c2 = decay_constants(d, s, Scalar(2));
    const auto td = truncation_data(Scalar(1), Scalar(1), FracParams<Scalar>(d, s), r);
    const Scalar q = td.q, e = td.exponent;
    return pow(Scalar(2), (2 * q - 1) / (q - 1)) * pow(td.S, 2 * q / e) * pow(c2.C_p, 2 * (q - 1) / e);
}

// Exponent of t in the L^inf bound, 2 gamma_2 (q-1)/e + q theta/e.
template <typename Scalar>
Scalar linf_exponent(int d, Scalar s, Scalar r = Scalar(-1)) {
    const auto c2 = decay_constants(d, s, Scalar(2));
    const auto td = truncation_data(Scalar(1), Scalar(1), FracParams<Scalar>(d, s), r);
    return 2 * c2.gamma_p * (td.q - 1) / td.exponent + td.q * td.theta / td.exponent;
}

// M^{l_p}, l_p = (2p(1-s)+d)/(2p(1-s)+dp), l_inf = 2(1-s)/(2(1-s)+d).
template <typename Scalar>
Scalar mass_scaling_factor(Scalar p, int d, Scalar s, Scalar M) {
    if (!(M > 0)) throw DomainError("mass_scaling_factor: need M > 0");
    const Scalar w = 2 * (1 - s), D = Scalar(d);
    const Scalar l = std::isinf(double(p)) ? w / (w + D) : (p * w + D) / (p * w + D * p);
    return std::pow(M, l);
}

// ------------------------------------------------------------ per-step bounds

template <typename Scalar>
struct StepMargins {
    std::vector<Scalar> value, bound, margin;  // margin = (bound - value)/bound, index k-1 for step k
    Scalar min_margin = std::numeric_limits<Scalar>::infinity();
};

// ||u^k||_p^p <= min{a_0, C_p^p (k tau)^{-p gamma_p}} + Ct_p tau a_0^{beta_p}/sqrt(2); a_k from `values`.
template <typename Scalar>
StepMargins<Scalar> check_step_decay_values(const std::vector<Scalar>& a, Scalar tau, const DecayConstants<Scalar>& c,
                                            bool k_entropy = false) {
    using std::pow;
    StepMargins<Scalar> out;
    const Scalar a0 = a.at(0);
    const Scalar gam = k_entropy ? c.gamma_0 : c.p * c.gamma_p;
    const Scalar Cp = k_entropy ? c.C_0 : pow(c.C_p, c.p);
    const Scalar Ct = k_entropy ? c.Ct_0 : c.Ct_p;
    const Scalar beta = k_entropy ? c.beta_0 : c.beta_p;
    const Scalar rem = Ct / std::numbers::sqrt2_v<Scalar> * tau * pow(a0, beta);
    for (size_t k = 1; k < a.size(); ++k) {
        const Scalar b = std::min(a0, Cp * pow(Scalar(k) * tau, -gam)) + rem;
        out.value.push_back(a[k]);
        out.bound.push_back(b);
        out.margin.push_back((b - a[k]) / b);
        out.min_margin = std::min(out.min_margin, out.margin.back());
    }
    return out;
}

template <typename Scalar, typename State>
StepMargins<Scalar> check_step_decay(const JkoTrajectory<Scalar, State>& tr, Scalar p) {
    const auto c = decay_constants(tr.config.params.d, tr.config.params.s, p);
    std::vector<Scalar> a;
    for (const auto& r : tr.records) {
        if (p == 2)
            a.push_back(r.L2 * r.L2);
        else if (p == 3)
            a.push_back(r.L3 * r.L3 * r.L3);
        else
            throw DomainError("check_step_decay: records carry p = 2, 3; use check_step_decay_values");
    }
    return check_step_decay_values(a, tr.config.tau, c);
}

template <typename Scalar, typename State>
StepMargins<Scalar> check_step_decay_K(const JkoTrajectory<Scalar, State>& tr) {
    const auto c = decay_constants(tr.config.params.d, tr.config.params.s, Scalar(2));
    std::vector<Scalar> a;
    for (const auto& r : tr.records) a.push_back(r.K);
    return check_step_decay_values(a, tr.config.tau, c, true);
}

// ------------------------------------------------------------ Lagrangian velocity field

// grad v at the nodes: m dE/dX_i, the Lagrangian force per unit mass.
template <typename Scalar>
VectorX<Scalar> lagrangian_velocity_gradient(const QuantileProfile<Scalar>& X, const LagrangianEnergy<Scalar>& E) {
    VectorX<Scalar> g;
    E.evaluate(X.X, &g, nullptr);
    return Scalar(X.m()) * g;
}

// int |grad v|^2 u
template <typename Scalar>
Scalar kinetic_term(const QuantileProfile<Scalar>& X, const LagrangianEnergy<Scalar>& E) {
    return lagrangian_velocity_gradient(X, E).squaredNorm() / Scalar(X.m());
}

// Continuous reconstruction of a profile on a grid: nodal heights 1/(m l_i),
// linear in between, zero at the half-gap caps; renormalised to unit mass.
// Used wherever a spectral norm of a Lagrangian state is needed.
template <typename Scalar>
GridDensity<Scalar, 1> nodal_density(const QuantileProfile<Scalar>& q, const Grid1D<Scalar>& g) {
    const Index m = q.m();
    if (m < 3 || !q.strictly_increasing()) throw SingularInputError("nodal_density: need >= 3 distinct nodes");
    std::vector<Scalar> xs(size_t(m + 2)), ys(size_t(m + 2));
    for (Index i = 0; i < m; ++i) {
        const Scalar l = i == 0 ? q.X(1) - q.X(0) : i == m - 1 ? q.X(m - 1) - q.X(m - 2) : (q.X(i + 1) - q.X(i - 1)) / 2;
        xs[size_t(i + 1)] = q.X(i);
        ys[size_t(i + 1)] = 1 / (Scalar(m) * l);
    }
    xs[0] = q.X(0) - (q.X(1) - q.X(0)) / 2;
    xs[size_t(m + 1)] = q.X(m - 1) + (q.X(m - 1) - q.X(m - 2)) / 2;
    ys[0] = ys[size_t(m + 1)] = 0;
    if (xs.front() < g.origin[0] || xs.back() > g.origin[0] + g.length[0])
        throw DomainError("nodal_density: profile support exceeds the grid");
    ArrayX<Scalar> v(g.n[0]);
    for (Index i = 0; i < g.n[0]; ++i) {
        const Scalar x = g.center(0, i);
        if (x <= xs.front() || x >= xs.back()) {
            v(i) = 0;
            continue;
        }
        const size_t k = size_t(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
        const Scalar f = (x - xs[k]) / (xs[k + 1] - xs[k]);
        v(i) = (1 - f) * ys[k] + f * ys[k + 1];
    }
    GridDensity<Scalar, 1> u(g, v);
    return u.normalized();
}

// A grid of n cells covering the profile's support with 25% margin per side.
template <typename Scalar>
Grid1D<Scalar> covering_grid(const QuantileProfile<Scalar>& q, Index n) {
    const Index m = q.m();
    const Scalar a = q.X(0) - (q.X(1) - q.X(0)), b = q.X(m - 1) + (q.X(m - 1) - q.X(m - 2));
    const Scalar w = b - a;
    return Grid1D<Scalar>({n}, {w * Scalar(1.5)}, {a - w / 4});
}

// ------------------------------------------------------------ Euler-Lagrange

template <typename Scalar>
struct ElResidual {
    Scalar strong;  // ||r||_1 / (||grad v||_1 + ||(T - I)/tau||_1), all u-weighted
    VectorX<Scalar> r;
};

// T maps u_next onto u_prev: in quantile form T(X_i) = Y_i.
template <typename Scalar>
ElResidual<Scalar> euler_lagrange_residual(const QuantileProfile<Scalar>& u_prev, const QuantileProfile<Scalar>& u_next,
                                           Scalar tau, const FracParams<Scalar>& p, bool self_correction = true) {
    if (u_prev.m() != u_next.m()) throw SizeMismatch("euler_lagrange_residual: node counts differ");
    const LagrangianEnergy<Scalar> E(p, self_correction);
    const VectorX<Scalar> gv = lagrangian_velocity_gradient(u_next, E);
    const VectorX<Scalar> disp = (u_prev.X - u_next.X) / tau;
    ElResidual<Scalar> out;
    out.r = gv - disp;
    out.strong = out.r.cwiseAbs().sum() / (gv.cwiseAbs().sum() + disp.cwiseAbs().sum());
    return out;
}

// Weak form against test fields eta = phi': sum_i (grad v_i - disp_i) eta(X_i)/m,
// normalised by sum_i |grad v_i eta(X_i)|/m.
template <typename Scalar>
Scalar weak_euler_lagrange_residual(const QuantileProfile<Scalar>& u_prev, const QuantileProfile<Scalar>& u_next,
                                    Scalar tau, const FracParams<Scalar>& p, const std::function<Scalar(Scalar)>& eta,
                                    bool self_correction = true) {
    const LagrangianEnergy<Scalar> E(p, self_correction);
    const VectorX<Scalar> gv = lagrangian_velocity_gradient(u_next, E);
    Scalar num = 0, den = 0;
    for (Index i = 0; i < u_next.m(); ++i) {
        const Scalar e = eta(u_next.X(i));
        num += (gv(i) - (u_prev.X(i) - u_next.X(i)) / tau) * e;
        den += std::abs(gv(i) * e);
    }
    return std::abs(num) / den;
}

// Grid route: grad v spectral, T = monotone rearrangement of u_next onto u_prev.
template <typename Scalar>
Scalar euler_lagrange_residual_grid(const GridDensity<Scalar, 1>& u_prev, const GridDensity<Scalar, 1>& u_next, Scalar tau,
                                    const FracParams<Scalar>& p) {
    const auto v = riesz_potential(u_next, p);
    const auto gv = crop(spectral_derivative(v), u_next.grid()).values;
    const auto T = monotone_map_1d(u_next, u_prev);
    Scalar num = 0, a = 0, b = 0;
    for (Index i = 0; i < u_next.grid().n[0]; ++i) {
        if (!T.defined(i)) continue;
        const Scalar w = u_next.values()(i);
        const Scalar disp = (T.T(i) - u_next.grid().center(0, i)) / tau;
        num += w * std::abs(gv(i) - disp);
        a += w * std::abs(gv(i));
        b += w * std::abs(disp);
    }
    return num / (a + b);
}

// ------------------------------------------------------------ energy dissipation

template <typename Scalar>
struct DissipationReport {
    std::vector<Scalar> kinetic;        // int |grad v^k|^2 u^k
    std::vector<Scalar> w2_over_tau2;   // W^2(u^k, u^{k-1}) / tau^2
    std::vector<Scalar> identity_residual;  // |kin - W2/tau^2| / max
    std::vector<Scalar> interpolant_integral;  // int_0^tau W^2(u~_delta, u^{k-1})/delta^2
    std::vector<Scalar> energies;       // F(u^k), k = 0..N
    Scalar ei_lhs = 0;   // F(u^N) + sum W^2/(2 tau) + 1/2 sum interpolant integrals
    Scalar ei_rhs = 0;   // F(u^0)
    Scalar ei_residual = 0;   // (lhs - rhs) / (F(u^0) - F(u^N)), signed
    Scalar edi_slack = 0;     // F(u^0) - F(u^N) - sum tau kinetic, >= 0 expected
    Scalar max_identity_residual = 0;
    Scalar basic_estimate_margin = std::numeric_limits<Scalar>::infinity();  // min_k F^{k-1} - F^k - W^2/(2 tau)
};

template <typename Scalar>
using InterpolantSampler = std::function<QuantileProfile<Scalar>(long k, Scalar delta)>;

// Default sampler: the proximal solve with step delta from u^{k-1}.
template <typename Scalar>
InterpolantSampler<Scalar> default_sampler(const JkoTrajectory<Scalar, QuantileProfile<Scalar>>& tr) {
    return [&tr](long k, Scalar delta) {
        const auto* prev = tr.state(k - 1);
        if (!prev) throw DomainError("sampler: previous state not stored");
        return variational_interpolant(*prev, delta, tr.config);
    };
}

template <typename Scalar>
DissipationReport<Scalar> check_energy_dissipation(const JkoTrajectory<Scalar, QuantileProfile<Scalar>>& tr,
                                                   const InterpolantSampler<Scalar>& sampler, int gauss_points = 4) {
    const auto& cfg = tr.config;
    if (tr.mass != 1) throw DomainError("check_energy_dissipation: unit-mass trajectories only");
    const Scalar tau = cfg.tau;
    const LagrangianEnergy<Scalar> E(cfg.params, cfg.self_correction);
    DissipationReport<Scalar> rep;
    auto [gx, gw] = gauss_legendre(gauss_points, 0.0, double(tau));
    Scalar sum_w2 = 0, sum_int = 0, sum_kin = 0;
    rep.energies.push_back(tr.records[0].F);
    for (long k = 1; k <= tr.steps(); ++k) {
        const auto* cur = tr.state(k);
        const auto* prev = tr.state(k - 1);
        if (!cur || !prev) throw DomainError("check_energy_dissipation: needs every state (store_stride = 1)");
        const Scalar kin = kinetic_term(*cur, E);
        const Scalar w2 = tr.records[size_t(k)].W2;
        rep.kinetic.push_back(kin);
        rep.w2_over_tau2.push_back(w2 / (tau * tau));
        const Scalar big = std::max(kin, w2 / (tau * tau));
        rep.identity_residual.push_back(big > 0 ? std::abs(kin - w2 / (tau * tau)) / big : Scalar(0));
        rep.max_identity_residual = std::max(rep.max_identity_residual, rep.identity_residual.back());
        Scalar I = 0;
        for (size_t g = 0; g < gx.size(); ++g) {
            const Scalar delta = Scalar(gx[g]);
            const auto ut = sampler(k, delta);
            const Scalar W = w2_1d(ut, *prev);
            I += Scalar(gw[g]) * W * W / (delta * delta);
        }
        rep.interpolant_integral.push_back(I);
        rep.energies.push_back(tr.records[size_t(k)].F);
        rep.basic_estimate_margin =
            std::min(rep.basic_estimate_margin, tr.records[size_t(k - 1)].F - tr.records[size_t(k)].F - w2 / (2 * tau));
        sum_w2 += w2 / (2 * tau);
        sum_int += I / 2;
        sum_kin += tau * kin;
    }
    const Scalar F0 = rep.energies.front(), FN = rep.energies.back();
    rep.ei_lhs = FN + sum_w2 + sum_int;
    rep.ei_rhs = F0;
    rep.ei_residual = (rep.ei_lhs - rep.ei_rhs) / (F0 - FN);
    rep.edi_slack = F0 - FN - sum_kin;
    return rep;
}

// ------------------------------------------------------------ smoothing estimate

template <typename Scalar>
struct SmoothingMargins {
    std::vector<Scalar> lhs;    // tau ||u^k||^2_{H^{1-s}}
    std::vector<Scalar> drop;   // H(u^{k-1}) - H(u^k)
    std::vector<Scalar> ratio;  // drop / lhs
    Scalar min_ratio = std::numeric_limits<Scalar>::infinity();
};

// tau ||u^k||^2_{H^{1-s}-dot} <= H(u^{k-1}) - H(u^k); norm on nodal_density over `cells` cells.
template <typename Scalar>
SmoothingMargins<Scalar> check_smoothing(const JkoTrajectory<Scalar, QuantileProfile<Scalar>>& tr, Index cells = 2048) {
    SmoothingMargins<Scalar> out;
    const Scalar r = 1 - tr.config.params.s;
    for (long k = 1; k <= tr.steps(); ++k) {
        const auto* cur = tr.state(k);
        if (!cur) continue;
        const auto u = nodal_density(*cur, covering_grid(*cur, cells));
        const Scalar n2 = hdot_inner(u.function(), u.function(), r);
        const Scalar lhs = tr.config.tau * n2;
        const Scalar drop = tr.records[size_t(k - 1)].H - tr.records[size_t(k)].H;
        out.lhs.push_back(lhs);
        out.drop.push_back(drop);
        out.ratio.push_back(drop / lhs);
        out.min_ratio = std::min(out.min_ratio, drop / lhs);
    }
    return out;
}

// ------------------------------------------------------------ slopes

struct SlopeFit {
    double slope = 0, stderr_ = 0, intercept = 0;
    int samples = 0;
};

inline SlopeFit fit_loglog(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size() || t.size() < 3) throw DomainError("fit_decay_slope: need at least 3 samples");
    const size_t n = t.size();
    std::vector<double> X(n), Y(n);
    for (size_t i = 0; i < n; ++i) {
        if (!(t[i] > 0) || !(y[i] > 0)) throw DomainError("fit_decay_slope: times and values must be positive");
        X[i] = std::log(t[i]);
        Y[i] = std::log(y[i]);
    }
    const double mx = std::accumulate(X.begin(), X.end(), 0.0) / double(n);
    const double my = std::accumulate(Y.begin(), Y.end(), 0.0) / double(n);
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) sxx += (X[i] - mx) * (X[i] - mx), sxy += (X[i] - mx) * (Y[i] - my);
    if (!(sxx > 0)) throw DomainError("fit_decay_slope: degenerate window");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0;
    for (size_t i = 0; i < n; ++i) {
        const double e = Y[i] - f.intercept - f.slope * X[i];
        rss += e * e;
    }
    f.stderr_ = n > 2 ? std::sqrt(rss / double(n - 2) / sxx) : 0.0;
    f.samples = int(n);
    return f;
}

// Norm selector for trajectory records.
enum class NormKind { L2, L3, Linf, K };

template <typename Scalar>
double record_value(const StepRecord<Scalar>& r, NormKind kind) {
    switch (kind) {
        case NormKind::L2: return double(r.L2);
        case NormKind::L3: return double(r.L3);
        case NormKind::Linf: return double(r.Linf);
        case NormKind::K: return double(r.K);
    }
    return 0;
}

// Log-spaced samples of u_tau(t) over [a, b] (t < 5 tau excluded), least squares.
template <typename Scalar, typename State>
SlopeFit fit_decay_slope(const JkoTrajectory<Scalar, State>& tr, NormKind kind, double a, double b, int samples = 40) {
    const double tau = double(tr.config.tau);
    a = std::max(a, 5 * tau);
    if (!(b > a) || b > double(tr.config.tau) * double(tr.steps()) * (1 + 1e-12))
        throw DomainError("fit_decay_slope: window outside the horizon");
    std::vector<double> t, y;
    for (int i = 0; i < samples; ++i) {
        const double ti = a * std::pow(b / a, double(i) / double(samples - 1));
        t.push_back(ti);
        y.push_back(record_value(tr.records[size_t(tr.index_at(Scalar(ti)))], kind));
    }
    return fit_loglog(t, y);
}

// ------------------------------------------------------------ recursion calculus

struct RecursionExponents {
    double beta, gamma;
};

inline RecursionExponents recursion_exponents(long j, double q) {
    if (!(q > 1) || j < 0) throw DomainError("recursion_exponents: need q > 1, j >= 0");
    const double qj = std::pow(q, double(j));
    return {(qj - 1) / (q - 1), q * (qj - 1) / ((q - 1) * (q - 1)) - double(j) / (q - 1)};
}

// A_j <= Q^{beta(j-j0)} R^{gamma(j-j0)} A0^{q^{j-j0}}.
inline double recursion_bound(double Q, double R, double q, double A0, long j, long j0) {
    if (!(Q > 0) || !(R > 0) || !(q > 1) || !(A0 > 0) || !(j > j0) || j0 < 0)
        throw DomainError("recursion_bound: need Q, R, A0 > 0, q > 1, j > j0 >= 0");
    const auto e = recursion_exponents(j - j0, q);
    // in logs to keep large q^j finite as long as the result is
    return std::exp(e.beta * std::log(Q) + e.gamma * std::log(R) + std::pow(q, double(j - j0)) * std::log(A0));
}

}  // namespace fracjko
