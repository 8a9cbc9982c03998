#include "runner.hpp"

#include "fracjko/diagnostics.hpp"
#include "fracjko/reference.hpp"

#include <cstdlib>
#include <fstream>
#include <map>

namespace fracjko::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using Profile = QuantileProfile<double>;
using LTraj = JkoTrajectory<double, Profile>;

fs::path output_root(const ExperimentConfig& c) {
    if (const char* env = std::getenv("FRACJKO_OUTPUT_ROOT"); env && *env) return fs::path(env);
    return fs::path(c.output_dir);
}

std::string config_digest(const ExperimentConfig& c) {
    auto j = to_json(c);
    j.erase("output");  // where results go does not change what they are
    return hex64(fnv1a64(j.dump()));
}

namespace {

std::string f(double x) { return fmt17(x); }

struct Emitter {
    fs::path dir;
    std::vector<std::string> files;
    void write(const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        files.push_back(name);
    }
};

// ---------------------------------------------------------------- trajectories

struct TrajectoryTables {
    CsvTable steps, snapshots;
};

std::vector<double> decay_values(const std::vector<StepRecord<double>>& rec, bool K) {
    std::vector<double> a;
    for (const auto& r : rec) a.push_back(K ? r.K : r.L2 * r.L2);
    return a;
}

template <typename Traj>
void monotone_checks(const Traj& tr, std::vector<SummaryRow>& sum, const std::string& tag) {
    double dF = 1e300, dH = 1e300, dK = 1e300, dL2 = 1e300, basic = 1e300;
    for (size_t k = 1; k < tr.records.size(); ++k) {
        const auto &a = tr.records[k - 1], &b = tr.records[k];
        dF = std::min(dF, a.F - b.F);
        dH = std::min(dH, a.H - b.H);
        dK = std::min(dK, a.K - b.K);
        dL2 = std::min(dL2, a.L2 - b.L2);
        basic = std::min(basic, a.F - b.F - b.W2 / (2 * tr.config.tau));
    }
    const double slack = 10 * double(tr.config.tol);
    sum.push_back({tag + "min_step_drop_F_s", dF, -slack, ">="});
    sum.push_back({tag + "min_step_basic_estimate_margin", basic, -slack, ">="});
    sum.push_back({tag + "min_step_drop_H", dH, -slack, ">="});
    sum.push_back({tag + "min_step_drop_K", dK, -slack, ">="});
    sum.push_back({tag + "min_step_drop_L2", dL2, -slack, ">="});
}

TrajectoryTables lagrangian_tables(const LTraj& tr, const ExperimentConfig& c, std::vector<SummaryRow>& sum,
                                   const std::string& tag = "") {
    TrajectoryTables out;
    out.steps.header = {"k", "t", "W2_step", "F_s", "H", "K", "L2", "L3", "Linf", "M2", "basic_margin", "EL_residual",
                        "margin_L2", "margin_K", "iterations", "opt_residual"};
    const double tau = tr.config.tau;
    const auto dc = decay_constants(c.jko.params.d, c.jko.params.s, 2.0);
    const auto m2 = check_step_decay_values(decay_values(tr.records, false), tau, dc);
    const auto mK = check_step_decay_values(decay_values(tr.records, true), tau, dc, true);
    double el_max = 0;
    bool el_any = false;
    for (size_t k = 0; k < tr.records.size(); ++k) {
        const auto& r = tr.records[k];
        std::string el, basic, mp, mk;
        if (k > 0) {
            basic = f(tr.records[k - 1].F - r.F - r.W2 / (2 * tau));
            if (c.diagnostics.step_decay) mp = f(m2.margin[k - 1]), mk = f(mK.margin[k - 1]);
            const Profile *a = tr.state(long(k) - 1), *b = tr.state(long(k));
            if (c.diagnostics.el_residual && a && b && tr.mass == 1) {
                const double e = euler_lagrange_residual(*a, *b, tau, tr.config.params, tr.config.self_correction).strong;
                el = f(e);
                el_max = std::max(el_max, e);
                el_any = true;
            }
        }
        out.steps.add_row({std::to_string(r.k), f(r.t), f(r.W2), f(r.F), f(r.H), f(r.K), f(r.L2), f(r.L3), f(r.Linf), f(r.M2),
                           basic, el, mp, mk, std::to_string(r.iterations), f(r.opt_residual)});
    }
    monotone_checks(tr, sum, tag);
    if (el_any) sum.push_back({tag + "max_EL_residual", el_max, 1e-6, "<="});
    if (c.diagnostics.step_decay && tr.steps() > 0) {
        sum.push_back({tag + "min_margin_L2_bound", m2.min_margin, -0.05, ">="});
        sum.push_back({tag + "min_margin_K_bound", mK.min_margin, -0.05, ">="});
    }
    // density snapshots at k = 0, N/2, N on a common grid
    const long N = tr.steps();
    std::vector<long> ks;
    for (long k : {0L, N / 2, N})
        if (tr.state(k) && (ks.empty() || ks.back() != k)) ks.push_back(k);
    const auto g = covering_grid(*tr.state(N), 512);
    out.snapshots.header = {"x"};
    std::vector<GridDensity<double, 1>> dens;
    for (long k : ks) {
        out.snapshots.header.push_back("u_k" + std::to_string(k));
        dens.push_back(density_from_quantile(*tr.state(k), g));
    }
    for (Index i = 0; i < g.n[0]; ++i) {
        std::vector<std::string> row{f(g.center(0, i))};
        for (const auto& d : dens) row.push_back(f(d.values()(i) * tr.mass));
        out.snapshots.add_row(row);
    }
    return out;
}

template <int Dim>
TrajectoryTables eulerian_tables(const JkoTrajectory<double, GridDensity<double, Dim>>& tr, const ExperimentConfig& c,
                                 std::vector<SummaryRow>& sum) {
    TrajectoryTables out;
    out.steps.header = {"k", "t", "W2_step", "F_s", "H", "K", "L2", "L3", "Linf", "M2", "basic_margin", "EL_residual",
                        "margin_L2", "margin_K", "iterations", "opt_residual"};
    const double tau = tr.config.tau;
    const auto dc = decay_constants(c.jko.params.d, c.jko.params.s, 2.0);
    const auto m2 = check_step_decay_values(decay_values(tr.records, false), tau, dc);
    const auto mK = check_step_decay_values(decay_values(tr.records, true), tau, dc, true);
    for (size_t k = 0; k < tr.records.size(); ++k) {
        const auto& r = tr.records[k];
        std::string el, basic, mp, mk;
        if (k > 0) {
            basic = f(tr.records[k - 1].F - r.F - r.W2 / (2 * tau));
            if (c.diagnostics.step_decay) mp = f(m2.margin[k - 1]), mk = f(mK.margin[k - 1]);
            if constexpr (Dim == 1) {
                const auto *a = tr.state(long(k) - 1), *b = tr.state(long(k));
                if (c.diagnostics.el_residual && a && b)
                    el = f(euler_lagrange_residual_grid(a->normalized(), b->normalized(), tau, tr.config.params));
            }
        }
        out.steps.add_row({std::to_string(r.k), f(r.t), f(r.W2), f(r.F), f(r.H), f(r.K), f(r.L2), f(r.L3), f(r.Linf), f(r.M2),
                           basic, el, mp, mk, std::to_string(r.iterations), f(r.opt_residual)});
    }
    // entropic surrogate: only the energy chain is asserted
    double dF = 1e300;
    for (size_t k = 1; k < tr.records.size(); ++k) dF = std::min(dF, tr.records[k - 1].F - tr.records[k].F);
    sum.push_back({"min_step_drop_F_s", dF, -10 * double(tr.config.eulerian_tol), ">="});
    if constexpr (Dim == 1) {
        const auto& g = tr.states.front().grid();
        out.snapshots.header = {"x"};
        std::vector<const GridDensity<double, 1>*> ds;
        for (long k : {0L, tr.steps()})
            if (const auto* s = tr.state(k)) {
                out.snapshots.header.push_back("u_k" + std::to_string(k));
                ds.push_back(s);
            }
        for (Index i = 0; i < g.n[0]; ++i) {
            std::vector<std::string> row{f(g.center(0, i))};
            for (const auto* d : ds) row.push_back(f(d->values()(i)));
            out.snapshots.add_row(row);
        }
    }
    return out;
}

void fit_rows(const LTraj& tr, const ExperimentConfig& c, double s, CsvTable& fits, std::vector<SummaryRow>& sum,
              const std::string& tag) {
    const double a = c.diagnostics.fit_window[0], b = c.diagnostics.fit_window[1];
    if (b > double(tr.config.tau) * double(tr.steps()) + 1e-12) return;
    for (double p : c.diagnostics.p_list) {
        NormKind kind;
        if (p == 2)
            kind = NormKind::L2;
        else if (p == 3)
            kind = NormKind::L3;
        else if (std::isinf(p))
            kind = NormKind::Linf;
        else
            continue;
        const auto dc = decay_constants(c.jko.params.d, s, p);
        const auto fit = fit_decay_slope(tr, kind, a, b);
        const double rel = (fit.slope + double(dc.gamma_p)) / double(dc.gamma_p);
        fits.add_row({f(s), p_label(p), f(fit.slope), f(fit.stderr_), f(fit.intercept), f(-double(dc.gamma_p)), f(rel)});
        sum.push_back({tag + "slope_rel_err_p" + p_label(p), std::abs(rel), 0.1, "<="});
    }
}

CsvTable fits_header() {
    CsvTable t;
    t.header = {"s", "p", "slope", "stderr", "intercept", "target", "rel_err"};
    return t;
}

// ---------------------------------------------------------------- checkpoint

json checkpoint_json(const ExperimentConfig& c, const std::vector<StepRecord<double>>& rec, const std::vector<double>& state,
                     const std::string& representation) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["config"] = to_json(c);
    j["grid"] = to_json(c)["grid"];
    json steps = json::array();
    for (const auto& r : rec)
        steps.push_back({{"k", r.k}, {"t", f(r.t)}, {"W2", f(r.W2)}, {"F_s", f(r.F)}, {"H", f(r.H)}, {"K", f(r.K)},
                         {"L2", f(r.L2)}, {"L3", f(r.L3)}, {"Linf", f(r.Linf)}, {"M2", f(r.M2)}});
    j["steps"] = steps;
    json vals = json::array();
    for (double v : state) vals.push_back(f(v));
    j["final_state"] = {{"representation", representation}, {"values", vals}};
    return j;
}

// ---------------------------------------------------------------- plots

Series col_series(const CsvTable& t, const std::string& x, const std::string& y, const std::string& label, size_t skip = 0) {
    Series s;
    s.label = label;
    auto xs = t.column(x), ys = t.column(y);
    s.x.assign(xs.begin() + long(std::min(skip, xs.size())), xs.end());
    s.y.assign(ys.begin() + long(std::min(skip, ys.size())), ys.end());
    return s;
}

// dashed t^{-gamma} through the first point at or after t_anchor
Series slope_overlay(const Series& data, double gamma, double t_anchor, const std::string& label) {
    Series s;
    s.label = label;
    s.dashed = true;
    for (size_t i = 0; i < data.x.size(); ++i)
        if (data.x[i] >= t_anchor && data.y[i] > 0) {
            const double x0 = data.x[i], y0 = data.y[i];
            for (size_t k = i; k < data.x.size(); ++k) {
                s.x.push_back(data.x[k]);
                s.y.push_back(y0 * std::pow(data.x[k] / x0, -gamma));
            }
            break;
        }
    return s;
}

void trajectory_plots(Emitter& em, const std::string& steps_csv, const std::string& snap_csv, const ExperimentConfig& c,
                      double s, const std::string& suffix = "") {
    const auto t = read_csv(em.dir / steps_csv);
    const double anchor = std::max(5 * double(c.jko.tau), c.diagnostics.fit_window[0]);
    PlotSpec decay{"L^p decay, s = " + p_label(s), "t", "norm", true, true, {}};
    for (auto [col, p] : std::vector<std::pair<std::string, double>>{{"L2", 2.0}, {"Linf", std::numeric_limits<double>::infinity()}}) {
        auto ser = col_series(t, "t", col, col, 1);
        decay.series.push_back(ser);
        decay.series.push_back(
            slope_overlay(ser, double(decay_constants(c.jko.params.d, s, p).gamma_p), anchor, "t^-gamma_" + p_label(p)));
    }
    em.write("decay" + suffix + ".svg", render_svg(decay));
    PlotSpec en{"energy and entropies", "t", "value", false, false,
                {col_series(t, "t", "F_s", "F_s"), col_series(t, "t", "H", "H"), col_series(t, "t", "K", "K")}};
    em.write("energy" + suffix + ".svg", render_svg(en));
    if (!snap_csv.empty()) {
        const auto sn = read_csv(em.dir / snap_csv);
        PlotSpec dp{"density snapshots", "x", "u", false, false, {}};
        for (size_t i = 1; i < sn.header.size(); ++i) dp.series.push_back(col_series(sn, "x", sn.header[i], sn.header[i]));
        em.write("density" + suffix + ".svg", render_svg(dp));
    }
}

// ---------------------------------------------------------------- kinds

void run_trajectory_kind(const ExperimentConfig& c, Emitter& em, std::vector<SummaryRow>& sum) {
    if (c.jko.representation == Representation::lagrangian_1d) {
        const auto u0 = make_datum_1d(c);
        const auto tr = run_trajectory(u0, c.jko);
        auto tabs = lagrangian_tables(tr, c, sum);
        if (c.diagnostics.dissipation) {
            if (c.jko.store_stride != 1 || tr.mass != 1)
                throw DomainError("diagnostics.dissipation needs store_stride = 1 and unit mass");
            const auto rep = check_energy_dissipation(tr, default_sampler(tr));
            CsvTable d;
            d.header = {"k", "kinetic", "W2_over_tau2", "identity_residual", "interpolant_integral"};
            for (size_t k = 0; k < rep.kinetic.size(); ++k)
                d.add_row({std::to_string(k + 1), f(rep.kinetic[k]), f(rep.w2_over_tau2[k]), f(rep.identity_residual[k]),
                           f(rep.interpolant_integral[k])});
            em.write("dissipation.csv", d.text());
            sum.push_back({"max_kinetic_identity_residual", rep.max_identity_residual, 1e-6, "<="});
            sum.push_back({"abs_discrete_EI_residual", std::abs(rep.ei_residual), 1e-2, "<="});
            sum.push_back({"EDI_slack", rep.edi_slack, 0.0, ">="});
        }
        if (c.diagnostics.smoothing) {
            const auto sm = check_smoothing(tr);
            CsvTable d;
            d.header = {"k", "tau_Hdot_norm_sq", "H_drop", "ratio"};
            for (size_t k = 0; k < sm.ratio.size(); ++k)
                d.add_row({std::to_string(k + 1), f(sm.lhs[k]), f(sm.drop[k]), f(sm.ratio[k])});
            em.write("smoothing.csv", d.text());
            sum.push_back({"min_smoothing_ratio", sm.min_ratio, 0.95, ">="});
        }
        em.write("trajectory.csv", tabs.steps.text());
        em.write("snapshots.csv", tabs.snapshots.text());
        auto fits = fits_header();
        fit_rows(tr, c, c.params.s, fits, sum, "");
        if (!fits.rows.empty()) em.write("fits.csv", fits.text());
        const auto& X = tr.states.back().X;
        em.write("checkpoint.json",
                 checkpoint_json(c, tr.records, std::vector<double>(X.data(), X.data() + X.size()), "quantile").dump(1) + "\n");
        trajectory_plots(em, "trajectory.csv", "snapshots.csv", c, c.params.s);
    } else if (c.params.d == 1) {
        const auto tr = run_trajectory_eulerian(make_datum_1d(c), c.jko);
        auto tabs = eulerian_tables(tr, c, sum);
        em.write("trajectory.csv", tabs.steps.text());
        em.write("snapshots.csv", tabs.snapshots.text());
        const auto& v = tr.states.back().values();
        em.write("checkpoint.json",
                 checkpoint_json(c, tr.records, std::vector<double>(v.data(), v.data() + v.size()), "grid").dump(1) + "\n");
        trajectory_plots(em, "trajectory.csv", "snapshots.csv", c, c.params.s);
    } else {
        const auto tr = run_trajectory_eulerian(make_datum_2d(c), c.jko);
        auto tabs = eulerian_tables(tr, c, sum);
        em.write("trajectory.csv", tabs.steps.text());
        const auto& v = tr.states.back().values();
        em.write("checkpoint.json",
                 checkpoint_json(c, tr.records, std::vector<double>(v.data(), v.data() + v.size()), "grid").dump(1) + "\n");
        trajectory_plots(em, "trajectory.csv", "", c, c.params.s);
    }
}

void run_decay_sweep(const ExperimentConfig& c, Emitter& em, std::vector<SummaryRow>& sum) {
    const auto u0 = make_datum_1d(c);
    auto fits = fits_header();
    PlotSpec all{"L^inf decay across s", "t", "Linf", true, true, {}};
    for (double s : c.s_list) {
        auto cfg = c.jko;
        cfg.params = FracParams<double>(c.params.d, s);
        ExperimentConfig cs = c;
        cs.jko = cfg;
        cs.params = cfg.params;
        const auto tr = run_trajectory(u0, cfg);
        const std::string tag = "s" + p_label(s) + "_";
        auto tabs = lagrangian_tables(tr, cs, sum, tag);
        const std::string name = "trajectory_s" + p_label(s) + ".csv";
        em.write(name, tabs.steps.text());
        fit_rows(tr, cs, s, fits, sum, tag);
        const auto t = read_csv(em.dir / name);
        all.series.push_back(col_series(t, "t", "Linf", "s = " + p_label(s), 1));
    }
    em.write("fits.csv", fits.text());
    em.write("decay.svg", render_svg(all));
}

void run_two_scale(const ExperimentConfig& c, Emitter& em, std::vector<SummaryRow>& sum) {
    const auto tr = run_trajectory(make_datum_1d(c), c.jko);
    if (tr.mass != 1) throw DomainError("two-scale: unit-mass data only");
    auto tabs = lagrangian_tables(tr, c, sum);
    em.write("trajectory.csv", tabs.steps.text());
    const double t = c.two_scale_t;
    const auto L = two_scale_refine(tr.at(t), t, c.two_scale_j_max, c.jko);
    const double F0 = tr.records[0].F;
    CsvTable lt;
    lt.header = {"j", "T_j", "M_j", "A_j", "W2_step", "W2_bound", "sup"};
    double w2_margin = 1e300, a_rise = -1e300;
    for (size_t i = 0; i < L.j.size(); ++i) {
        const double bound = 2 * t * F0 * std::ldexp(1.0, -int(L.j[i]));
        lt.add_row({std::to_string(L.j[i]), f(L.T[i]), f(L.levels[i]), f(L.A[i]), f(L.W2[i]), f(bound), f(L.sup[i])});
        if (i > 0) {
            w2_margin = std::min(w2_margin, bound - L.W2[i]);
            a_rise = std::max(a_rise, L.A[i] - L.A[i - 1]);
        }
    }
    em.write("ladder.csv", lt.text());
    sum.push_back({"ladder_sup_over_2M", L.sup.back() / (2 * L.M_tau), 1.1, "<="});
    sum.push_back({"ladder_min_W2_bound_margin", w2_margin, 0.0, ">="});
    sum.push_back({"ladder_max_A_increase", a_rise, 0.0, "<="});
    const auto back = read_csv(em.dir / "ladder.csv");
    PlotSpec p{"truncation masses A_j", "j", "A_j", false, true, {col_series(back, "j", "A_j", "A_j")}};
    em.write("ladder.svg", render_svg(p));
}

FvConfig<double> fv_config(const ExperimentConfig& c) {
    FvConfig<double> fv;
    fv.params = c.params;
    fv.dt = c.reference.dt;
    fv.cfl = c.reference.cfl;
    return fv;
}

// The datum re-sampled on the reference grid (same settings, different cells).
GridDensity<double, 1> reference_datum(const ExperimentConfig& c) {
    ExperimentConfig r = c;
    r.grid.n = {c.reference.n};
    r.grid.length = {c.reference.length};
    r.grid.origin = {c.reference.origin};
    return make_datum_1d(r);
}

void run_oracle_compare(const ExperimentConfig& c, Emitter& em, std::vector<SummaryRow>& sum) {
    const auto tr = run_trajectory(make_datum_1d(c), c.jko);
    auto tabs = lagrangian_tables(tr, c, sum);
    em.write("trajectory.csv", tabs.steps.text());
    auto datum = reference_datum(c);
    if (c.jko.regularize) datum = regularize_initial(datum, c.jko.tau);
    const double T = double(c.jko.tau) * double(tr.steps());
    const auto fv = run_reference(datum, T, fv_config(c), c.reference.sample_times);
    CsvTable ref;
    ref.header = {"t", "F_s", "H", "K", "L2", "L3", "Linf", "M2", "mass"};
    for (size_t i = 0; i < fv.times.size(); ++i) {
        const auto& r = fv.records[i];
        ref.add_row({f(fv.times[i]), f(r.F), f(r.H), f(r.K), f(r.L2), f(r.L3), f(r.Linf), f(r.M2), f(fv.states[i].mass())});
    }
    em.write("reference.csv", ref.text());
    CsvTable cmp;
    cmp.header = {"t", "L1_gap", "W_gap"};
    double last = 0;
    for (size_t i = 1; i < fv.times.size(); ++i) {
        const double t = fv.times[i];
        const auto& X = tr.at(t);
        const auto& P = fv.states[i];
        const double W = w2_1d(X, quantile_from_density(P.normalized(), X.m())) * std::sqrt(tr.mass);
        last = l1_distance(X, P, tr.mass);
        cmp.add_row({f(t), f(last), f(W)});
    }
    em.write("comparison.csv", cmp.text());
    sum.push_back({"final_L1_gap", last, 2e-2, "<="});
    const auto back = read_csv(em.dir / "comparison.csv");
    PlotSpec p{"JKO vs finite-volume oracle", "t", "gap", false, false,
               {col_series(back, "t", "L1_gap", "L1 gap"), col_series(back, "t", "W_gap", "W gap")}};
    em.write("comparison.svg", render_svg(p));
}

void run_s_to_zero(const ExperimentConfig& c, Emitter& em, std::vector<SummaryRow>& sum) {
    const auto u0 = reference_datum(c);
    auto jko = c.jko;
    const double T = jko.horizon;
    auto fv = fv_config(c);
    const auto r = s_to_zero_experiment(u0, c.s_list, T, jko, fv, c.reference.sample_times);
    CsvTable cmp;
    cmp.header = {"s", "t", "L1_gap", "W_gap"};
    for (const auto& row : r.rows) cmp.add_row({f(row.s), f(row.t), f(row.L1_gap), f(row.W_gap)});
    em.write("comparison.csv", cmp.text());
    CsvTable en;
    en.header = {"s", "F_s_u0", "F_0_u0", "ratio", "final_L1_gap"};
    for (size_t i = 0; i < r.s_list.size(); ++i)
        en.add_row({f(r.s_list[i]), f(r.energy_s[i]), f(r.energy_0), f(r.energy_s[i] / r.energy_0), f(r.final_gap[i])});
    em.write("energies.csv", en.text());
    double rise = -1e300;
    for (size_t i = 1; i < r.final_gap.size(); ++i) rise = std::max(rise, r.final_gap[i] - r.final_gap[i - 1]);
    if (r.final_gap.size() > 1) sum.push_back({"max_gap_increase_as_s_decreases", rise, 0.0, "<="});
    sum.push_back({"final_L1_gap_smallest_s", r.final_gap.back(), 5e-2, "<="});
    sum.push_back({"energy_ratio_error_smallest_s", std::abs(r.energy_s.back() / r.energy_0 - 1), 1e-2, "<="});
    const auto back = read_csv(em.dir / "energies.csv");
    PlotSpec p{"gap to the porous medium limit", "s", "L1 gap at T", false, false,
               {col_series(back, "s", "final_L1_gap", "L1 gap")}};
    em.write("s_to_zero.svg", render_svg(p));
}

}  // namespace

CsvTable constants_table(int d, const std::vector<double>& s_list, const std::vector<double>& p_list) {
    CsvTable t;
    t.header = {"d", "s", "p", "gamma_p", "beta_p", "Ct_p", "C_p", "gamma_0", "beta_0", "Ct_0", "C_0", "gamma_inf",
                "S", "A", "B", "C_ds", "ell_p", "C_inf"};
    for (double s : s_list)
        for (double p : p_list) {
            const auto k = decay_constants(d, s, p);
            const double ell = std::log(mass_scaling_factor(p, d, s, std::exp(1.0)));
            const std::string cp = std::isinf(p) ? f(linf_constant(d, s)) : f(k.C_p);
            t.add_row({std::to_string(d), f(s), p_label(p), f(k.gamma_p), f(k.beta_p), f(k.Ct_p), cp, f(k.gamma_0), f(k.beta_0),
                       f(k.Ct_0), f(k.C_0), f(k.gamma_inf), f(k.S), f(k.A), f(k.B), f(riesz_constant(d, s)), f(ell),
                       f(linf_constant(d, s))});
        }
    return t;
}

RunResult run_experiment(const ExperimentConfig& c, const std::vector<std::string>& defaulted) {
    const std::string digest = config_digest(c);
    Emitter em{output_root(c) / (kind_name(c.kind) + "-" + digest.substr(0, 12)), {}};
    fs::create_directories(em.dir);
    std::vector<SummaryRow> sum;
    switch (c.kind) {
        case Kind::trajectory: run_trajectory_kind(c, em, sum); break;
        case Kind::decay_sweep: run_decay_sweep(c, em, sum); break;
        case Kind::two_scale: run_two_scale(c, em, sum); break;
        case Kind::oracle_compare: run_oracle_compare(c, em, sum); break;
        case Kind::s_to_zero: run_s_to_zero(c, em, sum); break;
        case Kind::constants_table:
            em.write("constants.csv", constants_table(c.params.d, {double(c.params.s)}, c.constants_p).text());
            break;
    }
    CsvTable st;
    st.header = {"check", "value", "tolerance", "sense", "status"};
    for (const auto& r : sum) st.add_row({r.check, f(r.value), f(r.tolerance), r.sense, r.pass() ? "pass" : "FAIL"});
    em.write("summary.csv", st.text());

    json m;
    m["schema_version"] = kSchemaVersion;
    m["tool"] = "fracjko";
    m["version"] = kToolVersion;
    m["config"] = to_json(c);
    m["config_digest"] = digest;
    m["defaulted_fields"] = defaulted;
    m["tolerances"] = {{"monotonicity_slack", 10 * double(c.jko.tol)},
                       {"EL_residual", 1e-6},
                       {"decay_bound_margin", -0.05},
                       {"kinetic_identity", 1e-6},
                       {"discrete_EI", 1e-2},
                       {"smoothing_ratio", 0.95},
                       {"slope_rel_err", 0.1}};
    json files = json::array();
    for (const auto& name : em.files) {
        std::ifstream in(em.dir / name, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        files.push_back({{"name", name}, {"fnv1a64", hex64(fnv1a64(bytes))}});
    }
    m["files"] = files;
    write_text(em.dir / "manifest.json", m.dump(2) + "\n");
    em.files.push_back("manifest.json");
    return {em.dir, em.files, sum};
}

std::vector<double> read_checkpoint_state(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("checkpoint: cannot read " + p.string());
    const json j = json::parse(in);
    std::vector<double> out;
    for (const auto& v : j.at("final_state").at("values")) out.push_back(std::strtod(v.get<std::string>().c_str(), nullptr));
    return out;
}

}  // namespace fracjko::cli
