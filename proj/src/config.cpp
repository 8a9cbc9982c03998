#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fracjko::cli {

using nlohmann::json;

namespace {

struct Reader {
    const json& obj;
    std::string path;
    ValidationReport& rep;
    std::set<std::string> seen{};

    bool has(const char* key) const { return obj.contains(key); }

    template <typename T>
    bool get(const char* key, T& out, bool required = false) {
        seen.insert(key);
        if (!obj.contains(key)) {
            if (required)
                rep.errors.push_back(path + key + ": missing required field");
            else
                rep.defaulted.push_back(path + key);
            return false;
        }
        try {
            out = obj.at(key).get<T>();
            return true;
        } catch (const json::exception&) {
            rep.errors.push_back(path + key + ": wrong type");
            return false;
        }
    }

    // numbers, or the strings "inf"/"infinity"
    bool get_p_list(const char* key, std::vector<double>& out) {
        seen.insert(key);
        if (!obj.contains(key)) {
            rep.defaulted.push_back(path + key);
            return false;
        }
        const auto& a = obj.at(key);
        if (!a.is_array()) {
            rep.errors.push_back(path + key + ": expected an array");
            return false;
        }
        out.clear();
        for (const auto& e : a) {
            if (e.is_number())
                out.push_back(e.get<double>());
            else if (e.is_string() && (e == "inf" || e == "infinity"))
                out.push_back(std::numeric_limits<double>::infinity());
            else
                rep.errors.push_back(path + key + ": entries must be numbers or \"inf\"");
        }
        return true;
    }

    const json* sub(const char* key, bool required = false) {
        seen.insert(key);
        if (!obj.contains(key)) {
            if (required)
                rep.errors.push_back(path + key + ": missing required section");
            else
                rep.defaulted.push_back(path + key);
            return nullptr;
        }
        if (!obj.at(key).is_object()) {
            rep.errors.push_back(path + key + ": expected an object");
            return nullptr;
        }
        return &obj.at(key);
    }

    void finish() {
        for (const auto& [k, v] : obj.items())
            if (!seen.count(k)) rep.errors.push_back(path + k + ": unknown key");
    }
};

const std::vector<std::pair<std::string, Kind>> kKinds = {
    {"trajectory", Kind::trajectory},         {"decay-sweep", Kind::decay_sweep},
    {"two-scale", Kind::two_scale},           {"s-to-zero", Kind::s_to_zero},
    {"oracle-compare", Kind::oracle_compare}, {"constants-table", Kind::constants_table}};

bool valid_s(int d, double s) { return s > 0 && s < (d == 1 ? 0.5 : 1.0); }

}  // namespace

std::string kind_name(Kind k) {
    for (const auto& [n, v] : kKinds)
        if (v == k) return n;
    return "?";
}

std::string p_label(double p) {
    if (std::isinf(p)) return "inf";
    std::ostringstream o;
    o << p;
    return o.str();
}

ExperimentConfig parse_config(const json& j, ValidationReport& rep) {
    ExperimentConfig c;
    if (!j.is_object()) {
        rep.errors.push_back("config: top level must be an object");
        return c;
    }
    Reader top{j, "", rep};
    int version = kSchemaVersion;
    top.get("schema_version", version);
    if (version != kSchemaVersion) rep.errors.push_back("schema_version: unsupported version " + std::to_string(version));

    std::string kind;
    if (top.get("kind", kind, true)) {
        bool found = false;
        for (const auto& [n, v] : kKinds)
            if (n == kind) c.kind = v, found = true;
        if (!found) rep.errors.push_back("kind: unknown experiment kind '" + kind + "'");
    }

    int d = 1;
    double s = 0.25;
    if (const json* p = top.sub("params", true)) {
        Reader r{*p, "params.", rep};
        r.get("d", d, true);
        r.get("s", s, c.kind != Kind::decay_sweep && c.kind != Kind::s_to_zero);
        r.finish();
    }
    if (d != 1 && d != 2)
        rep.errors.push_back("params.d: dimension must be 1 or 2");
    else if (!valid_s(d, s))
        rep.errors.push_back("params.s: violates the (d, s) constraint 0 < s < min(1, d/2) (got d=" + std::to_string(d) +
                             ", s=" + p_label(s) + ")");
    else
        c.params = FracParams<double>(d, s);
    c.grid.n.assign(size_t(d), c.grid.n[0]);
    c.grid.length.assign(size_t(d), c.grid.length[0]);
    c.grid.origin.assign(size_t(d), c.grid.origin[0]);

    if (const json* g = top.sub("grid")) {
        Reader r{*g, "grid.", rep};
        r.get("n", c.grid.n);
        r.get("length", c.grid.length);
        r.get("origin", c.grid.origin);
        r.finish();
    }
    if (c.grid.n.size() != size_t(d) || c.grid.length.size() != size_t(d) || c.grid.origin.size() != size_t(d))
        rep.errors.push_back("grid: n, length, origin need one entry per dimension");
    for (long n : c.grid.n)
        if (n < 8 || (n & (n - 1)) != 0) rep.errors.push_back("grid.n: cells per axis must be a power of two >= 8");
    for (double L : c.grid.length)
        if (!(L > 0)) rep.errors.push_back("grid.length: must be positive");

    if (const json* dj = top.sub("datum", c.kind != Kind::constants_table)) {
        Reader r{*dj, "datum.", rep};
        r.get("type", c.datum.type, true);
        const auto& t = c.datum.type;
        if (t == "gaussian") {
            c.datum.mean.assign(size_t(d), 0.0);
            r.get("mean", c.datum.mean);
            r.get("sigma", c.datum.sigma);
            if (c.datum.mean.size() != size_t(d)) rep.errors.push_back("datum.mean: one entry per dimension");
            if (!(c.datum.sigma > 0)) rep.errors.push_back("datum.sigma: must be positive");
        } else if (t == "uniform") {
            r.get("a", c.datum.a, true);
            r.get("b", c.datum.b, true);
            if (!(c.datum.b > c.datum.a)) rep.errors.push_back("datum: uniform needs a < b");
            if (d != 1) rep.errors.push_back("datum: uniform is 1D only");
        } else if (t == "two-bumps") {
            c.datum.centers = {-1.0, 1.0};
            c.datum.weights = {0.5, 0.5};
            c.datum.sigma = 0.3;
            r.get("centers", c.datum.centers);
            r.get("weights", c.datum.weights);
            r.get("sigma", c.datum.sigma);
            if (c.datum.centers.size() != c.datum.weights.size() || c.datum.centers.empty())
                rep.errors.push_back("datum: two-bumps needs matching centers and weights");
            for (double w : c.datum.weights)
                if (!(w > 0)) rep.errors.push_back("datum.weights: must be positive");
            if (d != 1) rep.errors.push_back("datum: two-bumps is 1D only");
        } else if (t == "file") {
            r.get("path", c.datum.path, true);
        } else if (!t.empty()) {
            rep.errors.push_back("datum.type: unknown datum '" + t + "'");
        }
        r.get("mass", c.datum.mass);
        if (!(c.datum.mass > 0)) rep.errors.push_back("datum.mass: must be positive");
        r.finish();
    }

    auto& J = c.jko;
    J.params = c.params;
    if (const json* jj = top.sub("jko")) {
        Reader r{*jj, "jko.", rep};
        r.get("tau", J.tau);
        r.get("horizon", J.horizon);
        std::string rep_name = "lagrangian-1d";
        if (r.get("representation", rep_name)) {
            if (rep_name == "lagrangian-1d")
                J.representation = Representation::lagrangian_1d;
            else if (rep_name == "eulerian-sinkhorn")
                J.representation = Representation::eulerian_sinkhorn;
            else
                rep.errors.push_back("jko.representation: expected lagrangian-1d or eulerian-sinkhorn");
        }
        r.get("tol", J.tol);
        r.get("max_iter", J.max_iter);
        long nodes = J.nodes;
        r.get("nodes", nodes);
        J.nodes = nodes;
        r.get("self_correction", J.self_correction);
        r.get("regularize", J.regularize);
        r.get("sinkhorn_epsilon", J.sinkhorn_epsilon);
        r.get("eulerian_tol", J.eulerian_tol);
        r.get("eulerian_max_iter", J.eulerian_max_iter);
        r.get("truncation_r", J.truncation_r);
        r.get("store_stride", J.store_stride);
        r.finish();
    }
    if (!(J.tau > 0)) rep.errors.push_back("jko.tau: must be positive");
    if (!(J.horizon >= J.tau)) rep.errors.push_back("jko.horizon: must be >= tau");
    if (!(J.tol > 0) || J.max_iter < 1 || !(J.eulerian_tol > 0) || J.eulerian_max_iter < 1)
        rep.errors.push_back("jko: tolerances and iteration limits must be positive");
    if (!(J.sinkhorn_epsilon > 0)) rep.errors.push_back("jko.sinkhorn_epsilon: must be positive");
    if (J.store_stride < 1) rep.errors.push_back("jko.store_stride: must be >= 1");
    if (J.nodes < 3) rep.errors.push_back("jko.nodes: need at least 3 nodes");
    if (J.truncation_r > 0 && !(J.truncation_r < 0.5)) rep.errors.push_back("jko.truncation_r: need 0 < r < 1/2");
    if (J.representation == Representation::lagrangian_1d && d != 1)
        rep.errors.push_back("jko.representation: lagrangian-1d requires d = 1");

    if (const json* dj = top.sub("diagnostics")) {
        Reader r{*dj, "diagnostics.", rep};
        r.get("el_residual", c.diagnostics.el_residual);
        r.get("step_decay", c.diagnostics.step_decay);
        r.get("dissipation", c.diagnostics.dissipation);
        r.get("smoothing", c.diagnostics.smoothing);
        r.get("fit_window", c.diagnostics.fit_window);
        r.get_p_list("p_list", c.diagnostics.p_list);
        r.finish();
    }
    if (c.diagnostics.fit_window.size() != 2 || !(c.diagnostics.fit_window[0] > 0) ||
        !(c.diagnostics.fit_window[1] > c.diagnostics.fit_window[0]))
        rep.errors.push_back("diagnostics.fit_window: need [a, b] with 0 < a < b");
    for (double p : c.diagnostics.p_list)
        if (!(p >= 1)) rep.errors.push_back("diagnostics.p_list: need p >= 1");

    if (c.kind == Kind::decay_sweep || c.kind == Kind::s_to_zero) {
        if (const json* sj = top.sub("sweep", true)) {
            Reader r{*sj, "sweep.", rep};
            r.get("s_list", c.s_list, true);
            r.finish();
        }
        if (c.s_list.empty()) rep.errors.push_back("sweep.s_list: must be non-empty");
        for (size_t i = 0; i < c.s_list.size(); ++i) {
            if (!valid_s(d, c.s_list[i]))
                rep.errors.push_back("sweep.s_list: " + p_label(c.s_list[i]) + " violates the (d, s) constraint");
            if (c.kind == Kind::s_to_zero && i > 0 && !(c.s_list[i] < c.s_list[i - 1]))
                rep.errors.push_back("sweep.s_list: must be decreasing for s-to-zero");
        }
    } else if (top.has("sweep")) {
        top.sub("sweep");
        rep.errors.push_back("sweep: only used by decay-sweep and s-to-zero");
    }

    if (c.kind == Kind::two_scale) {
        if (const json* tj = top.sub("two_scale")) {
            Reader r{*tj, "two_scale.", rep};
            r.get("t", c.two_scale_t);
            r.get("j_max", c.two_scale_j_max);
            r.finish();
        }
        if (!(c.two_scale_t > 0) || c.two_scale_t > J.horizon)
            rep.errors.push_back("two_scale.t: must lie in (0, horizon]");
    } else if (top.has("two_scale")) {
        top.sub("two_scale");
        rep.errors.push_back("two_scale: only used by the two-scale kind");
    }

    if (c.kind == Kind::oracle_compare || c.kind == Kind::s_to_zero) {
        if (const json* rj = top.sub("reference")) {
            Reader r{*rj, "reference.", rep};
            r.get("n", c.reference.n);
            r.get("length", c.reference.length);
            r.get("origin", c.reference.origin);
            r.get("dt", c.reference.dt);
            r.get("cfl", c.reference.cfl);
            r.get("sample_times", c.reference.sample_times);
            r.finish();
        }
        const auto& R = c.reference;
        if (R.n < 8 || (R.n & (R.n - 1)) != 0) rep.errors.push_back("reference.n: must be a power of two >= 8");
        if (!(R.length > 0) || !(R.dt > 0) || !(R.cfl > 0 && R.cfl < 1))
            rep.errors.push_back("reference: need length > 0, dt > 0, 0 < cfl < 1");
        for (double t : R.sample_times)
            if (!(t > 0) || t > J.horizon) rep.errors.push_back("reference.sample_times: must lie in (0, horizon]");
        if (d != 1) rep.errors.push_back("reference: the finite-volume oracle is 1D");
    } else if (top.has("reference")) {
        top.sub("reference");
        rep.errors.push_back("reference: only used by oracle-compare and s-to-zero");
    }

    if (c.kind == Kind::constants_table) {
        if (const json* cj = top.sub("constants")) {
            Reader r{*cj, "constants.", rep};
            r.get_p_list("p_list", c.constants_p);
            r.finish();
        }
        for (double p : c.constants_p)
            if (!(p >= 1)) rep.errors.push_back("constants.p_list: need p >= 1");
    } else if (top.has("constants")) {
        top.sub("constants");
        rep.errors.push_back("constants: only used by constants-table");
    }

    if (const json* oj = top.sub("output")) {
        Reader r{*oj, "output.", rep};
        r.get("dir", c.output_dir);
        r.finish();
    }
    top.finish();

    if (c.kind == Kind::two_scale && J.representation != Representation::lagrangian_1d)
        rep.errors.push_back("two_scale: requires the lagrangian-1d representation");
    if ((c.kind == Kind::oracle_compare || c.kind == Kind::s_to_zero || c.kind == Kind::decay_sweep) &&
        J.representation != Representation::lagrangian_1d)
        rep.errors.push_back("kind " + kind_name(c.kind) + ": requires the lagrangian-1d representation");
    return c;
}

ValidationReport validate_file(const std::string& path, ExperimentConfig* out) {
    ValidationReport rep;
    std::ifstream in(path);
    if (!in) {
        rep.errors.push_back("config: cannot read '" + path + "'");
        return rep;
    }
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        rep.errors.push_back(std::string("config: parse error: ") + e.what());
        return rep;
    }
    auto c = parse_config(j, rep);
    if (out) *out = c;
    return rep;
}

namespace {
json p_json(const std::vector<double>& ps) {
    json a = json::array();
    for (double p : ps) {
        if (std::isinf(p))
            a.push_back("inf");
        else
            a.push_back(p);
    }
    return a;
}
}  // namespace

json to_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = kind_name(c.kind);
    j["params"] = {{"d", c.params.d}, {"s", c.params.s}};
    j["grid"] = {{"n", c.grid.n}, {"length", c.grid.length}, {"origin", c.grid.origin}};
    if (c.kind != Kind::constants_table) {
        json d = {{"type", c.datum.type}, {"mass", c.datum.mass}};
        if (c.datum.type == "gaussian") d["mean"] = c.datum.mean, d["sigma"] = c.datum.sigma;
        if (c.datum.type == "uniform") d["a"] = c.datum.a, d["b"] = c.datum.b;
        if (c.datum.type == "two-bumps")
            d["centers"] = c.datum.centers, d["weights"] = c.datum.weights, d["sigma"] = c.datum.sigma;
        if (c.datum.type == "file") d["path"] = c.datum.path;
        j["datum"] = d;
    }
    const auto& J = c.jko;
    j["jko"] = {{"tau", J.tau},
                {"horizon", J.horizon},
                {"representation", J.representation == Representation::lagrangian_1d ? "lagrangian-1d" : "eulerian-sinkhorn"},
                {"tol", J.tol},
                {"max_iter", J.max_iter},
                {"nodes", J.nodes},
                {"self_correction", J.self_correction},
                {"regularize", J.regularize},
                {"sinkhorn_epsilon", J.sinkhorn_epsilon},
                {"eulerian_tol", J.eulerian_tol},
                {"eulerian_max_iter", J.eulerian_max_iter},
                {"truncation_r", J.r_param()},
                {"store_stride", J.store_stride}};
    j["diagnostics"] = {{"el_residual", c.diagnostics.el_residual},
                        {"step_decay", c.diagnostics.step_decay},
                        {"dissipation", c.diagnostics.dissipation},
                        {"smoothing", c.diagnostics.smoothing},
                        {"fit_window", c.diagnostics.fit_window},
                        {"p_list", p_json(c.diagnostics.p_list)}};
    if (c.kind == Kind::decay_sweep || c.kind == Kind::s_to_zero) j["sweep"] = {{"s_list", c.s_list}};
    if (c.kind == Kind::two_scale) j["two_scale"] = {{"t", c.two_scale_t}, {"j_max", c.two_scale_j_max}};
    if (c.kind == Kind::oracle_compare || c.kind == Kind::s_to_zero) {
        const auto& R = c.reference;
        j["reference"] = {{"n", R.n},   {"length", R.length}, {"origin", R.origin},
                          {"dt", R.dt}, {"cfl", R.cfl},       {"sample_times", R.sample_times}};
    }
    if (c.kind == Kind::constants_table) j["constants"] = {{"p_list", p_json(c.constants_p)}};
    j["output"] = {{"dir", c.output_dir}};
    return j;
}

namespace {

ArrayX<double> read_values(const std::string& path, Index count) {
    std::ifstream in(path);
    if (!in) throw DomainError("datum: cannot read '" + path + "'");
    std::vector<double> v;
    std::string tok;
    while (in >> tok) {
        if (tok == "," || tok == "[" || tok == "]") continue;
        v.push_back(std::stod(tok));
    }
    if (Index(v.size()) != count)
        throw DomainError("datum: file has " + std::to_string(v.size()) + " values, grid has " + std::to_string(count));
    return Eigen::Map<ArrayX<double>>(v.data(), count);
}

}  // namespace

GridDensity<double, 1> make_datum_1d(const ExperimentConfig& c) {
    const Grid1D<double> g({Index(c.grid.n[0])}, {c.grid.length[0]}, {c.grid.origin[0]});
    const Index n = g.n[0];
    ArrayX<double> v = ArrayX<double>::Zero(n);
    const auto& D = c.datum;
    auto gauss = [&](double mu, double sig, double w) {
        for (Index i = 0; i < n; ++i) {
            const double z = (g.center(0, i) - mu) / sig;
            v(i) += w * std::exp(-z * z / 2);
        }
    };
    if (D.type == "gaussian") {
        gauss(D.mean[0], D.sigma, 1.0);
    } else if (D.type == "two-bumps") {
        for (size_t k = 0; k < D.centers.size(); ++k) gauss(D.centers[k], D.sigma, D.weights[k]);
    } else if (D.type == "uniform") {
        for (Index i = 0; i < n; ++i) {
            const double lo = g.origin[0] + double(i) * g.h(), hi = lo + g.h();
            v(i) = std::max(0.0, std::min(hi, D.b) - std::max(lo, D.a)) / g.h();
        }
    } else if (D.type == "file") {
        v = read_values(D.path, n);
    }
    GridDensity<double, 1> u(g, v);
    return GridDensity<double, 1>(g, u.values() * (D.mass / u.mass()));
}

GridDensity<double, 2> make_datum_2d(const ExperimentConfig& c) {
    const Grid2D<double> g({Index(c.grid.n[0]), Index(c.grid.n[1])}, {c.grid.length[0], c.grid.length[1]},
                           {c.grid.origin[0], c.grid.origin[1]});
    ArrayX<double> v(g.size());
    const auto& D = c.datum;
    if (D.type == "file") {
        v = read_values(D.path, g.size());
    } else if (D.type == "gaussian") {
        for (Index j = 0; j < g.n[1]; ++j)
            for (Index i = 0; i < g.n[0]; ++i) {
                const double x = (g.center(0, i) - D.mean[0]) / D.sigma, y = (g.center(1, j) - D.mean[1]) / D.sigma;
                v(i + g.n[0] * j) = std::exp(-(x * x + y * y) / 2);
            }
    } else {
        throw DomainError("datum: '" + D.type + "' is 1D only");
    }
    GridDensity<double, 2> u(g, v);
    return GridDensity<double, 2>(g, u.values() * (D.mass / u.mass()));
}

}  // namespace fracjko::cli
