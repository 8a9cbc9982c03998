#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../src/runner.hpp"
#include "fracjko/diagnostics.hpp"

#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace fracjko;
using namespace fracjko::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    const fs::path p = fs::temp_directory_path() / "fracjko_cli_test";
    fs::create_directories(p);
    return p;
}

fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = scratch() / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

json small_trajectory() {
    return json::parse(R"({
      "schema_version": 1,
      "kind": "trajectory",
      "params": {"d": 1, "s": 0.25},
      "grid": {"n": [512], "length": [16.0], "origin": [-8.0]},
      "datum": {"type": "gaussian", "mean": [0.0], "sigma": 1.0},
      "jko": {"tau": 0.01, "horizon": 0.1, "nodes": 64}
    })");
}

ValidationReport check(const json& j) {
    ValidationReport r;
    parse_config(j, r);
    return r;
}

bool mentions(const ValidationReport& r, const std::string& needle) {
    for (const auto& e : r.errors)
        if (e.find(needle) != std::string::npos) return true;
    return false;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string(FRACJKO_TOOL) + " " + args + " > " + (scratch() / "tool.log").string() + " 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

// -------------------------------------------------------------- validation

TEST_CASE("a valid file has no errors and lists its defaults") {
    const auto p = write_config("valid.json", small_trajectory());
    const auto r = validate_file(p.string());
    CHECK(r.ok());
    CHECK(r.errors.empty());
    CHECK(!r.defaulted.empty());
    bool tol = false;
    for (const auto& d : r.defaulted) tol |= d == "jko.tol";
    CHECK(tol);
    // the checked-in example validates too
    CHECK(validate_file(std::string(FRACJKO_SOURCE_DIR) + "/configs/trajectory.json").ok());
}

TEST_CASE("s = 0.7 with d = 1 violates the (d, s) constraint") {
    auto j = small_trajectory();
    j["params"]["s"] = 0.7;
    const auto r = check(j);
    REQUIRE(!r.ok());
    CHECK(mentions(r, "min(1, d/2)"));
}

TEST_CASE("schema violations") {
    auto j = small_trajectory();
    j.erase("datum");
    CHECK(mentions(check(j), "datum"));
    j = small_trajectory();
    j["jko"]["taus"] = 0.1;
    CHECK(mentions(check(j), "taus"));
    j = small_trajectory();
    j["unknown_section"] = {};
    CHECK(mentions(check(j), "unknown_section"));
    j = small_trajectory();
    j["schema_version"] = 99;
    CHECK(!check(j).ok());
    j = small_trajectory();
    j["jko"]["tau"] = -1;
    CHECK(!check(j).ok());
    j = small_trajectory();
    j["kind"] = "bogus";
    CHECK(!check(j).ok());
    j = small_trajectory();
    j["grid"]["n"] = json::array({500});
    CHECK(!check(j).ok());
    // every error is reported, not just the first
    j = small_trajectory();
    j["params"]["s"] = 0.9;
    j["jko"]["tau"] = 0;
    CHECK(check(j).errors.size() >= 2);
    CHECK(!validate_file((scratch() / "does_not_exist.json").string()).ok());
    std::ofstream(scratch() / "broken.json") << "{ not json";
    CHECK(!validate_file((scratch() / "broken.json").string()).ok());
}

TEST_CASE("the resolved config round trips") {
    ValidationReport r;
    const auto c = parse_config(small_trajectory(), r);
    REQUIRE(r.ok());
    ValidationReport r2;
    const auto c2 = parse_config(to_json(c), r2);
    REQUIRE(r2.ok());
    CHECK(r2.defaulted.empty());
    CHECK(to_json(c2) == to_json(c));
    CHECK(config_digest(c2) == config_digest(c));
    auto other = c;
    other.jko.tau = 0.02;
    CHECK(config_digest(other) != config_digest(c));
    other = c;
    other.output_dir = "elsewhere";
    CHECK(config_digest(other) == config_digest(c));
}

// -------------------------------------------------------------- constants

TEST_CASE("constants table for d = 1, s = 1/4") {
    const auto t = constants_table(1, {0.25}, {2.0, std::numeric_limits<double>::infinity()});
    const auto g = t.column("gamma_p"), C = t.column("C_ds"), p = t.column("p");
    REQUIRE(g.size() == 2);
    CHECK(p[0] == 2);
    CHECK(std::isinf(p[1]));
    CHECK(g[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(0.4).epsilon(1e-15));
    // Riesz kernel for d = 1, s = 1/4 is (2 pi)^{-1/2} |x|^{-1/2}
    CHECK(C[0] == doctest::Approx(1 / std::sqrt(2 * std::numbers::pi)).epsilon(1e-14));
    CHECK_THROWS_AS(constants_table(1, {0.6}, {2.0}), DomainError);
}

TEST_CASE("CSV text parses back exactly") {
    CsvTable t;
    t.header = {"a", "b"};
    t.add_row({fmt17(0.1), ""});
    t.add_row({fmt17(std::numbers::pi), fmt17(-1e-300)});
    const auto p = scratch() / "rt.csv";
    write_text(p, t.text());
    const auto back = read_csv(p);
    CHECK(back.header == t.header);
    CHECK(back.column("a")[0] == 0.1);
    CHECK(back.column("a")[1] == std::numbers::pi);
    CHECK(std::isnan(back.column("b")[0]));
    CHECK(back.column("b")[1] == -1e-300);
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

// -------------------------------------------------------------- runs

TEST_CASE("trajectory run: artifacts, monotone F_s, checkpoint and determinism") {
    ValidationReport rep;
    const auto c = parse_config(small_trajectory(), rep);
    REQUIRE(rep.ok());
    const auto a = run_experiment(c, rep.defaulted);
    for (const char* name : {"trajectory.csv", "snapshots.csv", "checkpoint.json", "summary.csv", "manifest.json", "decay.svg"})
        CHECK(fs::exists(a.dir / name));
    CHECK(a.dir.filename().string().rfind("trajectory-", 0) == 0);

    const auto tr = read_csv(a.dir / "trajectory.csv");
    const auto F = tr.column("F_s");
    REQUIRE(F.size() == 11);
    for (size_t k = 1; k < F.size(); ++k) CHECK(F[k] < F[k - 1]);

    // every summary row is a pass at these settings and traces to summary.csv
    const auto sum = read_csv(a.dir / "summary.csv");
    REQUIRE(sum.rows.size() == a.summary.size());
    for (size_t i = 0; i < a.summary.size(); ++i) {
        CHECK(a.summary[i].pass());
        CHECK(sum.column("value")[i] == a.summary[i].value);
    }

    // the manifest echoes the resolved config and hashes each artifact
    const json m = json::parse(slurp(a.dir / "manifest.json"));
    CHECK(m.at("config") == to_json(c));
    CHECK(m.at("version") == kToolVersion);
    CHECK(!m.at("defaulted_fields").empty());
    for (const auto& f : m.at("files"))
        CHECK(f.at("fnv1a64") == hex64(fnv1a64(slurp(a.dir / f.at("name").get<std::string>()))));

    // the checkpoint state round trips bit for bit
    const auto X = run_trajectory(make_datum_1d(c), c.jko).states.back().X;
    const auto back = read_checkpoint_state(a.dir / "checkpoint.json");
    REQUIRE(back.size() == size_t(X.size()));
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == X(Index(i)));

    // a second run reproduces every byte
    std::map<std::string, std::string> first;
    for (const auto& f : a.files) first[f] = slurp(a.dir / f);
    const auto b = run_experiment(c, rep.defaulted);
    CHECK(b.dir == a.dir);
    for (const auto& f : b.files) CHECK(slurp(b.dir / f) == first[f]);
}

TEST_CASE("different configs never share an output directory") {
    ValidationReport rep;
    auto c = parse_config(small_trajectory(), rep);
    c.jko.horizon = 0.05;
    const auto a = run_experiment(c);
    c.jko.horizon = 0.03;
    const auto b = run_experiment(c);
    CHECK(a.dir != b.dir);
    CHECK(read_csv(a.dir / "trajectory.csv").rows.size() == 6);
}

// -------------------------------------------------------------- the tool

TEST_CASE("exit codes") {
    CHECK(run_tool("validate " + write_config("ok.json", small_trajectory()).string()) == 0);
    auto bad = small_trajectory();
    bad["params"]["s"] = 0.7;
    CHECK(run_tool("validate " + write_config("bad.json", bad).string()) == 2);
    CHECK(run_tool("run " + write_config("bad.json", bad).string()) == 2);
    CHECK(run_tool("constants 1 0.25 2 inf") == 0);
    CHECK(slurp(scratch() / "tool.log").find("gamma_p") != std::string::npos);
    CHECK(run_tool("constants 1 0.75") == 2);
    CHECK(run_tool("frobnicate") == 2);

    // a horizon the Newton solver cannot reach in one iteration: numerical failure
    auto starved = small_trajectory();
    starved["jko"]["max_iter"] = 1;
    starved["jko"]["tol"] = 1e-15;
    CHECK(run_tool("run " + write_config("starved.json", starved).string()) == 3);
    CHECK(slurp(scratch() / "tool.log").find("numerical failure") != std::string::npos);

    CHECK(run_tool("run " + write_config("ok.json", small_trajectory()).string()) == 0);
}
