#include "../src/runner.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

using namespace fracjko;
using namespace fracjko::cli;

namespace {

constexpr int kExitSchema = 2;
constexpr int kExitNumerical = 3;

void print_report(const ValidationReport& rep) {
    for (const auto& e : rep.errors) std::cout << "error: " << e << "\n";
    for (const auto& d : rep.defaulted) std::cout << "default: " << d << "\n";
}

int cmd_validate(const std::string& path) {
    const auto rep = validate_file(path);
    print_report(rep);
    std::cout << (rep.ok() ? "valid" : "invalid") << " (" << rep.errors.size() << " errors, " << rep.defaulted.size()
              << " defaulted)\n";
    return rep.ok() ? 0 : kExitSchema;
}

int cmd_run(const std::string& path) {
    ExperimentConfig c;
    const auto rep = validate_file(path, &c);
    if (!rep.ok()) {
        print_report(rep);
        return kExitSchema;
    }
    try {
        const auto res = run_experiment(c, rep.defaulted);
        std::cout << "output: " << res.dir.string() << "\n";
        int failed = 0;
        for (const auto& r : res.summary) {
            // rounded for display; summary.csv keeps all 17 digits
            std::cout << std::left << std::setprecision(6) << std::setw(44) << r.check << " " << std::setw(14) << r.value
                      << " " << r.sense << " " << std::setw(10) << r.tolerance << " " << (r.pass() ? "pass" : "FAIL")
                      << "\n";
            failed += !r.pass();
        }
        std::cout << res.files.size() << " files, " << failed << " failing checks (see summary.csv)\n";
        return 0;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure in " << e.module << " at step " << e.step << ": " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitSchema;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

int cmd_constants(int d, double s, std::vector<std::string> ps) {
    std::vector<double> p;
    if (ps.empty()) ps = {"2", "inf"};
    for (const auto& x : ps) p.push_back(x == "inf" ? std::numeric_limits<double>::infinity() : std::stod(x));
    try {
        std::cout << constants_table(d, {s}, p).text();
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitSchema;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minimizing-movement solver for the fractional-pressure porous medium equation"};
    app.require_subcommand(1);
    std::string config;
    auto* run = app.add_subcommand("run", "run an experiment config, writing artifacts under the output root");
    run->add_option("config", config, "experiment config (JSON)")->required();
    auto* val = app.add_subcommand("validate", "check a config without computing");
    val->add_option("config", config, "experiment config (JSON)")->required();
    int d = 1;
    double s = 0.25;
    std::vector<std::string> ps;
    auto* con = app.add_subcommand("constants", "print the decay constants for (d, s, p...)");
    con->add_option("d", d)->required();
    con->add_option("s", s)->required();
    con->add_option("p", ps, "exponents, numbers or inf");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitSchema;
    }
    if (*run) return cmd_run(config);
    if (*val) return cmd_validate(config);
    return cmd_constants(d, s, ps);
}
