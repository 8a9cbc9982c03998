#pragma once

#include "fracjko/jko.hpp"
#include "fracjko/reference.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace fracjko::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.3.0";

enum class Kind { trajectory, decay_sweep, two_scale, s_to_zero, oracle_compare, constants_table };

struct GridSpec {
    std::vector<long> n{2048};
    std::vector<double> length{40.0};
    std::vector<double> origin{-20.0};
};

struct DatumSpec {
    std::string type = "gaussian";  // gaussian | uniform | two-bumps | file
    std::vector<double> mean{0.0};
    double sigma = 1.0;
    double a = 0, b = 1;              // uniform
    std::vector<double> centers;      // two-bumps (1D)
    std::vector<double> weights;
    std::string path;                 // file: one value per cell
    double mass = 1.0;
};

struct DiagnosticsSpec {
    bool el_residual = true;
    bool step_decay = true;
    bool dissipation = false;
    bool smoothing = false;
    std::vector<double> fit_window{5.0, 200.0};
    std::vector<double> p_list{2.0, std::numeric_limits<double>::infinity()};
};

struct ReferenceSpec {
    long n = 1024;
    double length = 16, origin = -8;
    double dt = 1e-2, cfl = 0.4;
    std::vector<double> sample_times;
};

struct ExperimentConfig {
    Kind kind = Kind::trajectory;
    FracParams<double> params{1, 0.25};
    GridSpec grid;
    DatumSpec datum;
    JkoConfig<double> jko;
    DiagnosticsSpec diagnostics;
    std::vector<double> s_list;       // decay-sweep, s-to-zero
    double two_scale_t = 1.0;
    long two_scale_j_max = 12;
    ReferenceSpec reference;
    std::vector<double> constants_p{2.0, 3.0, std::numeric_limits<double>::infinity()};
    std::string output_dir = "runs";
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> defaulted;  // dotted paths of fields filled from defaults
    bool ok() const { return errors.empty(); }
};

// Parses and validates; on errors the returned config is unusable.
ExperimentConfig parse_config(const nlohmann::json& j, ValidationReport& report);
ValidationReport validate_file(const std::string& path, ExperimentConfig* out = nullptr);

// Fully resolved config (defaults filled in) as canonical JSON.
nlohmann::json to_json(const ExperimentConfig& c);

std::string kind_name(Kind k);
std::string p_label(double p);

GridDensity<double, 1> make_datum_1d(const ExperimentConfig& c);
GridDensity<double, 2> make_datum_2d(const ExperimentConfig& c);

}  // namespace fracjko::cli
