#pragma once

#include "config.hpp"
#include "output.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fracjko::cli {

struct SummaryRow {
    std::string check;
    double value;
    double tolerance;
    std::string sense;  // "<=" or ">="
    bool pass() const { return sense == "<=" ? value <= tolerance : value >= tolerance; }
};

struct RunResult {
    std::filesystem::path dir;
    std::vector<std::string> files;
    std::vector<SummaryRow> summary;
};

// Output root: $FRACJKO_OUTPUT_ROOT if set, else config.output.dir.
std::filesystem::path output_root(const ExperimentConfig& c);
std::string config_digest(const ExperimentConfig& c);

RunResult run_experiment(const ExperimentConfig& c, const std::vector<std::string>& defaulted = {});

CsvTable constants_table(int d, const std::vector<double>& s_list, const std::vector<double>& p_list);

// Checkpoint round trip: the final state array parsed back from its decimal strings.
std::vector<double> read_checkpoint_state(const std::filesystem::path& p);

}  // namespace fracjko::cli
