#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfpk/config.hpp"

namespace cfpk {

inline constexpr const char* kVersion = "cfpk 0.1.0";

struct Contract {
    std::string name;
    bool pass = false;
    bool enabled = true;
    double value = 0.0;
    double limit = 0.0;
    std::string note;
};

struct ExperimentOutput {
    nlohmann::json results = nlohmann::json::object();
    std::vector<Contract> contracts;
    std::map<std::string, std::string> files;  // file name -> contents
    std::string message;                       // short human-readable line for stdout

    bool ok() const;
    /// Name of the first enabled contract that failed, empty when all pass.
    std::string first_failure() const;
    /// Summary document: version, echoed config, results and contracts. Keys are sorted.
    nlohmann::json summary(const RunConfig& cfg) const;
};

ExperimentOutput run_experiment(const RunConfig& cfg);

/// Writes config.ini, summary.json and every entry of files into dir (created if missing).
void write_outputs(const RunConfig& cfg, const ExperimentOutput& out, const std::string& dir);

/// Random mixture of up to three Gaussians on the grid.
Density random_density(std::mt19937_64& rng, const Grid& grid);

}  // namespace cfpk
