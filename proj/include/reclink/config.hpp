#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "reclink/baselines.hpp"
#include "reclink/sampler.hpp"
#include "reclink/simulation.hpp"

namespace reclink {

struct AnalysisSpec {
    std::string outcome = "outcome";
    std::vector<std::string> exposures{"exposure"};
    std::vector<std::string> covariates;
    double level = 0.95;
};

/// Everything a run needs. Unknown keys are rejected; absent keys keep defaults.
struct RunConfig {
    std::uint64_t seed = 1;
    unsigned threads = 1;
    Method method = Method::mlbrl;
    std::filesystem::path output_dir = "out";

    std::filesystem::path file1, file2, schema;                 // link, analyze
    std::filesystem::path samples, truth_blocks, truth_links;  // evaluate, analyze
    bool export_matrices = true;

    ChainConfig chain;
    HyperSpec hyper;
    SimulationConfig simulation;
    std::vector<ErrorRates> grid;  // study; empty means the full grid
    std::vector<Method> study_methods{Method::mlbrl, Method::cibrl, Method::brl};
    AnalysisSpec analysis;

    static RunConfig from_json(const nlohmann::json& doc);
    [[nodiscard]] nlohmann::json to_json() const;
    /// Seeds every component from `seed`.
    void apply_seed();
    /// Paths a subcommand reads must exist; throws ValidationError.
    void require_files(const std::vector<std::filesystem::path>& paths) const;
};

/// FNV-1a hash of the canonical (sorted-key, compact) JSON of the config.
std::string config_hash(const RunConfig& cfg);

}  // namespace reclink
