#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reclink/baselines.hpp"
#include "reclink/comparison.hpp"
#include "reclink/rng.hpp"
#include "reclink/sampler.hpp"

namespace reclink {

/// Error rates applied to file 1: block Region, block Income, record DOB month.
struct ErrorRates {
    double region = 0.0;
    double income = 0.0;
    double dob = 0.0;
    void validate() const;
    bool operator==(const ErrorRates&) const = default;
};

struct SimulationConfig {
    int S = 30;
    int T = 40;
    int n1s = 20;
    int n2t = 30;
    int nm = 15;  // true links per true block pair
    ErrorRates errors;
    bool day_included = false;
    int replicates = 10;
    std::uint64_t seed = 1;
    bool analysis_columns = true;  // adds file-1 "exposure" and file-2 "outcome" columns

    /// Throws ValidationError.
    void validate() const;
};

struct GroundTruth {
    std::vector<int> blocks;        // file-1 block -> file-2 block
    std::vector<RecordLink> links;  // sorted
};

struct SimulatedData {
    BlockedFile f1, f2;
    GroundTruth truth;
};

/// Region, Status, Trauma, Income (absolute, 500) per block; DOB (ordinal on
/// year and month, plus day when included) and Gender per record.
ComparisonSchema simulation_schema(bool day_included);

/// Error-free files; true block pairs and true links carry replicated values.
SimulatedData generate_dataset(const SimulationConfig& cfg, Rng& rng);

/// Standard deviation of the Income noise giving a disagreement probability of
/// `rate` on true block pairs: 500 / Phi^-1(1 - rate / 2). Zero for rate 0.
double income_noise_sd(double rate);

/// Copy of f1 with Region, Income and true-link DOB-month errors.
BlockedFile inject_errors(const BlockedFile& f1, const GroundTruth& truth, const ErrorRates& rates, Rng& rng);

struct LinkageMetrics {
    double tpr = 0.0, ppv = 0.0, f1 = 0.0, acc = 0.0;
    bool has_acc = false;         // only blocked samples define block accuracy
    bool ppv_degenerate = false;  // no declared links; ppv reported as 0
};

LinkageMetrics evaluate_sample(const PosteriorSample& sample, const GroundTruth& truth);

/// Running mean of metrics over a chain's samples.
struct MetricAccumulator {
    double tpr = 0.0, ppv = 0.0, f1 = 0.0, acc = 0.0;
    std::size_t count = 0, degenerate = 0;
    bool has_acc = false;
    void add(const LinkageMetrics& m);
    [[nodiscard]] LinkageMetrics mean() const;
};

struct StudyConfig {
    std::vector<ErrorRates> grid;
    std::vector<Method> methods{Method::mlbrl, Method::cibrl, Method::brl};
    SimulationConfig simulation;
    ChainConfig chain;
    HyperSpec hyper;
    unsigned threads = 1;  // replicates run concurrently
};

struct StudyRow {
    ErrorRates errors;
    Method method = Method::mlbrl;
    bool day_included = false;
    int replicates = 0;
    double tpr = 0, ppv = 0, f1 = 0, acc = 0;
    double tpr_sd = 0, ppv_sd = 0, f1_sd = 0, acc_sd = 0;
    bool has_acc = false;
    std::vector<LinkageMetrics> per_replicate;
};

/// The error grid of the simulation study.
std::vector<ErrorRates> full_error_grid();

/// generate -> inject -> link -> evaluate for every cell, method and replicate.
/// Clean data depend on the replicate only, so cells and methods are paired.
std::vector<StudyRow> run_study(const StudyConfig& cfg,
                                const std::function<void(const StudyRow&)>& on_row = nullptr);

std::string study_csv_header();
std::string study_csv_row(const StudyRow& row);

}  // namespace reclink
