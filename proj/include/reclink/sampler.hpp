#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "reclink/comparison.hpp"
#include "reclink/em.hpp"
#include "reclink/model.hpp"
#include "reclink/rng.hpp"

namespace reclink {

/// A candidate record matching for every block pair, used to propose the
/// record links of a newly paired block.
struct ProposalPool {
    std::size_t S = 0, T = 0;
    std::vector<PairMatching> entries;  // s * T + t
    bool adaptive = true;

    [[nodiscard]] PairMatching& at(std::size_t s, std::size_t t) { return entries[s * T + t]; }
    [[nodiscard]] const PairMatching& at(std::size_t s, std::size_t t) const { return entries[s * T + t]; }
};

/// EM fit on block and record levels of all candidate record pairs, then a
/// maximum-weight assignment per block pair on the positive log-odds. Masked
/// pairs are never pooled.
ProposalPool build_proposal_pool(const ComparisonCube& cube, unsigned threads = 1, EmResult* em_out = nullptr);

/// How a block move proposes the record links of the new pairs.
///  pool:     install the pool entry and accept on the prior x likelihood ratio.
///  hastings: draw from a mixture of the pool entry (weight pool_weight) and
///            the linkage prior, with the proposal densities in the ratio.
///            This leaves the joint posterior exactly invariant.
enum class BlockMoveRule { pool, hastings };

struct ChainConfig {
    int iterations = 2000;
    int burn_in = -1;  // -1: half of iterations
    int sweeps = 25;   // record sweeps per linked block pair per iteration
    int brl_sweeps = 1;
    int thin = 1;
    std::uint64_t seed = 1;
    bool adaptive_pool = true;
    BlockMoveRule block_move_rule = BlockMoveRule::pool;
    double pool_weight = 0.9;
    unsigned threads = 1;
    std::optional<ModelParams> fixed_params;  // freeze parameters (no step-1 draws)
    std::size_t drift_check_interval = 0;     // accepted moves between drift checks; 0 disables
    std::size_t brl_pair_cap = 50'000'000;

    [[nodiscard]] int effective_burn_in() const noexcept { return burn_in < 0 ? iterations / 2 : burn_in; }
    /// Throws ValidationError.
    void validate() const;
};

struct RecordLink {
    int s = 0, t = 0;  // file-1 block, file-2 block
    int i = 0, j = 0;  // record index inside each block
    auto operator<=>(const RecordLink&) const = default;
};

/// One posterior draw, always in the caller's file orientation.
struct PosteriorSample {
    int iteration = 0;
    bool blocked = true;            // false for unblocked linkage
    std::vector<int> blocks;        // file-1 block -> file-2 block, or -1
    std::vector<RecordLink> links;  // sorted
    ModelParams params;
    double log_likelihood = 0.0;

    /// Link count of each file-1 block's pair (zeros when unblocked).
    [[nodiscard]] std::vector<int> pair_link_counts() const;
};

struct ChainDiagnostics {
    std::array<std::uint64_t, 2> block_proposals{};  // move types 1 and 2
    std::array<std::uint64_t, 2> block_accepts{};
    std::uint64_t masked_rejections = 0;
    std::uint64_t record_updates = 0;
    std::uint64_t record_changes = 0;
    std::uint64_t drift_checks = 0;
    double max_drift = 0.0;
    std::vector<double> loglik_trace;
    bool swapped = false;
    std::size_t candidate_pairs = 0;
    std::vector<std::uint64_t> missing_counts;
    int em_iterations = 0;
    bool em_degenerate = false;
    bool degenerate_params = false;

    [[nodiscard]] nlohmann::json to_json() const;
};

using SampleSink = std::function<void(const PosteriorSample&)>;

/// Per-iteration lookup tables derived from one parameter draw.
struct LikelihoodTables {
    std::vector<double> link_log_ratio;  // per pattern: log m - log u
    std::vector<double> link_weight;     // per pattern: exp(link_log_ratio - max_log_ratio)
    double max_log_ratio = 0.0;
    std::vector<double> linked_base;     // per block pair: linked block term + every record pair as non-link
    std::vector<double> unlinked;        // per block pair: unlinked block term + record pairs
    double unlinked_total = 0.0;
    bool record_terms = true;

    static LikelihoodTables build(const ModelParams& theta, const ComparisonCube& cube, bool block_terms = true,
                                  bool record_terms = true);
    /// Contribution of (s, t) when linked with matching m.
    [[nodiscard]] double linked(const ComparisonCube& cube, std::size_t s, std::size_t t,
                                const PairMatching& m) const;
    /// Log-likelihood of a full state.
    [[nodiscard]] double total(const ComparisonCube& cube, const BlockAssignment& b, const LinkageState& c) const;
};

/// Full conditional of record i's link given the other rows of the matching,
/// computed directly in log space. Entry j < cols is "link to j" (zero for
/// taken or masked j); the last entry is "no link".
std::vector<double> record_full_conditional(std::size_t i, const PairMatching& c_minus_i, std::size_t s,
                                            std::size_t t, const ModelParams& theta, double alpha_pi,
                                            double beta_pi, const ComparisonCube& cube);

/// Gibbs sweeps over the rows of (s, t). Returns the log-likelihood change.
double sweep_record_links(std::size_t s, std::size_t t, PairMatching& c, const LikelihoodTables& tables,
                          const ComparisonCube& cube, double alpha_pi, double beta_pi, Rng& rng, int sweeps,
                          std::uint64_t* updates = nullptr, std::uint64_t* changes = nullptr);

struct BlockMoveOptions {
    BlockMoveRule rule = BlockMoveRule::pool;
    double pool_weight = 0.9;
    bool record_level = true;  // false: block terms only, pool entries installed as is
};

struct BlockMoveResult {
    bool accepted = false;
    int move_type = 1;
    bool masked = false;
    double log_ratio = 0.0;
    double delta_loglik = 0.0;
};

/// One Metropolis-Hastings proposal for file-1 block s.
BlockMoveResult mh_block_move(std::size_t s, BlockAssignment& b, LinkageState& c, const ProposalPool& pool,
                              const LikelihoodTables& tables, const ComparisonCube& cube, double alpha_pi,
                              double beta_pi, const BlockMoveOptions& opts, Rng& rng);

/// Draw of a matching from the linkage prior of an n1 x n2 pair.
PairMatching sample_prior_matching(std::size_t n1, std::size_t n2, double alpha_pi, double beta_pi, Rng& rng);

/// Comparison cube in sampler orientation (file 1 has no more blocks than file 2).
struct LinkageProblem {
    ComparisonCube cube;
    bool swapped = false;
};

LinkageProblem prepare_problem(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                               unsigned threads = 1);

/// Shared concentration settings; expanded per variable once the cube is known.
struct HyperSpec {
    double concentration = 1.0;
    double alpha_pi = 1.0;
    double beta_pi = 1.0;
};

enum class BlockedMethod { mlbrl, cibrl };

/// Blocked chain on a prepared problem. Samples are passed to `sink`.
ChainDiagnostics run_blocked_chain(const LinkageProblem& problem, const Hyperparams& hyper, const ChainConfig& chain,
                                   BlockedMethod method, const SampleSink& sink,
                                   std::optional<ProposalPool> pool = std::nullopt);

ChainDiagnostics run_mlbrl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                           const HyperSpec& hyper, const ChainConfig& chain, const SampleSink& sink);
std::vector<PosteriorSample> run_mlbrl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                       const HyperSpec& hyper, const ChainConfig& chain);

}  // namespace reclink
