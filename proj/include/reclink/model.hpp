#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "reclink/comparison.hpp"
#include "reclink/rng.hpp"

namespace reclink {

/// Injective map from file-1 blocks to file-2 blocks; every s is linked.
struct BlockAssignment {
    std::vector<int> target;  // s -> t
    std::vector<int> source;  // t -> s, or -1 when t is free

    BlockAssignment() = default;
    BlockAssignment(std::vector<int> targets, std::size_t T);

    [[nodiscard]] std::size_t S() const noexcept { return target.size(); }
    [[nodiscard]] std::size_t T() const noexcept { return source.size(); }
    [[nodiscard]] bool linked(std::size_t s, std::size_t t) const noexcept {
        return target[s] == static_cast<int>(t);
    }
    /// Throws std::invalid_argument unless total and injective.
    void check() const;
    bool operator==(const BlockAssignment&) const = default;
};

/// Partial one-to-one matching between the records of one block pair.
struct PairMatching {
    std::vector<int> row_link;  // i -> j or -1
    std::vector<int> col_link;  // j -> i or -1
    int links = 0;

    PairMatching() = default;
    PairMatching(std::size_t rows, std::size_t cols) : row_link(rows, -1), col_link(cols, -1) {}

    [[nodiscard]] std::size_t rows() const noexcept { return row_link.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return col_link.size(); }
    void link(std::size_t i, std::size_t j);
    void unlink_row(std::size_t i);
    void clear();
    /// Throws std::invalid_argument when row_link/col_link disagree.
    void check() const;
    bool operator==(const PairMatching&) const = default;
};

/// Record links of the linked block pairs: pairs[s] is the matching of (s, target[s]).
struct LinkageState {
    std::vector<PairMatching> pairs;

    /// Throws std::invalid_argument when a matching does not fit its pair's dimensions.
    void check(const BlockAssignment& b, const ComparisonCube& cube) const;
    bool operator==(const LinkageState&) const = default;
};

/// Per-variable categorical distributions over agreement levels.
struct ProbTable {
    std::vector<std::vector<double>> probs;

    [[nodiscard]] std::size_t size() const noexcept { return probs.size(); }
    static ProbTable uniform(const std::vector<int>& levels);
    /// Binary variables: probability of agreement (level 1).
    static ProbTable binary_agree(const std::vector<double>& agree);
    [[nodiscard]] std::vector<std::vector<double>> logs() const;
    [[nodiscard]] bool valid(double tol = 1e-12) const;
};

struct ModelParams {
    ProbTable block_match;       // blocks that are true pairs
    ProbTable block_nonmatch;    // blocks that are not
    ProbTable record_match;      // links within linked blocks
    ProbTable record_nonmatch;   // non-links within linked blocks
    ProbTable record_nonblock;   // all record pairs of unlinked blocks

    static ModelParams uniform(const ComparisonCube& cube);
    [[nodiscard]] bool valid() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

struct Hyperparams {
    // Concentration vectors, one per variable. Binary variables use (beta, alpha)
    // so that level 1 (agree) carries the Beta alpha.
    std::vector<std::vector<double>> block_match, block_nonmatch;
    std::vector<std::vector<double>> record_match, record_nonmatch, record_nonblock;
    double alpha_pi = 1.0;
    double beta_pi = 1.0;

    /// Every concentration equal to `concentration`.
    static Hyperparams flat(const ComparisonCube& cube, double concentration = 1.0, double alpha_pi = 1.0,
                            double beta_pi = 1.0);
    /// Throws ValidationError on non-positive values or arity mismatch.
    void validate(const ComparisonCube& cube) const;
};

/// Sum over variables of log theta[variable][level]; -inf on a zero-probability level.
double log_component_density(std::span<const Level> gamma, const ProbTable& theta);

/// Log of the beta-binomial linkage prior of one specific matching with
/// `links` links between blocks of n1 and n2 records (pi integrated out).
double log_prior_linkage(int links, std::size_t n1, std::size_t n2, double alpha_pi, double beta_pi);

/// Log-likelihood evaluated pair by pair from the cube, with compensated
/// summation. Throws std::invalid_argument when (b, c) are inconsistent.
double log_joint_likelihood(const BlockAssignment& b, const LinkageState& c, const ModelParams& theta,
                            const ComparisonCube& cube);

/// Agreement-level counts of the five mixture classes, flattened per variable.
struct ClassTallies {
    std::vector<std::vector<std::uint64_t>> block_match, block_nonmatch;
    std::vector<std::vector<std::uint64_t>> record_match, record_nonmatch, record_nonblock;
};

ClassTallies tally_block_classes(const BlockAssignment& b, const ComparisonCube& cube);
ClassTallies tally_record_classes(const BlockAssignment& b, const LinkageState& c, const ComparisonCube& cube);

/// Dirichlet draw via normalized gamma variates, clamped to [1e-12, 1 - 1e-12].
std::vector<double> sample_dirichlet(const std::vector<double>& concentration, Rng& rng);

/// Conjugate draws of the block-level parameters given B only.
void sample_block_parameters(const BlockAssignment& b, const ComparisonCube& cube, const Hyperparams& hyper,
                             Rng& rng, ModelParams& out);
/// Conjugate draws of the record-level parameters given (B, C).
void sample_record_parameters(const BlockAssignment& b, const LinkageState& c, const ComparisonCube& cube,
                              const Hyperparams& hyper, Rng& rng, ModelParams& out);
/// Both, from one stream (block parameters first).
ModelParams sample_parameters(const BlockAssignment& b, const LinkageState& c, const ComparisonCube& cube,
                              const Hyperparams& hyper, Rng& rng);

/// Neumaier compensated sum.
class CompensatedSum {
 public:
    void add(double x) noexcept;
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace reclink
