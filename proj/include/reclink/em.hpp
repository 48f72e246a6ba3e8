#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "reclink/comparison.hpp"

namespace reclink {

/// Distinct agreement vectors with multiplicities.
struct AgreementSet {
    std::vector<int> levels;          // level count per variable
    std::vector<Level> patterns;      // row-major, levels.size() per pattern
    std::vector<double> counts;       // multiplicity per pattern

    [[nodiscard]] std::size_t size() const noexcept { return counts.size(); }
    [[nodiscard]] std::size_t arity() const noexcept { return levels.size(); }
};

/// Record-level patterns of every record pair in the cube.
AgreementSet agreement_set(const ComparisonCube& cube);

/// Block levels followed by record levels, over every candidate record pair of
/// every allowed block pair.
AgreementSet joint_agreement_set(const ComparisonCube& cube);

struct FellegiSunterParams {
    std::vector<std::vector<double>> m, u;  // per variable, per level
    double match_share = 0.1;

    /// log m(g) - log u(g) for pattern g of `set`.
    [[nodiscard]] double log_odds(const AgreementSet& set, std::size_t g) const;
};

struct EmResult {
    FellegiSunterParams params;
    std::vector<double> loglik;  // observed-data log-likelihood after each iteration (index 0: start)
    int iterations = 0;
    bool converged = false;
    bool degenerate = false;  // a single distinct pattern; parameters are not identified
};

/// Default start: match component favours high agreement levels.
FellegiSunterParams default_em_start(const std::vector<int>& levels);

double em_log_likelihood(const AgreementSet& set, const FellegiSunterParams& params);

/// Two-class latent mixture fitted by EM. Stops when the log-likelihood gain
/// drops below tol * (1 + |loglik|) or after max_iter iterations.
EmResult em_mixture(const AgreementSet& set, std::optional<FellegiSunterParams> init = std::nullopt,
                    double tol = 1e-10, int max_iter = 500);

}  // namespace reclink
