#include "reclink/model.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "reclink/errors.hpp"

namespace reclink {

namespace {
constexpr double kClampLow = 1e-12;
constexpr double kClampHigh = 1.0 - 1e-12;
}  // namespace

BlockAssignment::BlockAssignment(std::vector<int> targets, std::size_t T)
    : target(std::move(targets)), source(T, -1) {
    for (std::size_t s = 0; s < target.size(); ++s) {
        const int t = target[s];
        if (t < 0 || static_cast<std::size_t>(t) >= T) throw std::invalid_argument("block target out of range");
        if (source[t] != -1) throw std::invalid_argument("block assignment is not injective");
        source[t] = static_cast<int>(s);
    }
}

void BlockAssignment::check() const {
    std::vector<int> seen(source.size(), -1);
    for (std::size_t s = 0; s < target.size(); ++s) {
        const int t = target[s];
        if (t < 0 || static_cast<std::size_t>(t) >= source.size()) throw std::invalid_argument("block target out of range");
        if (seen[t] != -1) throw std::invalid_argument("block assignment is not injective");
        seen[t] = static_cast<int>(s);
    }
    if (seen != source) throw std::invalid_argument("block inverse map is stale");
}

void PairMatching::link(std::size_t i, std::size_t j) {
    if (row_link[i] != -1 || col_link[j] != -1) throw std::logic_error("link would break one-to-one matching");
    row_link[i] = static_cast<int>(j);
    col_link[j] = static_cast<int>(i);
    ++links;
}

void PairMatching::unlink_row(std::size_t i) {
    const int j = row_link[i];
    if (j < 0) return;
    col_link[j] = -1;
    row_link[i] = -1;
    --links;
}

void PairMatching::clear() {
    std::fill(row_link.begin(), row_link.end(), -1);
    std::fill(col_link.begin(), col_link.end(), -1);
    links = 0;
}

void PairMatching::check() const {
    int n = 0;
    for (std::size_t i = 0; i < row_link.size(); ++i) {
        const int j = row_link[i];
        if (j < 0) continue;
        if (static_cast<std::size_t>(j) >= col_link.size() || col_link[j] != static_cast<int>(i))
            throw std::invalid_argument("matching rows and columns disagree");
        ++n;
    }
    int m = 0;
    for (int i : col_link) m += i >= 0;
    if (n != links || m != links) throw std::invalid_argument("matching link count is stale");
}

void LinkageState::check(const BlockAssignment& b, const ComparisonCube& cube) const {
    if (pairs.size() != b.S()) throw std::invalid_argument("linkage state does not cover every block");
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        const auto& m = pairs[s];
        if (m.rows() != cube.rows(s) || m.cols() != cube.cols(b.target[s]))
            throw std::invalid_argument("matching dimensions do not match block pair (" + std::to_string(s) + ", " +
                                        std::to_string(b.target[s]) + ")");
        m.check();
    }
}

ProbTable ProbTable::uniform(const std::vector<int>& levels) {
    ProbTable t;
    for (int L : levels) t.probs.emplace_back(static_cast<std::size_t>(L), 1.0 / L);
    return t;
}

ProbTable ProbTable::binary_agree(const std::vector<double>& agree) {
    ProbTable t;
    for (double a : agree) t.probs.push_back({1.0 - a, a});
    return t;
}

std::vector<std::vector<double>> ProbTable::logs() const {
    std::vector<std::vector<double>> out(probs.size());
    for (std::size_t k = 0; k < probs.size(); ++k)
        for (double p : probs[k]) out[k].push_back(std::log(p));
    return out;
}

bool ProbTable::valid(double tol) const {
    for (const auto& v : probs) {
        double sum = 0.0;
        for (double p : v) {
            if (!(p > 0.0 && p < 1.0)) return false;
            sum += p;
        }
        if (std::fabs(sum - 1.0) > tol) return false;
    }
    return true;
}

ModelParams ModelParams::uniform(const ComparisonCube& cube) {
    ModelParams m;
    m.block_match = m.block_nonmatch = ProbTable::uniform(cube.block_level_counts());
    m.record_match = m.record_nonmatch = m.record_nonblock = ProbTable::uniform(cube.record_level_counts());
    return m;
}

bool ModelParams::valid() const {
    return block_match.valid() && block_nonmatch.valid() && record_match.valid() && record_nonmatch.valid() &&
           record_nonblock.valid();
}

nlohmann::json ModelParams::to_json() const {
    return {{"block_match", block_match.probs},         {"block_nonmatch", block_nonmatch.probs},
            {"record_match", record_match.probs},       {"record_nonmatch", record_nonmatch.probs},
            {"record_nonblock", record_nonblock.probs}};
}

Hyperparams Hyperparams::flat(const ComparisonCube& cube, double concentration, double alpha_pi, double beta_pi) {
    Hyperparams h;
    auto fill = [&](const std::vector<int>& levels) {
        std::vector<std::vector<double>> out;
        for (int L : levels) out.emplace_back(static_cast<std::size_t>(L), concentration);
        return out;
    };
    h.block_match = h.block_nonmatch = fill(cube.block_level_counts());
    h.record_match = h.record_nonmatch = h.record_nonblock = fill(cube.record_level_counts());
    h.alpha_pi = alpha_pi;
    h.beta_pi = beta_pi;
    return h;
}

void Hyperparams::validate(const ComparisonCube& cube) const {
    if (!(alpha_pi > 0.0) || !(beta_pi > 0.0)) throw ValidationError("alpha_pi and beta_pi must be > 0");
    auto check = [](const std::vector<std::vector<double>>& conc, const std::vector<int>& levels, const char* what) {
        if (conc.size() != levels.size()) throw ValidationError(std::string(what) + ": arity mismatch");
        for (std::size_t k = 0; k < conc.size(); ++k) {
            if (conc[k].size() != static_cast<std::size_t>(levels[k]))
                throw ValidationError(std::string(what) + ": level count mismatch");
            for (double a : conc[k])
                if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError(std::string(what) + ": concentration must be > 0");
        }
    };
    check(block_match, cube.block_level_counts(), "block_match");
    check(block_nonmatch, cube.block_level_counts(), "block_nonmatch");
    check(record_match, cube.record_level_counts(), "record_match");
    check(record_nonmatch, cube.record_level_counts(), "record_nonmatch");
    check(record_nonblock, cube.record_level_counts(), "record_nonblock");
}

double log_component_density(std::span<const Level> gamma, const ProbTable& theta) {
    if (gamma.size() != theta.size()) throw std::invalid_argument("agreement vector arity differs from parameters");
    double out = 0.0;
    for (std::size_t k = 0; k < gamma.size(); ++k) {
        const double p = theta.probs[k].at(gamma[k]);
        if (p <= 0.0) return -std::numeric_limits<double>::infinity();
        out += std::log(p);
    }
    return out;
}

double log_prior_linkage(int links, std::size_t n1, std::size_t n2, double alpha_pi, double beta_pi) {
    const double lo = static_cast<double>(std::min(n1, n2));
    const double hi = static_cast<double>(std::max(n1, n2));
    const double nm = links;
    if (links < 0 || nm > lo) throw std::invalid_argument("link count out of range");
    if (!(alpha_pi > 0.0) || !(beta_pi > 0.0)) throw std::invalid_argument("alpha_pi and beta_pi must be > 0");
    return std::lgamma(hi - nm + 1.0) - std::lgamma(hi + 1.0) + std::lgamma(alpha_pi + beta_pi) -
           std::lgamma(alpha_pi) - std::lgamma(beta_pi) + std::lgamma(nm + alpha_pi) +
           std::lgamma(lo - nm + beta_pi) - std::lgamma(lo + alpha_pi + beta_pi);
}

void CompensatedSum::add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
        comp_ += (sum_ - t) + x;
    else
        comp_ += (x - t) + sum_;
    sum_ = t;
}

double log_joint_likelihood(const BlockAssignment& b, const LinkageState& c, const ModelParams& theta,
                            const ComparisonCube& cube) {
    b.check();
    c.check(b, cube);
    CompensatedSum total;
    for (std::size_t s = 0; s < cube.S(); ++s) {
        for (std::size_t t = 0; t < cube.T(); ++t) {
            const bool linked = b.linked(s, t);
            total.add(log_component_density(cube.block_levels(s, t), linked ? theta.block_match : theta.block_nonmatch));
            const PairMatching* m = linked ? &c.pairs[s] : nullptr;
            for (std::size_t i = 0; i < cube.rows(s); ++i) {
                for (std::size_t j = 0; j < cube.cols(t); ++j) {
                    const ProbTable& table = !linked                            ? theta.record_nonblock
                                             : m->row_link[i] == static_cast<int>(j) ? theta.record_match
                                                                                     : theta.record_nonmatch;
                    total.add(log_component_density(cube.record_levels(s, t, i, j), table));
                }
            }
        }
    }
    return total.value();
}

namespace {

std::vector<std::vector<std::uint64_t>> zero_counts(const std::vector<int>& levels) {
    std::vector<std::vector<std::uint64_t>> out;
    for (int L : levels) out.emplace_back(static_cast<std::size_t>(L), 0);
    return out;
}

}  // namespace

ClassTallies tally_block_classes(const BlockAssignment& b, const ComparisonCube& cube) {
    ClassTallies out;
    out.block_match = zero_counts(cube.block_level_counts());
    out.block_nonmatch = out.block_match;
    for (std::size_t s = 0; s < cube.S(); ++s) {
        for (std::size_t t = 0; t < cube.T(); ++t) {
            auto& dst = b.linked(s, t) ? out.block_match : out.block_nonmatch;
            const auto lv = cube.block_levels(s, t);
            for (std::size_t p = 0; p < lv.size(); ++p) ++dst[p][lv[p]];
        }
    }
    return out;
}

ClassTallies tally_record_classes(const BlockAssignment& b, const LinkageState& c, const ComparisonCube& cube) {
    ClassTallies out;
    const auto& levels = cube.record_level_counts();
    out.record_match = zero_counts(levels);
    out.record_nonmatch = out.record_match;
    out.record_nonblock = out.record_match;
    const std::size_t K = cube.K();
    std::vector<std::uint64_t> all(cube.total_levels(), 0), linked(cube.total_levels(), 0);
    // Fixed (s, t) order keeps the reduction deterministic.
    for (std::size_t s = 0; s < cube.S(); ++s) {
        for (std::size_t t = 0; t < cube.T(); ++t) {
            const auto h = cube.level_histogram(s, t);
            auto& dst = b.linked(s, t) ? linked : all;
            for (std::size_t x = 0; x < h.size(); ++x) dst[x] += h[x];
        }
    }
    for (std::size_t s = 0; s < cube.S(); ++s) {
        const auto& m = c.pairs[s];
        const std::size_t t = static_cast<std::size_t>(b.target[s]);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (m.row_link[i] < 0) continue;
            const auto lv = cube.pattern_levels(cube.pattern(s, t, i, static_cast<std::size_t>(m.row_link[i])));
            for (std::size_t k = 0; k < K; ++k) ++out.record_match[k][lv[k]];
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t l = 0; l < static_cast<std::size_t>(levels[k]); ++l) {
            const std::size_t x = cube.level_offset(k) + l;
            out.record_nonmatch[k][l] = linked[x] - out.record_match[k][l];
            out.record_nonblock[k][l] = all[x];
        }
    }
    return out;
}

std::vector<double> sample_dirichlet(const std::vector<double>& concentration, Rng& rng) {
    std::vector<double> out(concentration.size());
    double sum = 0.0;
    for (std::size_t l = 0; l < out.size(); ++l) {
        out[l] = std::gamma_distribution<double>(concentration[l], 1.0)(rng);
        sum += out[l];
    }
    if (!(sum > 0.0)) {
        // Every variate underflowed; fall back to the prior mean direction.
        sum = 0.0;
        for (std::size_t l = 0; l < out.size(); ++l) sum += (out[l] = concentration[l]);
    }
    double clamped_sum = 0.0;
    for (double& p : out) {
        p = std::clamp(p / sum, kClampLow, kClampHigh);
        clamped_sum += p;
    }
    for (double& p : out) p /= clamped_sum;
    return out;
}

namespace {

ProbTable posterior_draw(const std::vector<std::vector<double>>& prior,
                         const std::vector<std::vector<std::uint64_t>>& counts, Rng& rng) {
    ProbTable out;
    for (std::size_t k = 0; k < prior.size(); ++k) {
        std::vector<double> conc = prior[k];
        for (std::size_t l = 0; l < conc.size(); ++l) conc[l] += static_cast<double>(counts[k][l]);
        out.probs.push_back(sample_dirichlet(conc, rng));
    }
    return out;
}

}  // namespace

void sample_block_parameters(const BlockAssignment& b, const ComparisonCube& cube, const Hyperparams& hyper,
                             Rng& rng, ModelParams& out) {
    const auto tallies = tally_block_classes(b, cube);
    out.block_match = posterior_draw(hyper.block_match, tallies.block_match, rng);
    out.block_nonmatch = posterior_draw(hyper.block_nonmatch, tallies.block_nonmatch, rng);
}

void sample_record_parameters(const BlockAssignment& b, const LinkageState& c, const ComparisonCube& cube,
                              const Hyperparams& hyper, Rng& rng, ModelParams& out) {
    const auto tallies = tally_record_classes(b, c, cube);
    out.record_match = posterior_draw(hyper.record_match, tallies.record_match, rng);
    out.record_nonmatch = posterior_draw(hyper.record_nonmatch, tallies.record_nonmatch, rng);
    out.record_nonblock = posterior_draw(hyper.record_nonblock, tallies.record_nonblock, rng);
}

ModelParams sample_parameters(const BlockAssignment& b, const LinkageState& c, const ComparisonCube& cube,
                              const Hyperparams& hyper, Rng& rng) {
    ModelParams out;
    sample_block_parameters(b, cube, hyper, rng, out);
    sample_record_parameters(b, c, cube, hyper, rng, out);
    return out;
}

}  // namespace reclink
