#include "reclink/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace reclink {

namespace {

constexpr double kFloor = 1e-12;

double safe_log(double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void component_logs(const AgreementSet& set, const FellegiSunterParams& prm, std::size_t g, double& lm,
                    double& lu) {
    lm = safe_log(prm.match_share);
    lu = safe_log(1.0 - prm.match_share);
    const std::size_t K = set.arity();
    for (std::size_t k = 0; k < K; ++k) {
        const Level l = set.patterns[g * K + k];
        lm += safe_log(prm.m[k][l]);
        lu += safe_log(prm.u[k][l]);
    }
}

void clamp_table(std::vector<std::vector<double>>& table) {
    for (auto& v : table) {
        double sum = 0.0;
        for (double& p : v) sum += (p = std::clamp(p, kFloor, 1.0 - kFloor));
        for (double& p : v) p /= sum;
    }
}

double mean_level(const std::vector<std::vector<double>>& table) {
    double out = 0.0;
    for (const auto& v : table)
        for (std::size_t l = 0; l < v.size(); ++l) out += v[l] * static_cast<double>(l) / static_cast<double>(v.size() - 1);
    return out;
}

}  // namespace

AgreementSet agreement_set(const ComparisonCube& cube) {
    AgreementSet set;
    set.levels = cube.record_level_counts();
    for (std::uint32_t id = 0; id < cube.pattern_count(); ++id) {
        const double n = static_cast<double>(cube.pattern_totals()[id]);
        if (n == 0.0) continue;
        const auto lv = cube.pattern_levels(id);
        set.patterns.insert(set.patterns.end(), lv.begin(), lv.end());
        set.counts.push_back(n);
    }
    return set;
}

AgreementSet joint_agreement_set(const ComparisonCube& cube) {
    AgreementSet set;
    set.levels = cube.block_level_counts();
    const auto& rec = cube.record_level_counts();
    set.levels.insert(set.levels.end(), rec.begin(), rec.end());
    std::map<std::vector<Level>, std::size_t> index;
    std::vector<double> per_id(cube.pattern_count());
    std::vector<Level> key;
    for (std::size_t s = 0; s < cube.S(); ++s)
        for (std::size_t t = 0; t < cube.T(); ++t) {
            if (!cube.block_allowed(s, t)) continue;
            std::fill(per_id.begin(), per_id.end(), 0.0);
            const auto pats = cube.patterns(s, t);
            const auto cand = cube.candidates(s, t);
            for (std::size_t x = 0; x < pats.size(); ++x)
                if (cand.empty() || cand[x]) per_id[pats[x]] += 1.0;
            const auto blk = cube.block_levels(s, t);
            for (std::uint32_t id = 0; id < per_id.size(); ++id) {
                if (per_id[id] == 0.0) continue;
                key.assign(blk.begin(), blk.end());
                const auto lv = cube.pattern_levels(id);
                key.insert(key.end(), lv.begin(), lv.end());
                const auto [it, fresh] = index.try_emplace(key, set.counts.size());
                if (fresh) {
                    set.patterns.insert(set.patterns.end(), key.begin(), key.end());
                    set.counts.push_back(0.0);
                }
                set.counts[it->second] += per_id[id];
            }
        }
    return set;
}

double FellegiSunterParams::log_odds(const AgreementSet& set, std::size_t g) const {
    double out = 0.0;
    const std::size_t K = set.arity();
    for (std::size_t k = 0; k < K; ++k) {
        const Level l = set.patterns[g * K + k];
        out += std::log(m[k][l]) - std::log(u[k][l]);
    }
    return out;
}

FellegiSunterParams default_em_start(const std::vector<int>& levels) {
    FellegiSunterParams prm;
    for (int L : levels) {
        std::vector<double> m(static_cast<std::size_t>(L)), u(static_cast<std::size_t>(L));
        double sm = 0.0, su = 0.0;
        for (int l = 0; l < L; ++l) {
            sm += (m[l] = (l + 1.0) * (l + 1.0));
            su += (u[l] = (L - l) * static_cast<double>(L - l));
        }
        for (int l = 0; l < L; ++l) {
            m[l] /= sm;
            u[l] /= su;
        }
        prm.m.push_back(std::move(m));
        prm.u.push_back(std::move(u));
    }
    prm.match_share = 0.1;
    return prm;
}

double em_log_likelihood(const AgreementSet& set, const FellegiSunterParams& params) {
    double out = 0.0;
    for (std::size_t g = 0; g < set.size(); ++g) {
        double lm = 0.0, lu = 0.0;
        component_logs(set, params, g, lm, lu);
        out += set.counts[g] * log_add(lm, lu);
    }
    return out;
}

EmResult em_mixture(const AgreementSet& set, std::optional<FellegiSunterParams> init, double tol, int max_iter) {
    if (set.size() == 0) throw std::invalid_argument("em_mixture needs at least one pair");
    if (!(tol > 0.0)) throw std::invalid_argument("em_mixture tolerance must be > 0");
    const std::size_t K = set.arity();
    EmResult res;
    res.params = init ? *init : default_em_start(set.levels);

    if (set.size() == 1) {
        // Nothing separates the classes: return both at the observed vector.
        res.degenerate = true;
        for (std::size_t k = 0; k < K; ++k) {
            auto& m = res.params.m[k];
            std::fill(m.begin(), m.end(), 0.0);
            m[set.patterns[k]] = 1.0;
            res.params.u[k] = m;
        }
        clamp_table(res.params.m);
        clamp_table(res.params.u);
        res.params.match_share = std::clamp(res.params.match_share, kFloor, 1.0 - kFloor);
        res.loglik.push_back(em_log_likelihood(set, res.params));
        res.converged = true;
        return res;
    }

    double total = 0.0;
    for (double c : set.counts) total += c;
    std::vector<double> w(set.size());
    res.loglik.push_back(em_log_likelihood(set, res.params));
    for (int it = 0; it < max_iter; ++it) {
        for (std::size_t g = 0; g < set.size(); ++g) {
            double lm = 0.0, lu = 0.0;
            component_logs(set, res.params, g, lm, lu);
            const double norm = log_add(lm, lu);
            w[g] = std::exp(lm - norm);
        }
        FellegiSunterParams next = res.params;
        double wm = 0.0;
        for (std::size_t g = 0; g < set.size(); ++g) wm += set.counts[g] * w[g];
        const double wu = total - wm;
        next.match_share = wm / total;
        for (std::size_t k = 0; k < K; ++k) {
            std::fill(next.m[k].begin(), next.m[k].end(), 0.0);
            std::fill(next.u[k].begin(), next.u[k].end(), 0.0);
            for (std::size_t g = 0; g < set.size(); ++g) {
                const Level l = set.patterns[g * K + k];
                next.m[k][l] += set.counts[g] * w[g];
                next.u[k][l] += set.counts[g] * (1.0 - w[g]);
            }
            // An emptied class keeps its previous distribution.
            if (wm > 0.0)
                for (double& x : next.m[k]) x /= wm;
            else
                next.m[k] = res.params.m[k];
            if (wu > 0.0)
                for (double& x : next.u[k]) x /= wu;
            else
                next.u[k] = res.params.u[k];
        }
        const double ll = em_log_likelihood(set, next);
        const double prev = res.loglik.back();
        res.params = std::move(next);
        res.loglik.push_back(ll);
        res.iterations = it + 1;
        if (std::fabs(ll - prev) <= tol * (1.0 + std::fabs(prev))) {
            res.converged = true;
            break;
        }
    }
    // Keep the label "match" on the component with higher agreement.
    if (mean_level(res.params.m) < mean_level(res.params.u)) {
        std::swap(res.params.m, res.params.u);
        res.params.match_share = 1.0 - res.params.match_share;
    }
    clamp_table(res.params.m);
    clamp_table(res.params.u);
    res.params.match_share = std::clamp(res.params.match_share, kFloor, 1.0 - kFloor);
    return res;
}

}  // namespace reclink
