#include "reclink/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "reclink/assignment.hpp"
#include "reclink/errors.hpp"
#include "reclink/parallel.hpp"

namespace reclink {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Unnormalized log weight of "no link" relative to a link ratio of 1, given
// `links` links among the other rows.
double log_no_link_weight(std::size_t rows, std::size_t cols, int links, double alpha_pi, double beta_pi) {
    const double lo = static_cast<double>(std::min(rows, cols));
    const double hi = static_cast<double>(std::max(rows, cols));
    const double nm = links;
    return std::log(hi - nm) + std::log(lo - nm + beta_pi - 1.0) - std::log(nm + alpha_pi);
}

bool matching_allowed(const ComparisonCube& cube, std::size_t s, std::size_t t, const PairMatching& m) {
    if (!cube.has_record_mask()) return true;
    for (std::size_t i = 0; i < m.rows(); ++i)
        if (m.row_link[i] >= 0 && !cube.candidate(s, t, i, static_cast<std::size_t>(m.row_link[i]))) return false;
    return true;
}

}  // namespace

void ChainConfig::validate() const {
    if (iterations < 1) throw ValidationError("iterations must be >= 1");
    const int burn = effective_burn_in();
    if (burn < 0 || burn >= iterations) throw ValidationError("burn-in must lie in [0, iterations)");
    if (sweeps < 1 || brl_sweeps < 1) throw ValidationError("sweeps must be >= 1");
    if (thin < 1) throw ValidationError("thin must be >= 1");
    if (!(pool_weight >= 0.0 && pool_weight <= 1.0)) throw ValidationError("pool_weight must lie in [0, 1]");
    if (fixed_params && !fixed_params->valid()) throw ValidationError("fixed parameters are not valid distributions");
}

std::vector<int> PosteriorSample::pair_link_counts() const {
    std::vector<int> out(blocks.size(), 0);
    if (!blocked) return out;
    for (const auto& l : links) ++out[static_cast<std::size_t>(l.s)];
    return out;
}

nlohmann::json ChainDiagnostics::to_json() const {
    auto rate = [](std::uint64_t a, std::uint64_t p) { return p == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(p); };
    return {{"block_proposals", block_proposals},
            {"block_accepts", block_accepts},
            {"acceptance_rate_type1", rate(block_accepts[0], block_proposals[0])},
            {"acceptance_rate_type2", rate(block_accepts[1], block_proposals[1])},
            {"masked_rejections", masked_rejections},
            {"record_updates", record_updates},
            {"record_changes", record_changes},
            {"drift_checks", drift_checks},
            {"max_drift", max_drift},
            {"loglik_trace", loglik_trace},
            {"swapped_orientation", swapped},
            {"candidate_pairs", candidate_pairs},
            {"missing_counts", missing_counts},
            {"em_iterations", em_iterations},
            {"em_degenerate", em_degenerate},
            {"degenerate_params", degenerate_params}};
}

ProposalPool build_proposal_pool(const ComparisonCube& cube, unsigned threads, EmResult* em_out) {
    ProposalPool pool;
    pool.S = cube.S();
    pool.T = cube.T();
    pool.entries.resize(pool.S * pool.T);

    // Block levels enter the fit alongside record levels; the record-level
    // mixture alone is not identified with few linking variables.
    const std::size_t P = cube.P(), K = cube.K();
    std::vector<double> record_weight(cube.pattern_count(), 0.0);
    std::vector<std::vector<double>> block_weight(P);
    if (cube.total_record_pairs() > 0) {
        const AgreementSet set = joint_agreement_set(cube);
        EmResult em = em_mixture(set);
        const auto& prm = em.params;
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t l = 0; l < prm.m[p].size(); ++l)
                block_weight[p].push_back(std::log(prm.m[p][l]) - std::log(prm.u[p][l]));
        for (std::uint32_t id = 0; id < cube.pattern_count(); ++id) {
            const auto lv = cube.pattern_levels(id);
            for (std::size_t k = 0; k < K; ++k)
                record_weight[id] += std::log(prm.m[P + k][lv[k]]) - std::log(prm.u[P + k][lv[k]]);
        }
        if (em_out) *em_out = std::move(em);
    }

    parallel_for(pool.S * pool.T, threads, [&](std::size_t pair) {
        const std::size_t s = pair / pool.T, t = pair % pool.T;
        const std::size_t n1 = cube.rows(s), n2 = cube.cols(t);
        const auto pats = cube.patterns(s, t);
        const auto cand = cube.candidates(s, t);
        PairMatching m(n1, n2);
        if (!cube.block_allowed(s, t)) {
            pool.entries[pair] = std::move(m);
            return;
        }
        double base = 0.0;
        const auto blk = cube.block_levels(s, t);
        for (std::size_t p = 0; p < P && !block_weight[p].empty(); ++p) base += block_weight[p][blk[p]];
        std::vector<double> w(n1 * n2);
        for (std::size_t x = 0; x < w.size(); ++x)
            w[x] = (cand.empty() || cand[x]) ? std::max(0.0, base + record_weight[pats[x]]) : 0.0;
        const auto rows = solve_assignment(w, n1, n2);
        for (std::size_t i = 0; i < n1; ++i)
            if (rows[i] >= 0 && w[i * n2 + static_cast<std::size_t>(rows[i])] > 0.0)
                m.link(i, static_cast<std::size_t>(rows[i]));
        pool.entries[pair] = std::move(m);
    });
    return pool;
}

LikelihoodTables LikelihoodTables::build(const ModelParams& theta, const ComparisonCube& cube, bool block_terms,
                                         bool record_terms) {
    LikelihoodTables tab;
    tab.record_terms = record_terms;
    const std::size_t K = cube.K(), P = cube.P();
    const auto lbm = theta.block_match.logs(), lbu = theta.block_nonmatch.logs();
    const auto lcm = theta.record_match.logs(), lcu = theta.record_nonmatch.logs(),
               lcnb = theta.record_nonblock.logs();

    tab.link_log_ratio.assign(cube.pattern_count(), 0.0);
    if (record_terms) {
        for (std::uint32_t id = 0; id < cube.pattern_count(); ++id) {
            const auto lv = cube.pattern_levels(id);
            double lr = 0.0;
            for (std::size_t k = 0; k < K; ++k) lr += lcm[k][lv[k]] - lcu[k][lv[k]];
            tab.link_log_ratio[id] = lr;
        }
    }
    tab.max_log_ratio = tab.link_log_ratio.empty()
                            ? 0.0
                            : *std::max_element(tab.link_log_ratio.begin(), tab.link_log_ratio.end());
    tab.link_weight.resize(tab.link_log_ratio.size());
    for (std::size_t id = 0; id < tab.link_weight.size(); ++id)
        tab.link_weight[id] = std::exp(tab.link_log_ratio[id] - tab.max_log_ratio);

    std::vector<double> flat_cu(cube.total_levels()), flat_cnb(cube.total_levels());
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < lcu[k].size(); ++l) {
            flat_cu[cube.level_offset(k) + l] = lcu[k][l];
            flat_cnb[cube.level_offset(k) + l] = lcnb[k][l];
        }

    const std::size_t npairs = cube.S() * cube.T();
    tab.linked_base.assign(npairs, 0.0);
    tab.unlinked.assign(npairs, 0.0);
    CompensatedSum total;
    for (std::size_t s = 0; s < cube.S(); ++s) {
        for (std::size_t t = 0; t < cube.T(); ++t) {
            const std::size_t pair = cube.pair_index(s, t);
            double bm = 0.0, bu = 0.0, cu = 0.0, cnb = 0.0;
            if (block_terms) {
                const auto lv = cube.block_levels(s, t);
                for (std::size_t p = 0; p < P; ++p) {
                    bm += lbm[p][lv[p]];
                    bu += lbu[p][lv[p]];
                }
            }
            if (record_terms) {
                const auto h = cube.level_histogram(s, t);
                for (std::size_t x = 0; x < h.size(); ++x) {
                    if (h[x] == 0) continue;
                    cu += static_cast<double>(h[x]) * flat_cu[x];
                    cnb += static_cast<double>(h[x]) * flat_cnb[x];
                }
            }
            tab.linked_base[pair] = bm + cu;
            tab.unlinked[pair] = bu + cnb;
            total.add(tab.unlinked[pair]);
        }
    }
    tab.unlinked_total = total.value();
    return tab;
}

double LikelihoodTables::linked(const ComparisonCube& cube, std::size_t s, std::size_t t,
                                const PairMatching& m) const {
    double out = linked_base[cube.pair_index(s, t)];
    if (!record_terms || m.links == 0) return out;
    const auto pats = cube.patterns(s, t);
    const std::size_t n2 = cube.cols(t);
    for (std::size_t i = 0; i < m.rows(); ++i)
        if (m.row_link[i] >= 0) out += link_log_ratio[pats[i * n2 + static_cast<std::size_t>(m.row_link[i])]];
    return out;
}

double LikelihoodTables::total(const ComparisonCube& cube, const BlockAssignment& b, const LinkageState& c) const {
    CompensatedSum sum;
    sum.add(unlinked_total);
    for (std::size_t s = 0; s < b.S(); ++s) {
        const auto t = static_cast<std::size_t>(b.target[s]);
        sum.add(linked(cube, s, t, c.pairs[s]) - unlinked[cube.pair_index(s, t)]);
    }
    return sum.value();
}

std::vector<double> record_full_conditional(std::size_t i, const PairMatching& c_minus_i, std::size_t s,
                                            std::size_t t, const ModelParams& theta, double alpha_pi,
                                            double beta_pi, const ComparisonCube& cube) {
    PairMatching m = c_minus_i;
    m.unlink_row(i);
    const std::size_t n2 = m.cols();
    std::vector<double> logw(n2 + 1, kNegInf);
    bool any = false;
    for (std::size_t j = 0; j < n2; ++j) {
        if (m.col_link[j] >= 0 || !cube.candidate(s, t, i, j)) continue;
        const auto lv = cube.record_levels(s, t, i, j);
        logw[j] = log_component_density(lv, theta.record_match) - log_component_density(lv, theta.record_nonmatch);
        any = true;
    }
    std::vector<double> out(n2 + 1, 0.0);
    if (!any) {
        out[n2] = 1.0;
        return out;
    }
    logw[n2] = log_no_link_weight(m.rows(), n2, m.links, alpha_pi, beta_pi);
    double norm = kNegInf;
    for (double lw : logw) norm = log_add(norm, lw);
    for (std::size_t x = 0; x <= n2; ++x) out[x] = logw[x] == kNegInf ? 0.0 : std::exp(logw[x] - norm);
    return out;
}

double sweep_record_links(std::size_t s, std::size_t t, PairMatching& c, const LikelihoodTables& tables,
                          const ComparisonCube& cube, double alpha_pi, double beta_pi, Rng& rng, int sweeps,
                          std::uint64_t* updates, std::uint64_t* changes) {
    const std::size_t n1 = c.rows(), n2 = c.cols();
    const auto pats = cube.patterns(s, t);
    const auto cand = cube.candidates(s, t);
    const std::size_t lo = std::min(n1, n2);
    // Prior part of the no-link weight for every possible link count.
    std::vector<double> log_no_link(lo, 0.0);
    for (std::size_t nm = 0; nm < lo; ++nm)
        log_no_link[nm] = log_no_link_weight(n1, n2, static_cast<int>(nm), alpha_pi, beta_pi);
    std::vector<double> cum(n2);
    double delta = 0.0;
    std::uint64_t n_updates = 0, n_changes = 0;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (std::size_t i = 0; i < n1; ++i) {
            const int old_j = c.row_link[i];
            const std::size_t row = i * n2;
            if (old_j >= 0) {
                delta -= tables.link_log_ratio[pats[row + static_cast<std::size_t>(old_j)]];
                c.unlink_row(i);
            }
            double total = 0.0;
            bool any = false;
            for (std::size_t j = 0; j < n2; ++j) {
                if (c.col_link[j] < 0 && (cand.empty() || cand[row + j])) {
                    total += tables.link_weight[pats[row + j]];
                    any = true;
                }
                cum[j] = total;
            }
            int new_j = -1;
            if (any) {
                const double lnl = log_no_link[static_cast<std::size_t>(c.links)];
                const double shift = std::max(tables.max_log_ratio, lnl);
                const double link_mass = total * std::exp(tables.max_log_ratio - shift);
                const double no_link = std::exp(lnl - shift);
                const double u = uniform01(rng) * (link_mass + no_link);
                if (u < link_mass) {
                    const double target = u / std::exp(tables.max_log_ratio - shift);
                    auto it = std::upper_bound(cum.begin(), cum.end(), target);
                    std::size_t j = it == cum.end() ? n2 - 1 : static_cast<std::size_t>(it - cum.begin());
                    // Land on a free candidate even under rounding at the boundary.
                    while (j > 0 && !(c.col_link[j] < 0 && (cand.empty() || cand[row + j]))) --j;
                    while (j < n2 && !(c.col_link[j] < 0 && (cand.empty() || cand[row + j]))) ++j;
                    if (j < n2) new_j = static_cast<int>(j);
                }
            }
            if (new_j >= 0) {
                c.link(i, static_cast<std::size_t>(new_j));
                delta += tables.link_log_ratio[pats[row + static_cast<std::size_t>(new_j)]];
            }
            ++n_updates;
            if (new_j != old_j) ++n_changes;
        }
    }
    if (updates) *updates += n_updates;
    if (changes) *changes += n_changes;
    return delta;
}

PairMatching sample_prior_matching(std::size_t n1, std::size_t n2, double alpha_pi, double beta_pi, Rng& rng) {
    const double x = std::gamma_distribution<double>(alpha_pi, 1.0)(rng);
    const double y = std::gamma_distribution<double>(beta_pi, 1.0)(rng);
    const double pi = (x + y) > 0.0 ? x / (x + y) : 0.5;
    const std::size_t lo = std::min(n1, n2);
    const auto nm = static_cast<std::size_t>(
        std::binomial_distribution<long long>(static_cast<long long>(lo), pi)(rng));
    std::vector<std::size_t> rows(n1), cols(n2);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    for (std::size_t k = 0; k < nm; ++k) {
        std::swap(rows[k], rows[k + uniform_index(rng, n1 - k)]);
        std::swap(cols[k], cols[k + uniform_index(rng, n2 - k)]);
    }
    PairMatching m(n1, n2);
    for (std::size_t k = 0; k < nm; ++k) m.link(rows[k], cols[k]);
    return m;
}

namespace {

struct Proposal {
    PairMatching matching;
    double log_q_new = 0.0;  // hastings only
    bool masked = false;
};

double log_proposal_density(const PairMatching& m, const PairMatching& pool_entry, double weight, double alpha_pi,
                            double beta_pi) {
    const double lp = weight < 1.0 ? std::log1p(-weight) + log_prior_linkage(m.links, m.rows(), m.cols(), alpha_pi, beta_pi)
                                   : kNegInf;
    if (weight > 0.0 && m == pool_entry) return log_add(std::log(weight), lp);
    return lp;
}

Proposal propose_matching(std::size_t s, std::size_t t, const ProposalPool& pool, const ComparisonCube& cube,
                          double alpha_pi, double beta_pi, const BlockMoveOptions& opts, Rng& rng) {
    Proposal out;
    const PairMatching& entry = pool.at(s, t);
    if (opts.rule == BlockMoveRule::pool || !opts.record_level) {
        out.matching = entry;
        return out;
    }
    if (uniform01(rng) < opts.pool_weight) {
        out.matching = entry;
    } else {
        out.matching = sample_prior_matching(cube.rows(s), cube.cols(t), alpha_pi, beta_pi, rng);
        out.masked = !matching_allowed(cube, s, t, out.matching);
    }
    out.log_q_new = log_proposal_density(out.matching, entry, opts.pool_weight, alpha_pi, beta_pi);
    return out;
}

}  // namespace

BlockMoveResult mh_block_move(std::size_t s, BlockAssignment& b, LinkageState& c, const ProposalPool& pool,
                              const LikelihoodTables& tables, const ComparisonCube& cube, double alpha_pi,
                              double beta_pi, const BlockMoveOptions& opts, Rng& rng) {
    BlockMoveResult res;
    const std::size_t T = b.T();
    if (T < 2) return res;
    const auto t = static_cast<std::size_t>(b.target[s]);
    std::size_t r = uniform_index(rng, T - 1);
    if (r >= t) ++r;
    const int q_raw = b.source[r];
    res.move_type = q_raw < 0 ? 1 : 2;
    const auto q = static_cast<std::size_t>(std::max(q_raw, 0));

    // Draw from the stream in the same order whatever the outcome.
    const double u = uniform01(rng);
    if (!cube.block_allowed(s, r) || (res.move_type == 2 && !cube.block_allowed(q, t))) {
        res.masked = true;
        return res;
    }

    auto pair_term = [&](std::size_t a, std::size_t bb, const PairMatching& m, double& lik) {
        const double l = tables.linked(cube, a, bb, m) - tables.unlinked[cube.pair_index(a, bb)];
        lik += l;
        return opts.record_level ? l + log_prior_linkage(m.links, m.rows(), m.cols(), alpha_pi, beta_pi) : l;
    };

    const bool hastings = opts.record_level && opts.rule == BlockMoveRule::hastings;
    double old_lik = 0.0, new_lik = 0.0;
    double log_ratio = -pair_term(s, t, c.pairs[s], old_lik);
    if (hastings) log_ratio += log_proposal_density(c.pairs[s], pool.at(s, t), opts.pool_weight, alpha_pi, beta_pi);

    Proposal ps = propose_matching(s, r, pool, cube, alpha_pi, beta_pi, opts, rng);
    Proposal pq;
    if (res.move_type == 2) {
        log_ratio -= pair_term(q, r, c.pairs[q], old_lik);
        if (hastings) log_ratio += log_proposal_density(c.pairs[q], pool.at(q, r), opts.pool_weight, alpha_pi, beta_pi);
        pq = propose_matching(q, t, pool, cube, alpha_pi, beta_pi, opts, rng);
    }
    if (ps.masked || pq.masked) {
        res.masked = true;
        return res;
    }
    log_ratio += pair_term(s, r, ps.matching, new_lik);
    if (hastings) log_ratio -= ps.log_q_new;
    if (res.move_type == 2) {
        log_ratio += pair_term(q, t, pq.matching, new_lik);
        if (hastings) log_ratio -= pq.log_q_new;
    }
    res.log_ratio = log_ratio;
    if (!(std::log(u) < log_ratio)) return res;

    res.accepted = true;
    res.delta_loglik = new_lik - old_lik;
    b.target[s] = static_cast<int>(r);
    b.source[r] = static_cast<int>(s);
    c.pairs[s] = std::move(ps.matching);
    if (res.move_type == 1) {
        b.source[t] = -1;
    } else {
        b.target[q] = static_cast<int>(t);
        b.source[t] = static_cast<int>(q);
        c.pairs[q] = std::move(pq.matching);
    }
    return res;
}

LinkageProblem prepare_problem(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                               unsigned threads) {
    LinkageProblem p;
    p.swapped = f1.blocks.size() > f2.blocks.size();
    p.cube = p.swapped ? build_comparison_cube(f2, f1, schema, threads) : build_comparison_cube(f1, f2, schema, threads);
    return p;
}

namespace {

BlockAssignment initial_assignment(const ComparisonCube& cube, Rng& rng) {
    const std::size_t S = cube.S(), T = cube.T();
    std::vector<int> perm(T);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    if (!cube.has_block_mask()) return BlockAssignment(std::vector<int>(perm.begin(), perm.begin() + static_cast<long>(S)), T);
    // Random feasible assignment: maximize allowed pairs with a random tie-break.
    std::vector<double> w(S * T);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t t = 0; t < T; ++t) w[s * T + t] = cube.block_allowed(s, t) ? 1.0 + 0.5 * uniform01(rng) : -1e6;
    const auto rows = solve_assignment(w, S, T);
    for (std::size_t s = 0; s < S; ++s)
        if (!cube.block_allowed(s, static_cast<std::size_t>(rows[s])))
            throw ValidationError("forced block variables leave no feasible block assignment");
    return BlockAssignment(rows, T);
}

PosteriorSample emit_sample(const ComparisonCube& cube, bool swapped, const BlockAssignment& b, const LinkageState& c,
                            const ModelParams& theta, int iteration, double loglik) {
    PosteriorSample out;
    out.iteration = iteration;
    out.params = theta;
    out.log_likelihood = loglik;
    if (!swapped) {
        out.blocks = b.target;
    } else {
        out.blocks = b.source;
    }
    for (std::size_t s = 0; s < b.S(); ++s) {
        const int t = b.target[s];
        const auto& m = c.pairs[s];
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (m.row_link[i] < 0) continue;
            if (!swapped)
                out.links.push_back({static_cast<int>(s), t, static_cast<int>(i), m.row_link[i]});
            else
                out.links.push_back({t, static_cast<int>(s), m.row_link[i], static_cast<int>(i)});
        }
    }
    std::sort(out.links.begin(), out.links.end());
    (void)cube;
    return out;
}

}  // namespace

ChainDiagnostics run_blocked_chain(const LinkageProblem& problem, const Hyperparams& hyper, const ChainConfig& chain,
                                   BlockedMethod method, const SampleSink& sink, std::optional<ProposalPool> pool_in) {
    chain.validate();
    const ComparisonCube& cube = problem.cube;
    hyper.validate(cube);
    const std::size_t S = cube.S();
    if (S > cube.T()) throw ValidationError("file 1 must not have more blocks than file 2 after orientation");

    ChainDiagnostics diag;
    diag.swapped = problem.swapped;
    diag.candidate_pairs = cube.candidate_pair_count();
    diag.missing_counts = cube.missing_counts();

    ProposalPool pool;
    if (pool_in) {
        pool = std::move(*pool_in);
    } else {
        EmResult em;
        pool = build_proposal_pool(cube, chain.threads, &em);
        diag.em_iterations = em.iterations;
        diag.em_degenerate = em.degenerate;
    }
    pool.adaptive = chain.adaptive_pool;

    Rng init = make_stream(chain.seed, {stream::kInit});
    BlockAssignment b = initial_assignment(cube, init);
    LinkageState c;
    c.pairs.resize(S);
    for (std::size_t s = 0; s < S; ++s) c.pairs[s] = pool.at(s, static_cast<std::size_t>(b.target[s]));

    ModelParams theta = chain.fixed_params ? *chain.fixed_params : ModelParams::uniform(cube);
    const int burn = chain.effective_burn_in();
    const double a = hyper.alpha_pi, be = hyper.beta_pi;
    BlockMoveOptions joint_opts{chain.block_move_rule, chain.pool_weight, true};
    BlockMoveOptions block_only_opts{BlockMoveRule::pool, chain.pool_weight, false};

    LikelihoodTables tables, block_tables;
    double loglik = 0.0;
    std::uint64_t since_check = 0;
    std::vector<double> deltas(S);
    std::vector<std::uint64_t> upd(S), chg(S);

    for (int v = 1; v <= chain.iterations; ++v) {
        const auto iter = static_cast<std::uint64_t>(v);
        const bool redraw = !chain.fixed_params;
        if (redraw) {
            Rng rb = make_stream(chain.seed, {stream::kBlockParams, iter});
            sample_block_parameters(b, cube, hyper, rb, theta);
            Rng rr = make_stream(chain.seed, {stream::kRecordParams, iter});
            sample_record_parameters(b, c, cube, hyper, rr, theta);
            if (!theta.valid()) diag.degenerate_params = true;
        }
        if (redraw || v == 1) {
            tables = LikelihoodTables::build(theta, cube);
            if (method == BlockedMethod::cibrl) block_tables = LikelihoodTables::build(theta, cube, true, false);
            loglik = tables.total(cube, b, c);
        }

        auto block_moves = [&](const LikelihoodTables& tab, const BlockMoveOptions& opts) {
            Rng rm = make_stream(chain.seed, {stream::kBlockMove, iter});
            for (std::size_t s = 0; s < S; ++s) {
                const auto res = mh_block_move(s, b, c, pool, tab, cube, a, be, opts, rm);
                ++diag.block_proposals[res.move_type - 1];
                if (res.masked) ++diag.masked_rejections;
                if (!res.accepted) continue;
                ++diag.block_accepts[res.move_type - 1];
                loglik += res.delta_loglik;
                ++since_check;
            }
        };
        auto sweeps = [&] {
            parallel_for(S, chain.threads, [&](std::size_t s) {
                const auto t = static_cast<std::size_t>(b.target[s]);
                Rng rs = make_stream(chain.seed, {stream::kSweep, iter, s, t});
                upd[s] = chg[s] = 0;
                deltas[s] = sweep_record_links(s, t, c.pairs[s], tables, cube, a, be, rs, chain.sweeps, &upd[s], &chg[s]);
            });
            for (std::size_t s = 0; s < S; ++s) {
                loglik += deltas[s];
                diag.record_updates += upd[s];
                diag.record_changes += chg[s];
                since_check += chg[s];
            }
        };
        auto adapt_pool = [&] {
            if (!pool.adaptive || v <= burn) return;
            for (std::size_t s = 0; s < S; ++s) pool.at(s, static_cast<std::size_t>(b.target[s])) = c.pairs[s];
        };

        if (method == BlockedMethod::mlbrl) {
            sweeps();
            adapt_pool();
            block_moves(tables, joint_opts);
        } else {
            block_moves(block_tables, block_only_opts);
            // Block-only deltas do not track the record terms.
            loglik = tables.total(cube, b, c);
            sweeps();
            adapt_pool();
        }

        if (chain.drift_check_interval > 0 && since_check >= chain.drift_check_interval) {
            const double exact = log_joint_likelihood(b, c, theta, cube);
            diag.max_drift = std::max(diag.max_drift, std::fabs(exact - loglik));
            ++diag.drift_checks;
            since_check = 0;
        }
        diag.loglik_trace.push_back(loglik);
        if (v > burn && (v - burn) % chain.thin == 0 && sink)
            sink(emit_sample(cube, problem.swapped, b, c, theta, v, loglik));
    }
    return diag;
}

ChainDiagnostics run_mlbrl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                           const HyperSpec& hyper, const ChainConfig& chain, const SampleSink& sink) {
    chain.validate();
    const LinkageProblem problem = prepare_problem(f1, f2, schema, chain.threads);
    const Hyperparams h = Hyperparams::flat(problem.cube, hyper.concentration, hyper.alpha_pi, hyper.beta_pi);
    return run_blocked_chain(problem, h, chain, BlockedMethod::mlbrl, sink);
}

std::vector<PosteriorSample> run_mlbrl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                       const HyperSpec& hyper, const ChainConfig& chain) {
    std::vector<PosteriorSample> out;
    run_mlbrl(f1, f2, schema, hyper, chain, [&](const PosteriorSample& s) { out.push_back(s); });
    return out;
}

}  // namespace reclink
