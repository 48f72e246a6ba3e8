#include "reclink/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "reclink/errors.hpp"

namespace reclink {

namespace {

BlockedFile flatten(const BlockedFile& f, std::vector<std::pair<int, int>>& index) {
    BlockedFile out;
    out.file_id = f.file_id;
    out.extra_columns = f.extra_columns;
    Block giant;
    giant.id = "all";
    for (std::size_t b = 0; b < f.blocks.size(); ++b) {
        const auto& blk = f.blocks[b];
        for (std::size_t r = 0; r < blk.records.size(); ++r) {
            Record rec = blk.records[r];
            rec.values.insert(rec.values.end(), blk.values.begin(), blk.values.end());
            giant.records.push_back(std::move(rec));
            index.emplace_back(static_cast<int>(b), static_cast<int>(r));
        }
    }
    out.blocks.push_back(std::move(giant));
    return out;
}

}  // namespace

FlatProblem prepare_flat_problem(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                 std::size_t pair_cap, unsigned threads) {
    schema.validate();
    f1.validate(schema.block.size(), schema.record.size());
    f2.validate(schema.block.size(), schema.record.size());
    const std::size_t n1 = f1.record_count(), n2 = f2.record_count();
    if (n1 * n2 > pair_cap)
        throw ResourceError("unblocked comparison space has " + std::to_string(n1 * n2) +
                            " record pairs, above the cap of " + std::to_string(pair_cap));
    FlatProblem p;
    ComparisonSchema flat;
    flat.record = schema.record;
    flat.record.insert(flat.record.end(), schema.block.begin(), schema.block.end());
    const BlockedFile g1 = flatten(f1, p.file1_index);
    const BlockedFile g2 = flatten(f2, p.file2_index);
    p.cube = build_comparison_cube(g1, g2, flat, threads);
    return p;
}

ChainDiagnostics run_brl(const FlatProblem& problem, const Hyperparams& hyper, const ChainConfig& chain,
                         const SampleSink& sink) {
    chain.validate();
    const ComparisonCube& cube = problem.cube;
    hyper.validate(cube);
    ChainDiagnostics diag;
    diag.candidate_pairs = cube.candidate_pair_count();
    diag.missing_counts = cube.missing_counts();

    const BlockAssignment b({0}, 1);
    LinkageState c;
    c.pairs.emplace_back(cube.rows(0), cube.cols(0));
    ModelParams theta = chain.fixed_params ? *chain.fixed_params : ModelParams::uniform(cube);
    LikelihoodTables tables;
    double loglik = 0.0;
    std::uint64_t since_check = 0;
    const int burn = chain.effective_burn_in();

    for (int v = 1; v <= chain.iterations; ++v) {
        const auto iter = static_cast<std::uint64_t>(v);
        if (!chain.fixed_params) {
            Rng rr = make_stream(chain.seed, {stream::kRecordParams, iter});
            sample_record_parameters(b, c, cube, hyper, rr, theta);
            if (!theta.valid()) diag.degenerate_params = true;
        }
        if (!chain.fixed_params || v == 1) {
            tables = LikelihoodTables::build(theta, cube, false, true);
            loglik = tables.total(cube, b, c);
        }
        Rng rs = make_stream(chain.seed, {stream::kSweep, iter, 0, 0});
        std::uint64_t changes = 0;
        loglik += sweep_record_links(0, 0, c.pairs[0], tables, cube, hyper.alpha_pi, hyper.beta_pi, rs,
                                     chain.brl_sweeps, &diag.record_updates, &changes);
        diag.record_changes += changes;
        since_check += changes;
        if (chain.drift_check_interval > 0 && since_check >= chain.drift_check_interval) {
            const double exact = log_joint_likelihood(b, c, theta, cube);
            diag.max_drift = std::max(diag.max_drift, std::fabs(exact - loglik));
            ++diag.drift_checks;
            since_check = 0;
        }
        diag.loglik_trace.push_back(loglik);
        if (v > burn && (v - burn) % chain.thin == 0 && sink) {
            PosteriorSample out;
            out.iteration = v;
            out.blocked = false;
            out.params = theta;
            out.log_likelihood = loglik;
            const auto& m = c.pairs[0];
            for (std::size_t i = 0; i < m.rows(); ++i) {
                if (m.row_link[i] < 0) continue;
                const auto [s, ri] = problem.file1_index[i];
                const auto [t, rj] = problem.file2_index[static_cast<std::size_t>(m.row_link[i])];
                out.links.push_back({s, t, ri, rj});
            }
            std::sort(out.links.begin(), out.links.end());
            sink(out);
        }
    }
    return diag;
}

ChainDiagnostics run_brl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                         const HyperSpec& hyper, const ChainConfig& chain, const SampleSink& sink) {
    chain.validate();
    const FlatProblem problem = prepare_flat_problem(f1, f2, schema, chain.brl_pair_cap, chain.threads);
    const Hyperparams h = Hyperparams::flat(problem.cube, hyper.concentration, hyper.alpha_pi, hyper.beta_pi);
    return run_brl(problem, h, chain, sink);
}

std::vector<PosteriorSample> run_brl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                     const HyperSpec& hyper, const ChainConfig& chain) {
    std::vector<PosteriorSample> out;
    run_brl(f1, f2, schema, hyper, chain, [&](const PosteriorSample& s) { out.push_back(s); });
    return out;
}

ChainDiagnostics run_cibrl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                           const HyperSpec& hyper, const ChainConfig& chain, const SampleSink& sink) {
    chain.validate();
    const LinkageProblem problem = prepare_problem(f1, f2, schema, chain.threads);
    const Hyperparams h = Hyperparams::flat(problem.cube, hyper.concentration, hyper.alpha_pi, hyper.beta_pi);
    return run_blocked_chain(problem, h, chain, BlockedMethod::cibrl, sink);
}

std::vector<PosteriorSample> run_cibrl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                       const HyperSpec& hyper, const ChainConfig& chain) {
    std::vector<PosteriorSample> out;
    run_cibrl(f1, f2, schema, hyper, chain, [&](const PosteriorSample& s) { out.push_back(s); });
    return out;
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::mlbrl: return "mlbrl";
        case Method::cibrl: return "cibrl";
        case Method::brl: return "brl";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    if (text == "mlbrl") return Method::mlbrl;
    if (text == "cibrl") return Method::cibrl;
    if (text == "brl") return Method::brl;
    throw ValidationError("unknown method '" + std::string(text) + "' (expected mlbrl, cibrl or brl)");
}

ChainDiagnostics run_linkage(Method method, const BlockedFile& f1, const BlockedFile& f2,
                             const ComparisonSchema& schema, const HyperSpec& hyper, const ChainConfig& chain,
                             const SampleSink& sink) {
    switch (method) {
        case Method::mlbrl: return run_mlbrl(f1, f2, schema, hyper, chain, sink);
        case Method::cibrl: return run_cibrl(f1, f2, schema, hyper, chain, sink);
        case Method::brl: return run_brl(f1, f2, schema, hyper, chain, sink);
    }
    throw ValidationError("unknown method");
}

}  // namespace reclink
