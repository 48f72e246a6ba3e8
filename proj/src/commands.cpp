#include "reclink/commands.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "reclink/errors.hpp"
#include "reclink/io.hpp"
#include "reclink/mi_analysis.hpp"
#include "reclink/parallel.hpp"

namespace reclink {

namespace {

constexpr const char* kVersion = "1.0.0";

void prepare_output_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ResourceError("cannot create output directory '" + dir.string() + "'");
}

nlohmann::json manifest(const RunConfig& cfg, const std::string& command) {
    return {{"command", command},
            {"version", kVersion},
            {"seed", cfg.seed},
            {"config_hash", config_hash(cfg)},
            {"config", cfg.to_json()}};
}

std::string fmt(double x) {
    if (std::isnan(x)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

void mean_sd(const std::vector<double>& x, double& mean, double& sd) {
    mean = x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
}

// Locates a named analysis column among the extras, record values and block
// values of one file.
struct ColumnRef {
    enum Where { none, extra, record, block } where = none;
    std::size_t index = 0;
};

ColumnRef find_column(const std::string& name, const BlockedFile& f, const ComparisonSchema& schema) {
    for (std::size_t c = 0; c < f.extra_columns.size(); ++c)
        if (f.extra_columns[c] == name) return {ColumnRef::extra, c};
    for (std::size_t c = 0; c < schema.record.size(); ++c)
        if (schema.record[c].name == name) return {ColumnRef::record, c};
    for (std::size_t c = 0; c < schema.block.size(); ++c)
        if (schema.block[c].name == name) return {ColumnRef::block, c};
    return {};
}

double numeric_cell(const std::string& text, const std::string& column) {
    if (text.empty() || text == "NA") return std::nan("");
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError("analysis column '" + column + "' has non-numeric value '" + text + "'");
}

struct Located {
    const Block* block;
    const Record* record;
};

std::unordered_map<std::string, Located> index_records(const BlockedFile& f) {
    std::unordered_map<std::string, Located> out;
    for (const auto& b : f.blocks)
        for (const auto& r : b.records)
            if (!out.emplace(r.id, Located{&b, &r}).second)
                throw ValidationError(f.file_id + ": duplicate record id '" + r.id + "'");
    return out;
}

}  // namespace

RunConfig load_run_config(const fs::path& path) {
    const auto doc = read_json(path);
    // A manifest carries the config it was produced with.
    if (doc.is_object() && doc.contains("config_hash") && doc.contains("config"))
        return RunConfig::from_json(doc["config"]);
    return RunConfig::from_json(doc);
}

void cmd_simulate(const RunConfig& cfg) {
    cfg.simulation.validate();
    Rng data_rng = make_stream(cfg.seed, {stream::kDataset, 0});
    SimulatedData data = generate_dataset(cfg.simulation, data_rng);
    Rng err_rng = make_stream(cfg.seed, {stream::kErrors, 0, 0});
    const BlockedFile f1 = inject_errors(data.f1, data.truth, cfg.simulation.errors, err_rng);
    const ComparisonSchema schema = simulation_schema(cfg.simulation.day_included);

    prepare_output_dir(cfg.output_dir);
    write_blocked_file(cfg.output_dir / "f1.csv", f1, schema);
    write_blocked_file(cfg.output_dir / "f2.csv", data.f2, schema);
    write_schema(cfg.output_dir / "schema.json", schema);
    write_truth(cfg.output_dir / "truth_blocks.csv", cfg.output_dir / "truth_links.csv", data.truth, f1, data.f2);
    auto m = manifest(cfg, "simulate");
    m["file1_records"] = f1.record_count();
    m["file2_records"] = data.f2.record_count();
    m["true_links"] = data.truth.links.size();
    write_text(cfg.output_dir / "manifest.json", m.dump(2) + "\n");
}

int cmd_link(const RunConfig& cfg) {
    cfg.require_files({cfg.file1, cfg.file2, cfg.schema});
    const ComparisonSchema schema = read_schema(cfg.schema);
    const BlockedFile f1 = read_blocked_file(cfg.file1, schema, "file1");
    const BlockedFile f2 = read_blocked_file(cfg.file2, schema, "file2");
    ChainConfig chain = cfg.chain;
    chain.seed = cfg.seed;
    chain.threads = cfg.threads;

    std::ostringstream samples;
    LinkFrequencies freq(f1.blocks.size(), f2.blocks.size());
    const auto diag = run_linkage(cfg.method, f1, f2, schema, cfg.hyper, chain, [&](const PosteriorSample& s) {
        samples << sample_to_json(s, f1, f2, to_string(cfg.method)).dump() << '\n';
        freq.add(s);
    });

    prepare_output_dir(cfg.output_dir);
    write_text(cfg.output_dir / "samples.jsonl", samples.str());
    auto d = diag.to_json();
    d["method"] = std::string(to_string(cfg.method));
    d["samples"] = freq.samples();
    write_text(cfg.output_dir / "diagnostics.json", d.dump(2) + "\n");
    if (cfg.export_matrices) {
        if (cfg.method != Method::brl) freq.write_block_matrix(cfg.output_dir / "block_logprob.csv", f1, f2);
        freq.write_record_matrix(cfg.output_dir / "record_logprob.csv", f1, f2);
    }
    auto m = manifest(cfg, "link");
    m["candidate_pairs"] = diag.candidate_pairs;
    m["samples"] = freq.samples();
    write_text(cfg.output_dir / "manifest.json", m.dump(2) + "\n");
    if (diag.degenerate_params) {
        std::cerr << "parameter draws left the probability simplex; see diagnostics.json\n";
        return kExitNumerical;
    }
    return kExitOk;
}

void cmd_evaluate(const RunConfig& cfg) {
    cfg.require_files({cfg.samples, cfg.truth_blocks, cfg.truth_links});
    const auto samples = read_samples(cfg.samples);
    const IdLinkage truth = read_truth(cfg.truth_blocks, cfg.truth_links);
    std::ostringstream out;
    out << "sample,iteration,tpr,ppv,f1,acc,ppv_degenerate\n";
    std::vector<double> tpr, ppv, f1, acc;
    bool any_acc = false;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = samples[k];
        if (s.blocked && !truth.blocks.empty() && s.blocks.size() != truth.blocks.size())
            throw ValidationError("sample " + std::to_string(k) + " pairs " + std::to_string(s.blocks.size()) +
                                  " blocks but the truth pairs " + std::to_string(truth.blocks.size()));
        const LinkageMetrics m = evaluate_ids(s, truth);
        tpr.push_back(m.tpr);
        ppv.push_back(m.ppv);
        f1.push_back(m.f1);
        if (m.has_acc) {
            acc.push_back(m.acc);
            any_acc = true;
        }
        out << k << ',' << s.iteration << ',' << fmt(m.tpr) << ',' << fmt(m.ppv) << ',' << fmt(m.f1) << ','
            << (m.has_acc ? fmt(m.acc) : "NA") << ',' << (m.ppv_degenerate ? 1 : 0) << '\n';
    }
    double mt, st, mp, sp, mf, sf, ma = 0, sa = 0;
    mean_sd(tpr, mt, st);
    mean_sd(ppv, mp, sp);
    mean_sd(f1, mf, sf);
    if (any_acc) mean_sd(acc, ma, sa);
    out << "mean,," << fmt(mt) << ',' << fmt(mp) << ',' << fmt(mf) << ',' << (any_acc ? fmt(ma) : "NA") << ",\n";
    out << "sd,," << fmt(st) << ',' << fmt(sp) << ',' << fmt(sf) << ',' << (any_acc ? fmt(sa) : "NA") << ",\n";
    prepare_output_dir(cfg.output_dir);
    write_text(cfg.output_dir / "metrics.csv", out.str());
    write_text(cfg.output_dir / "manifest.json", manifest(cfg, "evaluate").dump(2) + "\n");
}

int cmd_analyze(const RunConfig& cfg) {
    cfg.require_files({cfg.file1, cfg.file2, cfg.schema, cfg.samples});
    const auto& spec = cfg.analysis;
    if (spec.exposures.empty()) throw ValidationError("analysis needs at least one exposure");
    if (!(spec.level > 0.0 && spec.level < 1.0)) throw ValidationError("analysis level must lie in (0, 1)");
    const ComparisonSchema schema = read_schema(cfg.schema);
    const BlockedFile f1 = read_blocked_file(cfg.file1, schema, "file1");
    const BlockedFile f2 = read_blocked_file(cfg.file2, schema, "file2");
    const auto samples = read_samples(cfg.samples);
    if (samples.size() < 2) throw ValidationError("analysis needs at least two samples");
    const auto idx1 = index_records(f1), idx2 = index_records(f2);

    // Column order: outcome, exposures, covariates.
    std::vector<std::string> columns{spec.outcome};
    columns.insert(columns.end(), spec.exposures.begin(), spec.exposures.end());
    columns.insert(columns.end(), spec.covariates.begin(), spec.covariates.end());
    struct Source {
        int file;
        ColumnRef ref;
    };
    std::vector<Source> sources;
    for (const auto& c : columns) {
        ColumnRef r = find_column(c, f1, schema);
        int file = 1;
        if (r.where == ColumnRef::none) {
            r = find_column(c, f2, schema);
            file = 2;
        }
        if (r.where == ColumnRef::none) throw ValidationError("analysis column '" + c + "' is in neither file");
        sources.push_back({file, r});
    }
    auto value = [&](const Source& src, const Located& loc, const std::string& name) {
        switch (src.ref.where) {
            case ColumnRef::extra: return numeric_cell(loc.record->extras[src.ref.index], name);
            case ColumnRef::record: return numeric_cell(value_to_string(loc.record->values[src.ref.index]), name);
            case ColumnRef::block: return numeric_cell(value_to_string(loc.block->values[src.ref.index]), name);
            case ColumnRef::none: break;
        }
        return std::nan("");
    };

    const std::size_t m = samples.size(), ne = spec.exposures.size(), p = columns.size();
    std::vector<std::vector<double>> est(ne, std::vector<double>(m)), var(ne, std::vector<double>(m));
    std::vector<double> link_counts(m);
    std::vector<char> separated(m, 0);
    parallel_for(m, cfg.threads, [&](std::size_t k) {
        const auto& s = samples[k];
        link_counts[k] = static_cast<double>(s.links.size());
        std::vector<std::vector<double>> rows;
        for (const auto& [a, b] : s.links) {
            const auto i1 = idx1.find(a);
            const auto i2 = idx2.find(b);
            if (i1 == idx1.end() || i2 == idx2.end())
                throw ValidationError("sample links unknown record pair (" + a + ", " + b + ")");
            std::vector<double> row(p);
            bool complete = true;
            for (std::size_t c = 0; c < p; ++c) {
                row[c] = value(sources[c], sources[c].file == 1 ? i1->second : i2->second, columns[c]);
                complete = complete && !std::isnan(row[c]);
            }
            if (complete) rows.push_back(std::move(row));
        }
        if (rows.size() <= p)
            throw NumericalError("sample " + std::to_string(k) + " has " + std::to_string(rows.size()) +
                                 " complete linked rows for " + std::to_string(p) + " coefficients");
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto ri = static_cast<Eigen::Index>(r);
            y(ri) = rows[r][0];
            x(ri, 0) = 1.0;
            for (std::size_t c = 1; c < p; ++c) x(ri, static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        const LogisticFit fit = fit_logistic(x, y);
        separated[k] = fit.separation;
        for (std::size_t e = 0; e < ne; ++e) {
            const auto c = static_cast<Eigen::Index>(1 + e);
            est[e][k] = fit.coef(c);
            var[e][k] = fit.cov(c, c);
        }
    });

    std::ostringstream out;
    out << "term,estimate,odds_ratio,se,ci_low,ci_high,or_ci_low,or_ci_high,df,m,ubar,b,t,df_capped,separated\n";
    const auto n_sep = static_cast<std::size_t>(std::count(separated.begin(), separated.end(), 1));
    for (std::size_t e = 0; e < ne; ++e) {
        const MIEstimate r = rubin_combine(est[e], var[e], spec.level);
        out << spec.exposures[e] << ',' << fmt(r.qbar) << ',' << fmt(std::exp(r.qbar)) << ',' << fmt(std::sqrt(r.t))
            << ',' << fmt(r.ci_low) << ',' << fmt(r.ci_high) << ',' << fmt(std::exp(r.ci_low)) << ','
            << fmt(std::exp(r.ci_high)) << ',' << fmt(r.df) << ',' << r.m << ',' << fmt(r.ubar) << ',' << fmt(r.b)
            << ',' << fmt(r.t) << ',' << (r.df_capped ? 1 : 0) << ',' << n_sep << '\n';
    }
    // A link count has no within-imputation variance.
    const MIEstimate n = rubin_combine(link_counts, std::vector<double>(m, 0.0), spec.level);
    out << "n_links," << fmt(n.qbar) << ",NA," << fmt(std::sqrt(n.t)) << ',' << fmt(n.ci_low) << ','
        << fmt(n.ci_high) << ",NA,NA," << fmt(n.df) << ',' << n.m << ',' << fmt(n.ubar) << ',' << fmt(n.b) << ','
        << fmt(n.t) << ',' << (n.df_capped ? 1 : 0) << ",0\n";
    prepare_output_dir(cfg.output_dir);
    write_text(cfg.output_dir / "mi.csv", out.str());
    write_text(cfg.output_dir / "manifest.json", manifest(cfg, "analyze").dump(2) + "\n");
    if (n_sep == m) {
        std::cerr << "every imputation hit separation; estimates are capped\n";
        return kExitNumerical;
    }
    return kExitOk;
}

void cmd_study(const RunConfig& cfg) {
    StudyConfig sc;
    sc.grid = cfg.grid.empty() ? full_error_grid() : cfg.grid;
    sc.methods = cfg.study_methods;
    sc.simulation = cfg.simulation;
    sc.simulation.seed = cfg.seed;
    sc.chain = cfg.chain;
    sc.hyper = cfg.hyper;
    sc.threads = cfg.threads;
    prepare_output_dir(cfg.output_dir);
    std::ostringstream out;
    out << study_csv_header() << '\n';
    run_study(sc, [&](const StudyRow& row) {
        out << study_csv_row(row) << '\n';
        std::cerr << study_csv_row(row) << '\n';
    });
    write_text(cfg.output_dir / "summary.csv", out.str());
    write_text(cfg.output_dir / "manifest.json", manifest(cfg, "study").dump(2) + "\n");
}

}  // namespace reclink
