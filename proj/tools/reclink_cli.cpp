// reclink: simulate, link, evaluate, analyze, study.
#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "reclink/commands.hpp"
#include "reclink/errors.hpp"

namespace {

struct Overrides {
    std::string config;
    std::string method;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out;
    std::string file1, file2, schema, samples, truth_blocks, truth_links;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "run config JSON (or a manifest from an earlier run)");
    cmd->add_option("--method", o.method, "mlbrl, cibrl or brl");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--threads", o.threads, "worker threads (results do not depend on it)");
    cmd->add_option("--out", o.out, "output directory");
}

reclink::RunConfig resolve(const Overrides& o) {
    reclink::RunConfig cfg = o.config.empty() ? reclink::RunConfig{} : reclink::load_run_config(o.config);
    if (!o.method.empty()) cfg.method = reclink::parse_method(o.method);
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = std::max(1u, *o.threads);
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (!o.file1.empty()) cfg.file1 = o.file1;
    if (!o.file2.empty()) cfg.file2 = o.file2;
    if (!o.schema.empty()) cfg.schema = o.schema;
    if (!o.samples.empty()) cfg.samples = o.samples;
    if (!o.truth_blocks.empty()) cfg.truth_blocks = o.truth_blocks;
    if (!o.truth_links.empty()) cfg.truth_links = o.truth_links;
    cfg.apply_seed();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic record linkage across blocked files"};
    app.require_subcommand(1);
    Overrides o;

    auto* simulate = app.add_subcommand("simulate", "generate a simulated pair of blocked files with truth");
    auto* link = app.add_subcommand("link", "sample record and block linkages");
    auto* evaluate = app.add_subcommand("evaluate", "score posterior samples against truth");
    auto* analyze = app.add_subcommand("analyze", "logistic regression over the linked samples");
    auto* study = app.add_subcommand("study", "simulation study over the error grid");
    for (auto* cmd : {simulate, link, evaluate, analyze, study}) add_common(cmd, o);
    for (auto* cmd : {link, analyze}) {
        cmd->add_option("--file1", o.file1, "file-1 CSV");
        cmd->add_option("--file2", o.file2, "file-2 CSV");
        cmd->add_option("--schema", o.schema, "comparison schema JSON");
    }
    for (auto* cmd : {evaluate, analyze}) cmd->add_option("--samples", o.samples, "samples.jsonl");
    evaluate->add_option("--truth-blocks", o.truth_blocks, "truth_blocks.csv");
    evaluate->add_option("--truth-links", o.truth_links, "truth_links.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : reclink::kExitValidation;
    }

    try {
        const reclink::RunConfig cfg = resolve(o);
        if (simulate->parsed()) reclink::cmd_simulate(cfg);
        if (link->parsed()) return reclink::cmd_link(cfg);
        if (evaluate->parsed()) reclink::cmd_evaluate(cfg);
        if (analyze->parsed()) return reclink::cmd_analyze(cfg);
        if (study->parsed()) reclink::cmd_study(cfg);
        return reclink::kExitOk;
    } catch (const reclink::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return reclink::kExitValidation;
    } catch (const reclink::ResourceError& e) {
        std::cerr << "resource error: " << e.what() << '\n';
        return reclink::kExitResource;
    } catch (const reclink::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return reclink::kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
