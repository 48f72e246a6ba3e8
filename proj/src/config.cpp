#include "reclink/config.hpp"

#include <set>

#include "reclink/errors.hpp"
#include "reclink/io.hpp"

namespace reclink {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, _] : obj.items())
        if (!known.count(k)) throw ValidationError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void read_path(const json& obj, const char* key, std::filesystem::path& out) {
    std::string s;
    read(obj, key, s);
    if (!s.empty()) out = s;
}

ErrorRates rates_from_json(const json& j) {
    ErrorRates e;
    if (j.is_array()) {
        if (j.size() != 3) throw ValidationError("error-rate triple must have 3 entries");
        e = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    } else {
        reject_unknown(j, {"region", "income", "dob"}, "error rates");
        read(j, "region", e.region);
        read(j, "income", e.income);
        read(j, "dob", e.dob);
    }
    e.validate();
    return e;
}

json rates_to_json(const ErrorRates& e) { return {{"region", e.region}, {"income", e.income}, {"dob", e.dob}}; }

}  // namespace

RunConfig RunConfig::from_json(const json& doc) {
    RunConfig c;
    reject_unknown(doc, {"seed", "threads", "method", "output_dir", "inputs", "chain", "hyper", "simulation", "study",
                         "analysis", "evaluate", "export_matrices"},
                   "config");
    read(doc, "seed", c.seed);
    read(doc, "threads", c.threads);
    if (doc.contains("method")) c.method = parse_method(doc["method"].get<std::string>());
    read_path(doc, "output_dir", c.output_dir);
    read(doc, "export_matrices", c.export_matrices);
    if (doc.contains("inputs")) {
        const auto& j = doc["inputs"];
        reject_unknown(j, {"file1", "file2", "schema"}, "inputs");
        read_path(j, "file1", c.file1);
        read_path(j, "file2", c.file2);
        read_path(j, "schema", c.schema);
    }
    if (doc.contains("evaluate")) {
        const auto& j = doc["evaluate"];
        reject_unknown(j, {"samples", "truth_blocks", "truth_links"}, "evaluate");
        read_path(j, "samples", c.samples);
        read_path(j, "truth_blocks", c.truth_blocks);
        read_path(j, "truth_links", c.truth_links);
    }
    if (doc.contains("chain")) {
        const auto& j = doc["chain"];
        reject_unknown(j, {"iterations", "burn_in", "sweeps", "brl_sweeps", "thin", "adaptive_pool", "block_move_rule",
                           "pool_weight", "brl_pair_cap", "drift_check_interval"},
                       "chain");
        read(j, "iterations", c.chain.iterations);
        read(j, "burn_in", c.chain.burn_in);
        read(j, "sweeps", c.chain.sweeps);
        read(j, "brl_sweeps", c.chain.brl_sweeps);
        read(j, "thin", c.chain.thin);
        read(j, "adaptive_pool", c.chain.adaptive_pool);
        read(j, "pool_weight", c.chain.pool_weight);
        read(j, "brl_pair_cap", c.chain.brl_pair_cap);
        read(j, "drift_check_interval", c.chain.drift_check_interval);
        if (j.contains("block_move_rule")) {
            const auto rule = j["block_move_rule"].get<std::string>();
            if (rule == "pool") c.chain.block_move_rule = BlockMoveRule::pool;
            else if (rule == "hastings") c.chain.block_move_rule = BlockMoveRule::hastings;
            else throw ValidationError("block_move_rule must be 'pool' or 'hastings'");
        }
    }
    if (doc.contains("hyper")) {
        const auto& j = doc["hyper"];
        reject_unknown(j, {"concentration", "alpha_pi", "beta_pi"}, "hyper");
        read(j, "concentration", c.hyper.concentration);
        read(j, "alpha_pi", c.hyper.alpha_pi);
        read(j, "beta_pi", c.hyper.beta_pi);
        if (!(c.hyper.concentration > 0 && c.hyper.alpha_pi > 0 && c.hyper.beta_pi > 0))
            throw ValidationError("hyperparameters must be > 0");
    }
    if (doc.contains("simulation")) {
        const auto& j = doc["simulation"];
        reject_unknown(j, {"S", "T", "n1s", "n2t", "nm", "errors", "day_included", "replicates", "analysis_columns"},
                       "simulation");
        read(j, "S", c.simulation.S);
        read(j, "T", c.simulation.T);
        read(j, "n1s", c.simulation.n1s);
        read(j, "n2t", c.simulation.n2t);
        read(j, "nm", c.simulation.nm);
        read(j, "day_included", c.simulation.day_included);
        read(j, "replicates", c.simulation.replicates);
        read(j, "analysis_columns", c.simulation.analysis_columns);
        if (j.contains("errors")) c.simulation.errors = rates_from_json(j["errors"]);
    }
    if (doc.contains("study")) {
        const auto& j = doc["study"];
        reject_unknown(j, {"grid", "methods"}, "study");
        if (j.contains("grid")) {
            if (!j["grid"].is_array()) throw ValidationError("study grid must be an array");
            for (const auto& e : j["grid"]) c.grid.push_back(rates_from_json(e));
        }
        if (j.contains("methods")) {
            c.study_methods.clear();
            for (const auto& m : j["methods"]) c.study_methods.push_back(parse_method(m.get<std::string>()));
        }
    }
    if (doc.contains("analysis")) {
        const auto& j = doc["analysis"];
        reject_unknown(j, {"outcome", "exposures", "covariates", "level"}, "analysis");
        read(j, "outcome", c.analysis.outcome);
        read(j, "exposures", c.analysis.exposures);
        read(j, "covariates", c.analysis.covariates);
        read(j, "level", c.analysis.level);
    }
    c.apply_seed();
    c.chain.validate();
    c.simulation.validate();
    return c;
}

json RunConfig::to_json() const {
    json grid_json = json::array();
    for (const auto& e : grid) grid_json.push_back(rates_to_json(e));
    json methods = json::array();
    for (auto m : study_methods) methods.push_back(std::string(to_string(m)));
    return {
        {"seed", seed},
        {"threads", threads},
        {"method", std::string(to_string(method))},
        {"output_dir", output_dir.string()},
        {"export_matrices", export_matrices},
        {"inputs", {{"file1", file1.string()}, {"file2", file2.string()}, {"schema", schema.string()}}},
        {"evaluate",
         {{"samples", samples.string()}, {"truth_blocks", truth_blocks.string()}, {"truth_links", truth_links.string()}}},
        {"chain",
         {{"iterations", chain.iterations},
          {"burn_in", chain.effective_burn_in()},
          {"sweeps", chain.sweeps},
          {"brl_sweeps", chain.brl_sweeps},
          {"thin", chain.thin},
          {"adaptive_pool", chain.adaptive_pool},
          {"block_move_rule", chain.block_move_rule == BlockMoveRule::pool ? "pool" : "hastings"},
          {"pool_weight", chain.pool_weight},
          {"brl_pair_cap", chain.brl_pair_cap},
          {"drift_check_interval", chain.drift_check_interval}}},
        {"hyper", {{"concentration", hyper.concentration}, {"alpha_pi", hyper.alpha_pi}, {"beta_pi", hyper.beta_pi}}},
        {"simulation",
         {{"S", simulation.S},
          {"T", simulation.T},
          {"n1s", simulation.n1s},
          {"n2t", simulation.n2t},
          {"nm", simulation.nm},
          {"errors", rates_to_json(simulation.errors)},
          {"day_included", simulation.day_included},
          {"replicates", simulation.replicates},
          {"analysis_columns", simulation.analysis_columns}}},
        {"study", {{"grid", grid_json}, {"methods", methods}}},
        {"analysis",
         {{"outcome", analysis.outcome},
          {"exposures", analysis.exposures},
          {"covariates", analysis.covariates},
          {"level", analysis.level}}},
    };
}

void RunConfig::apply_seed() {
    chain.seed = seed;
    simulation.seed = seed;
    chain.threads = threads;
}

void RunConfig::require_files(const std::vector<std::filesystem::path>& paths) const {
    for (const auto& p : paths) {
        if (p.empty()) throw ValidationError("a required input path is not set");
        if (!std::filesystem::exists(p)) throw ValidationError("input '" + p.string() + "' does not exist");
    }
}

std::string config_hash(const RunConfig& cfg) { return fnv1a_hex(cfg.to_json().dump()); }

}  // namespace reclink
