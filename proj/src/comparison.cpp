#include "reclink/comparison.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include "reclink/errors.hpp"
#include "reclink/parallel.hpp"

namespace reclink {

std::string_view to_string(ComparisonKind kind) {
    switch (kind) {
        case ComparisonKind::binary_exact: return "binary-exact";
        case ComparisonKind::numeric_absolute: return "numeric-absolute";
        case ComparisonKind::numeric_relative: return "numeric-relative";
        case ComparisonKind::ordinal_multilevel: return "ordinal-multilevel";
    }
    return "?";
}

ComparisonKind parse_comparison_kind(std::string_view text) {
    if (text == "binary-exact") return ComparisonKind::binary_exact;
    if (text == "numeric-absolute") return ComparisonKind::numeric_absolute;
    if (text == "numeric-relative") return ComparisonKind::numeric_relative;
    if (text == "ordinal-multilevel") return ComparisonKind::ordinal_multilevel;
    throw SchemaError("unknown comparison kind '" + std::string(text) + "'");
}

void ComparisonSpec::validate() const {
    if (name.empty()) throw SchemaError("comparison variable without a name");
    switch (kind) {
        case ComparisonKind::binary_exact: break;
        case ComparisonKind::numeric_absolute:
            if (!(threshold > 0.0) || !std::isfinite(threshold))
                throw SchemaError(name + ": threshold must be > 0");
            break;
        case ComparisonKind::numeric_relative:
            if (!(fraction > 0.0 && fraction < 1.0)) throw SchemaError(name + ": fraction must lie in (0, 1)");
            break;
        case ComparisonKind::ordinal_multilevel:
            if (levels < 2 || levels > 64) throw SchemaError(name + ": levels must lie in [2, 64]");
            break;
    }
}

ComparisonSpec ComparisonSpec::binary(std::string name) {
    ComparisonSpec s;
    s.name = std::move(name);
    return s;
}

ComparisonSpec ComparisonSpec::absolute(std::string name, double threshold) {
    ComparisonSpec s;
    s.name = std::move(name);
    s.kind = ComparisonKind::numeric_absolute;
    s.threshold = threshold;
    return s;
}

ComparisonSpec ComparisonSpec::relative(std::string name, double fraction) {
    ComparisonSpec s;
    s.name = std::move(name);
    s.kind = ComparisonKind::numeric_relative;
    s.fraction = fraction;
    return s;
}

ComparisonSpec ComparisonSpec::ordinal(std::string name, int levels) {
    ComparisonSpec s;
    s.name = std::move(name);
    s.kind = ComparisonKind::ordinal_multilevel;
    s.levels = levels;
    return s;
}

void ComparisonSchema::validate() const {
    std::unordered_set<std::string> names;
    for (const auto* group : {&block, &record}) {
        for (const auto& spec : *group) {
            spec.validate();
            if (!names.insert(spec.name).second) throw SchemaError("duplicate variable name '" + spec.name + "'");
        }
    }
}

namespace {

nlohmann::json spec_to_json(const ComparisonSpec& s) {
    nlohmann::json j{{"name", s.name}, {"kind", std::string(to_string(s.kind))}};
    if (s.kind == ComparisonKind::numeric_absolute) j["threshold"] = s.threshold;
    if (s.kind == ComparisonKind::numeric_relative) j["fraction"] = s.fraction;
    if (s.kind == ComparisonKind::ordinal_multilevel) j["levels"] = s.levels;
    if (s.forced) j["forced"] = true;
    return j;
}

ComparisonSpec spec_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("name") || !j.contains("kind"))
        throw SchemaError("comparison entry needs 'name' and 'kind'");
    ComparisonSpec s;
    try {
        s.name = j.at("name").get<std::string>();
        s.kind = parse_comparison_kind(j.at("kind").get<std::string>());
        s.threshold = j.value("threshold", 0.0);
        s.fraction = j.value("fraction", 0.0);
        s.levels = j.value("levels", 2);
        s.forced = j.value("forced", false);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed comparison entry: ") + e.what());
    }
    s.validate();
    return s;
}

}  // namespace

nlohmann::json ComparisonSchema::to_json() const {
    nlohmann::json doc{{"block", nlohmann::json::array()}, {"record", nlohmann::json::array()}};
    for (const auto& s : block) doc["block"].push_back(spec_to_json(s));
    for (const auto& s : record) doc["record"].push_back(spec_to_json(s));
    return doc;
}

ComparisonSchema ComparisonSchema::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw SchemaError("schema must be a JSON object");
    ComparisonSchema schema;
    for (const char* key : {"block", "record"}) {
        if (!doc.contains(key)) continue;
        if (!doc[key].is_array()) throw SchemaError(std::string("schema '") + key + "' must be an array");
        auto& out = std::string_view(key) == "block" ? schema.block : schema.record;
        for (const auto& entry : doc[key]) out.push_back(spec_from_json(entry));
    }
    schema.validate();
    return schema;
}

std::string value_to_string(const Value& v) {
    if (is_missing(v)) return {};
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    const double d = std::get<double>(v);
    if (std::isfinite(d) && d == std::nearbyint(d) && std::fabs(d) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", d);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

namespace {

double as_number(const Value& v, const ComparisonSpec& spec) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    const auto& s = std::get<std::string>(v);
    double out = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last || first == last)
        throw SchemaError(spec.name + ": value '" + s + "' is not numeric");
    return out;
}

// The first `count` '-'-separated components of an ordinal key.
std::vector<std::string_view> ordinal_components(const std::string& text, std::size_t count,
                                                 const ComparisonSpec& spec) {
    std::vector<std::string_view> parts;
    std::string_view rest(text);
    while (parts.size() < count) {
        const auto dash = rest.find('-');
        parts.push_back(rest.substr(0, dash));
        if (dash == std::string_view::npos) break;
        rest.remove_prefix(dash + 1);
    }
    if (parts.size() < count)
        throw SchemaError(spec.name + ": value '" + text + "' has fewer than " + std::to_string(count) +
                          " components");
    return parts;
}

}  // namespace

Level compare_values(const Value& a, const Value& b, const ComparisonSpec& spec) {
    if (is_missing(a) || is_missing(b)) return 0;
    switch (spec.kind) {
        case ComparisonKind::binary_exact: return value_to_string(a) == value_to_string(b) ? 1 : 0;
        case ComparisonKind::numeric_absolute: {
            const double x = as_number(a, spec), y = as_number(b, spec);
            return std::fabs(x - y) < spec.threshold ? 1 : 0;
        }
        case ComparisonKind::numeric_relative: {
            const double x = as_number(a, spec), y = as_number(b, spec);
            return std::fabs(x - y) <= spec.fraction * std::max(std::fabs(x), std::fabs(y)) ? 1 : 0;
        }
        case ComparisonKind::ordinal_multilevel: {
            const std::size_t depth = static_cast<std::size_t>(spec.levels - 1);
            const auto sa = value_to_string(a), sb = value_to_string(b);
            const auto pa = ordinal_components(sa, depth, spec);
            const auto pb = ordinal_components(sb, depth, spec);
            std::size_t common = 0;
            while (common < depth && pa[common] == pb[common]) ++common;
            return static_cast<Level>(common);
        }
    }
    return 0;
}

std::size_t BlockedFile::record_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.records.size();
    return n;
}

void BlockedFile::validate(std::size_t block_arity, std::size_t record_arity) const {
    if (blocks.empty()) throw ValidationError(file_id + ": no blocks");
    std::unordered_set<std::string> block_ids, record_ids;
    for (const auto& b : blocks) {
        if (!block_ids.insert(b.id).second) throw ValidationError(file_id + ": duplicate block id '" + b.id + "'");
        if (b.values.size() != block_arity)
            throw SchemaError(file_id + ": block '" + b.id + "' has " + std::to_string(b.values.size()) +
                              " block attributes, schema expects " + std::to_string(block_arity));
        if (b.records.empty()) throw ValidationError(file_id + ": block '" + b.id + "' is empty");
        for (const auto& r : b.records) {
            if (!record_ids.insert(r.id).second)
                throw ValidationError(file_id + ": duplicate record id '" + r.id + "'");
            if (r.values.size() != record_arity)
                throw SchemaError(file_id + ": record '" + r.id + "' has " + std::to_string(r.values.size()) +
                                  " record attributes, schema expects " + std::to_string(record_arity));
        }
    }
}

std::span<const Level> ComparisonCube::block_levels(std::size_t s, std::size_t t) const {
    return {block_levels_.data() + pair_index(s, t) * P(), P()};
}

std::span<const Level> ComparisonCube::record_levels(std::size_t s, std::size_t t, std::size_t i,
                                                     std::size_t j) const {
    const std::size_t idx = pair_offset_[pair_index(s, t)] + i * cols_[t] + j;
    return {record_levels_.data() + idx * K(), K()};
}

std::uint32_t ComparisonCube::pattern(std::size_t s, std::size_t t, std::size_t i, std::size_t j) const {
    return patterns_[pair_offset_[pair_index(s, t)] + i * cols_[t] + j];
}

std::span<const std::uint32_t> ComparisonCube::patterns(std::size_t s, std::size_t t) const {
    const std::size_t p = pair_index(s, t);
    return {patterns_.data() + pair_offset_[p], pair_offset_[p + 1] - pair_offset_[p]};
}

std::span<const Level> ComparisonCube::pattern_levels(std::uint32_t id) const {
    return {pattern_levels_.data() + static_cast<std::size_t>(id) * K(), K()};
}

std::span<const std::uint64_t> ComparisonCube::level_histogram(std::size_t s, std::size_t t) const {
    return {histograms_.data() + pair_index(s, t) * total_levels(), total_levels()};
}

bool ComparisonCube::candidate(std::size_t s, std::size_t t, std::size_t i, std::size_t j) const {
    return candidate_.empty() || candidate_[pair_offset_[pair_index(s, t)] + i * cols_[t] + j] != 0;
}

std::span<const std::uint8_t> ComparisonCube::candidates(std::size_t s, std::size_t t) const {
    if (candidate_.empty()) return {};
    const std::size_t p = pair_index(s, t);
    return {candidate_.data() + pair_offset_[p], pair_offset_[p + 1] - pair_offset_[p]};
}

std::size_t ComparisonCube::candidate_pair_count() const {
    if (candidate_.empty()) return total_record_pairs();
    return static_cast<std::size_t>(std::count(candidate_.begin(), candidate_.end(), std::uint8_t{1}));
}

ComparisonCube build_comparison_cube(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                     unsigned threads) {
    schema.validate();
    f1.validate(schema.block.size(), schema.record.size());
    f2.validate(schema.block.size(), schema.record.size());

    std::vector<std::size_t> block_vars, block_forced, record_vars, record_forced;
    for (std::size_t p = 0; p < schema.block.size(); ++p)
        (schema.block[p].forced ? block_forced : block_vars).push_back(p);
    for (std::size_t k = 0; k < schema.record.size(); ++k)
        (schema.record[k].forced ? record_forced : record_vars).push_back(k);

    ComparisonCube cube;
    const std::size_t S = f1.blocks.size(), T = f2.blocks.size();
    for (const auto& b : f1.blocks) cube.rows_.push_back(b.records.size());
    for (const auto& b : f2.blocks) cube.cols_.push_back(b.records.size());
    for (auto p : block_vars) cube.block_levels_per_var_.push_back(schema.block[p].level_count());
    for (auto k : record_vars) cube.record_levels_per_var_.push_back(schema.record[k].level_count());
    cube.record_level_offset_.assign(1, 0);
    for (int L : cube.record_levels_per_var_)
        cube.record_level_offset_.push_back(cube.record_level_offset_.back() + static_cast<std::size_t>(L));

    const std::size_t P = block_vars.size(), K = record_vars.size();
    const std::size_t nvars = schema.block.size() + schema.record.size();
    const std::size_t npairs = S * T;
    cube.pair_offset_.assign(npairs + 1, 0);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t t = 0; t < T; ++t)
            cube.pair_offset_[s * T + t + 1] = cube.rows_[s] * cube.cols_[t];
    std::partial_sum(cube.pair_offset_.begin(), cube.pair_offset_.end(), cube.pair_offset_.begin());
    const std::size_t total = cube.pair_offset_.back();

    cube.block_levels_.assign(npairs * P, 0);
    cube.record_levels_.assign(total * K, 0);
    if (!block_forced.empty()) cube.block_allowed_.assign(npairs, 1);
    if (!record_forced.empty()) cube.candidate_.assign(total, 1);

    // Mixed-radix key of the K likelihood levels; ids are assigned later.
    std::uint64_t radix_span = 1;
    for (int L : cube.record_levels_per_var_) {
        radix_span *= static_cast<std::uint64_t>(L);
        if (radix_span > (std::uint64_t{1} << 32))
            throw ResourceError("too many distinct record agreement patterns");
    }
    std::vector<std::uint32_t> keys(total, 0);
    std::vector<std::vector<std::uint64_t>> missing(npairs, std::vector<std::uint64_t>(nvars, 0));

    parallel_for(npairs, threads, [&](std::size_t pair) {
        const std::size_t s = pair / T, t = pair % T;
        const Block& b1 = f1.blocks[s];
        const Block& b2 = f2.blocks[t];
        auto& miss = missing[pair];
        for (std::size_t q = 0; q < P; ++q) {
            const std::size_t p = block_vars[q];
            if (is_missing(b1.values[p]) || is_missing(b2.values[p])) ++miss[p];
            cube.block_levels_[pair * P + q] = compare_values(b1.values[p], b2.values[p], schema.block[p]);
        }
        for (std::size_t p : block_forced) {
            if (is_missing(b1.values[p]) || is_missing(b2.values[p])) ++miss[p];
            const auto& spec = schema.block[p];
            if (compare_values(b1.values[p], b2.values[p], spec) != spec.level_count() - 1)
                cube.block_allowed_[pair] = 0;
        }
        const std::size_t base = cube.pair_offset_[pair];
        const std::size_t nb = schema.block.size();
        for (std::size_t i = 0; i < b1.records.size(); ++i) {
            const auto& r1 = b1.records[i].values;
            for (std::size_t j = 0; j < b2.records.size(); ++j) {
                const auto& r2 = b2.records[j].values;
                const std::size_t idx = base + i * b2.records.size() + j;
                std::uint64_t key = 0;
                for (std::size_t q = 0; q < K; ++q) {
                    const std::size_t k = record_vars[q];
                    if (is_missing(r1[k]) || is_missing(r2[k])) ++miss[nb + k];
                    const Level lv = compare_values(r1[k], r2[k], schema.record[k]);
                    cube.record_levels_[idx * K + q] = lv;
                    key = key * static_cast<std::uint64_t>(cube.record_levels_per_var_[q]) + lv;
                }
                keys[idx] = static_cast<std::uint32_t>(key);
                for (std::size_t k : record_forced) {
                    if (is_missing(r1[k]) || is_missing(r2[k])) ++miss[nb + k];
                    const auto& spec = schema.record[k];
                    if (compare_values(r1[k], r2[k], spec) != spec.level_count() - 1) cube.candidate_[idx] = 0;
                }
            }
        }
    });

    cube.missing_.assign(nvars, 0);
    for (const auto& m : missing)
        for (std::size_t v = 0; v < nvars; ++v) cube.missing_[v] += m[v];

    // Dense pattern ids in ascending key order.
    std::vector<std::uint32_t> distinct;
    if (radix_span <= (std::uint64_t{1} << 24)) {
        std::vector<std::uint8_t> seen(radix_span, 0);
        for (auto k : keys) seen[k] = 1;
        for (std::uint64_t k = 0; k < radix_span; ++k)
            if (seen[k]) distinct.push_back(static_cast<std::uint32_t>(k));
    } else {
        distinct = keys;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    }
    if (total == 0) distinct.clear();
    cube.pattern_count_ = distinct.size();
    cube.pattern_levels_.assign(distinct.size() * K, 0);
    for (std::size_t id = 0; id < distinct.size(); ++id) {
        std::uint64_t key = distinct[id];
        for (std::size_t q = K; q-- > 0;) {
            const auto L = static_cast<std::uint64_t>(cube.record_levels_per_var_[q]);
            cube.pattern_levels_[id * K + q] = static_cast<Level>(key % L);
            key /= L;
        }
    }
    cube.patterns_.resize(total);
    parallel_for(npairs, threads, [&](std::size_t pair) {
        for (std::size_t idx = cube.pair_offset_[pair]; idx < cube.pair_offset_[pair + 1]; ++idx) {
            const auto it = std::lower_bound(distinct.begin(), distinct.end(), keys[idx]);
            cube.patterns_[idx] = static_cast<std::uint32_t>(it - distinct.begin());
        }
    });

    const std::size_t nl = cube.total_levels();
    cube.histograms_.assign(npairs * nl, 0);
    std::vector<std::vector<std::uint64_t>> pattern_counts(npairs);
    parallel_for(npairs, threads, [&](std::size_t pair) {
        auto& counts = pattern_counts[pair];
        counts.assign(distinct.size(), 0);
        for (std::size_t idx = cube.pair_offset_[pair]; idx < cube.pair_offset_[pair + 1]; ++idx)
            ++counts[cube.patterns_[idx]];
        std::uint64_t* hist = cube.histograms_.data() + pair * nl;
        for (std::size_t id = 0; id < distinct.size(); ++id) {
            if (counts[id] == 0) continue;
            for (std::size_t q = 0; q < K; ++q)
                hist[cube.record_level_offset_[q] + cube.pattern_levels_[id * K + q]] += counts[id];
        }
    });
    cube.pattern_totals_.assign(distinct.size(), 0);
    for (const auto& counts : pattern_counts)
        for (std::size_t id = 0; id < counts.size(); ++id) cube.pattern_totals_[id] += counts[id];
    return cube;
}

}  // namespace reclink
