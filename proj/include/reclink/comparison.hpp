#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace reclink {

/// Agreement level index. 0 is the lowest level (disagreement); binary
/// comparisons use 0 = disagree, 1 = agree.
using Level = std::uint8_t;

enum class ComparisonKind { binary_exact, numeric_absolute, numeric_relative, ordinal_multilevel };

std::string_view to_string(ComparisonKind kind);
ComparisonKind parse_comparison_kind(std::string_view text);

struct ComparisonSpec {
    std::string name;
    ComparisonKind kind = ComparisonKind::binary_exact;
    double threshold = 0.0;  // numeric_absolute: agree iff |a - b| < threshold
    double fraction = 0.0;   // numeric_relative: agree iff |a - b| <= fraction * max(|a|, |b|)
    int levels = 2;          // ordinal_multilevel: components + 1
    /// Pairs disagreeing on a forced variable are structurally non-links.
    bool forced = false;

    [[nodiscard]] int level_count() const noexcept {
        return kind == ComparisonKind::ordinal_multilevel ? levels : 2;
    }
    void validate() const;

    static ComparisonSpec binary(std::string name);
    static ComparisonSpec absolute(std::string name, double threshold);
    static ComparisonSpec relative(std::string name, double fraction);
    static ComparisonSpec ordinal(std::string name, int levels);
};

struct ComparisonSchema {
    std::vector<ComparisonSpec> block;   // P block-level variables
    std::vector<ComparisonSpec> record;  // K record-level variables

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static ComparisonSchema from_json(const nlohmann::json& doc);
};

/// An attribute value: missing, numeric or text. Ordinal values are
/// '-'-separated hierarchical keys such as "1980-05" or "1980-05-17".
using Value = std::variant<std::monostate, double, std::string>;

[[nodiscard]] inline bool is_missing(const Value& v) noexcept {
    return std::holds_alternative<std::monostate>(v);
}
std::string value_to_string(const Value& v);

/// Agreement level of two values under `spec`. Missing values give level 0.
/// Throws SchemaError when a value cannot be read as the spec's type.
Level compare_values(const Value& a, const Value& b, const ComparisonSpec& spec);

struct Record {
    std::string id;
    std::vector<Value> values;        // K record-level attributes
    std::vector<std::string> extras;  // non-linking columns, carried for analysis
};

struct Block {
    std::string id;
    std::vector<Value> values;  // P block-level attributes
    std::vector<Record> records;
};

struct BlockedFile {
    std::string file_id;
    std::vector<Block> blocks;
    std::vector<std::string> extra_columns;

    [[nodiscard]] std::size_t record_count() const noexcept;
    /// Arity, id uniqueness and non-empty blocks; throws ValidationError.
    void validate(std::size_t block_arity, std::size_t record_arity) const;
};

/// All agreement vectors between two blocked files.
///
/// Forced variables do not enter the likelihood; they only produce the block
/// mask (block variables) and the record candidacy mask (record variables).
/// P() and K() count the remaining likelihood variables.
///
/// Block-level levels are stored S x T x P. Record-level levels are stored per
/// block pair in row-major order with K packed levels per record pair. Each
/// record pair also carries a dense pattern id indexing the table of distinct
/// agreement vectors, and each block pair carries per-variable level counts
/// (the sufficient statistics of the record-level mixture components).
class ComparisonCube {
 public:
    ComparisonCube() = default;

    [[nodiscard]] std::size_t S() const noexcept { return rows_.size(); }
    [[nodiscard]] std::size_t T() const noexcept { return cols_.size(); }
    [[nodiscard]] std::size_t P() const noexcept { return block_levels_per_var_.size(); }
    [[nodiscard]] std::size_t K() const noexcept { return record_levels_per_var_.size(); }
    [[nodiscard]] std::size_t rows(std::size_t s) const { return rows_[s]; }
    [[nodiscard]] std::size_t cols(std::size_t t) const { return cols_[t]; }
    [[nodiscard]] std::size_t pair_index(std::size_t s, std::size_t t) const noexcept { return s * T() + t; }
    [[nodiscard]] std::size_t total_record_pairs() const noexcept { return pair_offset_.back(); }

    [[nodiscard]] const std::vector<int>& block_level_counts() const noexcept { return block_levels_per_var_; }
    [[nodiscard]] const std::vector<int>& record_level_counts() const noexcept { return record_levels_per_var_; }

    [[nodiscard]] std::span<const Level> block_levels(std::size_t s, std::size_t t) const;
    [[nodiscard]] std::span<const Level> record_levels(std::size_t s, std::size_t t, std::size_t i,
                                                       std::size_t j) const;
    [[nodiscard]] std::uint32_t pattern(std::size_t s, std::size_t t, std::size_t i, std::size_t j) const;
    /// Row-major rows(s) x cols(t) pattern ids of one block pair.
    [[nodiscard]] std::span<const std::uint32_t> patterns(std::size_t s, std::size_t t) const;

    [[nodiscard]] std::size_t pattern_count() const noexcept { return pattern_count_; }
    [[nodiscard]] std::span<const Level> pattern_levels(std::uint32_t id) const;

    /// Offset of variable k inside a flattened per-variable level histogram.
    [[nodiscard]] std::size_t level_offset(std::size_t k) const { return record_level_offset_[k]; }
    [[nodiscard]] std::size_t total_levels() const noexcept { return record_level_offset_.back(); }
    /// Per-variable level histogram of all record pairs in (s, t).
    [[nodiscard]] std::span<const std::uint64_t> level_histogram(std::size_t s, std::size_t t) const;

    [[nodiscard]] bool has_record_mask() const noexcept { return !candidate_.empty(); }
    [[nodiscard]] bool candidate(std::size_t s, std::size_t t, std::size_t i, std::size_t j) const;
    /// Row-major candidacy flags of one block pair; empty when no record mask.
    [[nodiscard]] std::span<const std::uint8_t> candidates(std::size_t s, std::size_t t) const;
    [[nodiscard]] std::size_t candidate_pair_count() const;

    [[nodiscard]] bool has_block_mask() const noexcept { return !block_allowed_.empty(); }
    [[nodiscard]] bool block_allowed(std::size_t s, std::size_t t) const {
        return block_allowed_.empty() || block_allowed_[pair_index(s, t)] != 0;
    }

    /// Number of record pairs per pattern id over the whole cube.
    [[nodiscard]] const std::vector<std::uint64_t>& pattern_totals() const noexcept { return pattern_totals_; }

    /// Missing-value comparisons per schema variable (block variables first).
    [[nodiscard]] const std::vector<std::uint64_t>& missing_counts() const noexcept { return missing_; }

    friend ComparisonCube build_comparison_cube(const BlockedFile&, const BlockedFile&, const ComparisonSchema&,
                                                unsigned);

 private:
    std::vector<std::size_t> rows_, cols_;
    std::vector<int> block_levels_per_var_, record_levels_per_var_;
    std::vector<std::size_t> record_level_offset_;
    std::vector<Level> block_levels_;
    std::vector<std::size_t> pair_offset_;  // size S*T + 1
    std::vector<Level> record_levels_;
    std::vector<std::uint32_t> patterns_;
    std::vector<Level> pattern_levels_;
    std::size_t pattern_count_ = 0;
    std::vector<std::uint64_t> histograms_;
    std::vector<std::uint8_t> candidate_;
    std::vector<std::uint8_t> block_allowed_;
    std::vector<std::uint64_t> pattern_totals_;
    std::vector<std::uint64_t> missing_;
};

/// Deterministic for any thread count.
ComparisonCube build_comparison_cube(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                     unsigned threads = 1);

}  // namespace reclink
