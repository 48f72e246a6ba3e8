#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "reclink/comparison.hpp"
#include "reclink/sampler.hpp"
#include "reclink/simulation.hpp"

namespace reclink {

namespace fs = std::filesystem;

/// CSV columns: record_id, block_id, the schema's block columns, the schema's
/// record columns, then any extra columns. Empty cells and "NA" are missing.
/// Block columns must be constant within a block.
BlockedFile read_blocked_file(const fs::path& path, const ComparisonSchema& schema, const std::string& file_id);
void write_blocked_file(const fs::path& path, const BlockedFile& file, const ComparisonSchema& schema);

ComparisonSchema read_schema(const fs::path& path);
void write_schema(const fs::path& path, const ComparisonSchema& schema);

nlohmann::json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

/// Links and block pairs expressed with ids, independent of file order.
struct IdLinkage {
    bool blocked = true;
    int iteration = 0;
    std::vector<std::pair<std::string, std::string>> blocks;  // file-1 block id, file-2 block id
    std::vector<std::pair<std::string, std::string>> links;   // file-1 record id, file-2 record id
};

IdLinkage to_ids(const PosteriorSample& sample, const BlockedFile& f1, const BlockedFile& f2);
IdLinkage to_ids(const GroundTruth& truth, const BlockedFile& f1, const BlockedFile& f2);

/// One JSON object per sample.
nlohmann::json sample_to_json(const PosteriorSample& sample, const BlockedFile& f1, const BlockedFile& f2,
                              std::string_view method);
IdLinkage sample_from_json(const nlohmann::json& line);
std::vector<IdLinkage> read_samples(const fs::path& path);

void write_truth(const fs::path& blocks_csv, const fs::path& links_csv, const GroundTruth& truth,
                 const BlockedFile& f1, const BlockedFile& f2);
/// Truth read back from its two CSV files (blocked flag set).
IdLinkage read_truth(const fs::path& blocks_csv, const fs::path& links_csv);

/// Metrics computed on ids; same definitions as evaluate_sample.
LinkageMetrics evaluate_ids(const IdLinkage& sample, const IdLinkage& truth);

/// Posterior frequencies of block pairs and record pairs, for heat maps.
class LinkFrequencies {
 public:
    LinkFrequencies(std::size_t S, std::size_t T) : S_(S), T_(T), blocks_(S * T, 0) {}
    void add(const PosteriorSample& sample);
    /// Dense S x T log frequencies (-inf where never linked).
    void write_block_matrix(const fs::path& path, const BlockedFile& f1, const BlockedFile& f2) const;
    /// Sparse file1_record_id,file2_record_id,log_prob for pairs linked at least once.
    void write_record_matrix(const fs::path& path, const BlockedFile& f1, const BlockedFile& f2) const;
    [[nodiscard]] std::size_t samples() const noexcept { return n_; }

 private:
    std::size_t S_, T_, n_ = 0;
    std::vector<std::uint64_t> blocks_;
    std::map<RecordLink, std::uint64_t> records_;
};

/// FNV-1a 64-bit hash, hex encoded.
std::string fnv1a_hex(std::string_view text);

}  // namespace reclink
