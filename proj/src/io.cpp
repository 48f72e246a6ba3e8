#include "reclink/io.hpp"

#include <boost/tokenizer.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "reclink/errors.hpp"

namespace reclink {

namespace {

using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

std::vector<std::string> split_csv(const std::string& line, const fs::path& path, std::size_t line_no) {
    try {
        const boost::escaped_list_separator<char> sep('\\', ',', '"');
        Tokenizer tok(line, sep);
        return {tok.begin(), tok.end()};
    } catch (const boost::escaped_list_error& e) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\\\n") == std::string::npos) return s;
    // Backslash escapes, matching the reader's tokenizer.
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + '"';
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ResourceError("cannot write '" + path.string() + "'");
    return out;
}

Value parse_cell(const std::string& cell) {
    if (cell.empty() || cell == "NA") return std::monostate{};
    return cell;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

BlockedFile read_blocked_file(const fs::path& path, const ComparisonSchema& schema, const std::string& file_id) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
    const auto header = split_csv(strip_cr(line), path, 1);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (!col.emplace(header[c], c).second) throw ValidationError(path.string() + ": duplicate column '" + header[c] + "'");
    auto need = [&](const std::string& name) {
        const auto it = col.find(name);
        if (it == col.end()) throw SchemaError(path.string() + ": missing column '" + name + "'");
        return it->second;
    };
    const std::size_t rid = need("record_id"), bid = need("block_id");
    std::vector<std::size_t> bcols, rcols;
    std::set<std::size_t> used{rid, bid};
    for (const auto& s : schema.block) used.insert(bcols.emplace_back(need(s.name)));
    for (const auto& s : schema.record) used.insert(rcols.emplace_back(need(s.name)));
    BlockedFile file;
    file.file_id = file_id;
    std::vector<std::size_t> extra;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (!used.count(c)) {
            extra.push_back(c);
            file.extra_columns.push_back(header[c]);
        }

    std::unordered_map<std::string, std::size_t> block_pos;
    std::vector<std::vector<std::string>> block_raw;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_csv(line, path, line_no);
        if (cells.size() != header.size())
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
        const std::string& block_id = cells[bid];
        std::vector<std::string> raw;
        for (auto c : bcols) raw.push_back(cells[c]);
        auto [it, fresh] = block_pos.emplace(block_id, file.blocks.size());
        if (fresh) {
            Block b;
            b.id = block_id;
            for (const auto& r : raw) b.values.push_back(parse_cell(r));
            file.blocks.push_back(std::move(b));
            block_raw.push_back(raw);
        } else if (block_raw[it->second] != raw) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": block attributes of '" +
                                  block_id + "' differ from earlier rows");
        }
        Record rec;
        rec.id = cells[rid];
        for (auto c : rcols) rec.values.push_back(parse_cell(cells[c]));
        for (auto c : extra) rec.extras.push_back(cells[c]);
        file.blocks[it->second].records.push_back(std::move(rec));
    }
    file.validate(schema.block.size(), schema.record.size());
    return file;
}

void write_blocked_file(const fs::path& path, const BlockedFile& file, const ComparisonSchema& schema) {
    auto out = open_out(path);
    out << "record_id,block_id";
    for (const auto& s : schema.block) out << ',' << csv_field(s.name);
    for (const auto& s : schema.record) out << ',' << csv_field(s.name);
    for (const auto& e : file.extra_columns) out << ',' << csv_field(e);
    out << '\n';
    for (const auto& b : file.blocks) {
        for (const auto& r : b.records) {
            out << csv_field(r.id) << ',' << csv_field(b.id);
            for (const auto& v : b.values) out << ',' << csv_field(value_to_string(v));
            for (const auto& v : r.values) out << ',' << csv_field(value_to_string(v));
            for (const auto& e : r.extras) out << ',' << csv_field(e);
            out << '\n';
        }
    }
    if (!out) throw ResourceError("failed writing '" + path.string() + "'");
}

nlohmann::json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) throw ResourceError("failed writing '" + path.string() + "'");
}

ComparisonSchema read_schema(const fs::path& path) { return ComparisonSchema::from_json(read_json(path)); }

void write_schema(const fs::path& path, const ComparisonSchema& schema) {
    write_text(path, schema.to_json().dump(2) + "\n");
}

IdLinkage to_ids(const PosteriorSample& sample, const BlockedFile& f1, const BlockedFile& f2) {
    IdLinkage out;
    out.blocked = sample.blocked;
    out.iteration = sample.iteration;
    if (sample.blocked)
        for (std::size_t s = 0; s < sample.blocks.size(); ++s)
            if (sample.blocks[s] >= 0)
                out.blocks.emplace_back(f1.blocks[s].id, f2.blocks[static_cast<std::size_t>(sample.blocks[s])].id);
    for (const auto& l : sample.links)
        out.links.emplace_back(f1.blocks[static_cast<std::size_t>(l.s)].records[static_cast<std::size_t>(l.i)].id,
                               f2.blocks[static_cast<std::size_t>(l.t)].records[static_cast<std::size_t>(l.j)].id);
    return out;
}

IdLinkage to_ids(const GroundTruth& truth, const BlockedFile& f1, const BlockedFile& f2) {
    PosteriorSample s;
    s.blocks = truth.blocks;
    s.links = truth.links;
    return to_ids(s, f1, f2);
}

nlohmann::json sample_to_json(const PosteriorSample& sample, const BlockedFile& f1, const BlockedFile& f2,
                              std::string_view method) {
    const IdLinkage ids = to_ids(sample, f1, f2);
    nlohmann::json j;
    j["iteration"] = sample.iteration;
    j["method"] = std::string(method);
    j["blocked"] = sample.blocked;
    j["blocks"] = ids.blocks;
    j["links"] = ids.links;
    if (sample.blocked) {
        nlohmann::json nm = nlohmann::json::object();
        const auto counts = sample.pair_link_counts();
        for (std::size_t s = 0; s < sample.blocks.size(); ++s)
            if (sample.blocks[s] >= 0) nm[f1.blocks[s].id] = counts[s];
        j["n_m"] = nm;
    }
    j["log_likelihood"] = sample.log_likelihood;
    j["theta"] = sample.params.to_json();
    return j;
}

IdLinkage sample_from_json(const nlohmann::json& j) {
    IdLinkage out;
    try {
        out.iteration = j.value("iteration", 0);
        out.blocked = j.value("blocked", true);
        out.blocks = j.value("blocks", decltype(out.blocks){});
        out.links = j.at("links").get<decltype(out.links)>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed sample: ") + e.what());
    }
    return out;
}

std::vector<IdLinkage> read_samples(const fs::path& path) {
    auto in = open_in(path);
    std::vector<IdLinkage> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip_cr(line).empty()) continue;
        try {
            out.push_back(sample_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_truth(const fs::path& blocks_csv, const fs::path& links_csv, const GroundTruth& truth,
                 const BlockedFile& f1, const BlockedFile& f2) {
    const IdLinkage ids = to_ids(truth, f1, f2);
    std::ostringstream b, l;
    b << "file1_block_id,file2_block_id\n";
    for (const auto& [x, y] : ids.blocks) b << csv_field(x) << ',' << csv_field(y) << '\n';
    l << "file1_record_id,file2_record_id\n";
    for (const auto& [x, y] : ids.links) l << csv_field(x) << ',' << csv_field(y) << '\n';
    write_text(blocks_csv, b.str());
    write_text(links_csv, l.str());
}

IdLinkage read_truth(const fs::path& blocks_csv, const fs::path& links_csv) {
    IdLinkage out;
    auto read_pairs = [](const fs::path& path) {
        auto in = open_in(path);
        std::vector<std::pair<std::string, std::string>> pairs;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            line = strip_cr(line);
            if (line_no == 1 || line.empty()) continue;
            const auto cells = split_csv(line, path, line_no);
            if (cells.size() != 2) throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 2 fields");
            pairs.emplace_back(cells[0], cells[1]);
        }
        return pairs;
    };
    out.blocks = read_pairs(blocks_csv);
    out.links = read_pairs(links_csv);
    return out;
}

LinkageMetrics evaluate_ids(const IdLinkage& sample, const IdLinkage& truth) {
    LinkageMetrics m;
    const std::set<std::pair<std::string, std::string>> t(truth.links.begin(), truth.links.end());
    std::size_t tp = 0;
    for (const auto& l : sample.links) tp += t.count(l);
    m.tpr = t.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(t.size());
    m.ppv_degenerate = sample.links.empty();
    m.ppv = sample.links.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(sample.links.size());
    m.f1 = (m.tpr + m.ppv) > 0.0 ? 2.0 * m.tpr * m.ppv / (m.tpr + m.ppv) : 0.0;
    if (sample.blocked && !truth.blocks.empty()) {
        m.has_acc = true;
        const std::set<std::pair<std::string, std::string>> sb(sample.blocks.begin(), sample.blocks.end());
        std::size_t hits = 0;
        for (const auto& p : truth.blocks) hits += sb.count(p);
        m.acc = static_cast<double>(hits) / static_cast<double>(truth.blocks.size());
    }
    return m;
}

void LinkFrequencies::add(const PosteriorSample& sample) {
    ++n_;
    if (sample.blocked)
        for (std::size_t s = 0; s < sample.blocks.size() && s < S_; ++s)
            if (sample.blocks[s] >= 0) ++blocks_[s * T_ + static_cast<std::size_t>(sample.blocks[s])];
    for (const auto& l : sample.links) ++records_[l];
}

namespace {

std::string log_freq(std::uint64_t count, std::size_t n) {
    if (count == 0 || n == 0) return "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", std::log(static_cast<double>(count) / static_cast<double>(n)));
    return buf;
}

}  // namespace

void LinkFrequencies::write_block_matrix(const fs::path& path, const BlockedFile& f1, const BlockedFile& f2) const {
    std::ostringstream out;
    out << "file1_block_id";
    for (std::size_t t = 0; t < T_; ++t) out << ',' << csv_field(f2.blocks[t].id);
    out << '\n';
    for (std::size_t s = 0; s < S_; ++s) {
        out << csv_field(f1.blocks[s].id);
        for (std::size_t t = 0; t < T_; ++t) out << ',' << log_freq(blocks_[s * T_ + t], n_);
        out << '\n';
    }
    write_text(path, out.str());
}

void LinkFrequencies::write_record_matrix(const fs::path& path, const BlockedFile& f1, const BlockedFile& f2) const {
    std::ostringstream out;
    out << "file1_record_id,file2_record_id,log_prob\n";
    for (const auto& [l, count] : records_)
        out << csv_field(f1.blocks[static_cast<std::size_t>(l.s)].records[static_cast<std::size_t>(l.i)].id) << ','
            << csv_field(f2.blocks[static_cast<std::size_t>(l.t)].records[static_cast<std::size_t>(l.j)].id) << ','
            << log_freq(count, n_) << '\n';
    write_text(path, out.str());
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace reclink
