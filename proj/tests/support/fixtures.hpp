#pragma once
// Small builders for hand-made blocked files and random fixtures.

#include <string>
#include <vector>

#include "reclink/comparison.hpp"
#include "reclink/rng.hpp"

namespace reclink::testing {

using Values = std::vector<Value>;

/// blocks[s] = (block values, record value rows).
struct BlockSpec {
    Values values;
    std::vector<Values> records;
};

inline BlockedFile make_file(const std::string& prefix, const std::vector<BlockSpec>& blocks) {
    BlockedFile f;
    f.file_id = prefix;
    for (std::size_t s = 0; s < blocks.size(); ++s) {
        Block b;
        b.id = prefix + "B" + std::to_string(s);
        b.values = blocks[s].values;
        for (std::size_t i = 0; i < blocks[s].records.size(); ++i)
            b.records.push_back({prefix + std::to_string(s) + "_" + std::to_string(i), blocks[s].records[i], {}});
        f.blocks.push_back(std::move(b));
    }
    return f;
}

/// One binary block variable and K binary record variables.
inline ComparisonSchema binary_schema(std::size_t P, std::size_t K) {
    ComparisonSchema s;
    for (std::size_t p = 0; p < P; ++p) s.block.push_back(ComparisonSpec::binary("b" + std::to_string(p)));
    for (std::size_t k = 0; k < K; ++k) s.record.push_back(ComparisonSpec::binary("r" + std::to_string(k)));
    return s;
}

/// Random file with values drawn from {0, .., alphabet-1}.
inline BlockedFile random_file(const std::string& prefix, Rng& rng, std::size_t blocks, std::size_t min_n,
                               std::size_t max_n, std::size_t P, std::size_t K, std::size_t alphabet) {
    std::vector<BlockSpec> spec(blocks);
    for (auto& b : spec) {
        for (std::size_t p = 0; p < P; ++p) b.values.push_back(static_cast<double>(uniform_index(rng, alphabet)));
        const std::size_t n = min_n + uniform_index(rng, max_n - min_n + 1);
        for (std::size_t i = 0; i < n; ++i) {
            Values r;
            for (std::size_t k = 0; k < K; ++k) r.push_back(static_cast<double>(uniform_index(rng, alphabet)));
            b.records.push_back(std::move(r));
        }
    }
    return make_file(prefix, spec);
}

}  // namespace reclink::testing

#include <algorithm>
#include <numeric>

#include "reclink/model.hpp"

namespace reclink::testing {

/// Uniformly random injective B and a random one-to-one C inside every linked pair.
inline std::pair<BlockAssignment, LinkageState> random_state(const ComparisonCube& cube, Rng& rng) {
    std::vector<int> perm(cube.T());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    BlockAssignment b(std::vector<int>(perm.begin(), perm.begin() + static_cast<long>(cube.S())), cube.T());
    LinkageState c;
    for (std::size_t s = 0; s < cube.S(); ++s) {
        const auto t = static_cast<std::size_t>(b.target[s]);
        PairMatching m(cube.rows(s), cube.cols(t));
        std::vector<std::size_t> cols(cube.cols(t));
        std::iota(cols.begin(), cols.end(), 0);
        std::shuffle(cols.begin(), cols.end(), rng);
        for (std::size_t i = 0; i < m.rows() && i < cols.size(); ++i)
            if (uniform01(rng) < 0.5) m.link(i, cols[i]);
        c.pairs.push_back(std::move(m));
    }
    return {b, c};
}

/// Random strictly positive probability table with the given level counts.
inline ProbTable random_table(const std::vector<int>& levels, Rng& rng) {
    ProbTable t;
    for (int l : levels) {
        std::vector<double> p(static_cast<std::size_t>(l));
        double z = 0.0;
        for (auto& x : p) z += (x = 0.05 + uniform01(rng));
        for (auto& x : p) x /= z;
        t.probs.push_back(std::move(p));
    }
    return t;
}

inline ModelParams random_params(const ComparisonCube& cube, Rng& rng) {
    ModelParams th;
    th.block_match = random_table(cube.block_level_counts(), rng);
    th.block_nonmatch = random_table(cube.block_level_counts(), rng);
    th.record_match = random_table(cube.record_level_counts(), rng);
    th.record_nonmatch = random_table(cube.record_level_counts(), rng);
    th.record_nonblock = random_table(cube.record_level_counts(), rng);
    return th;
}

}  // namespace reclink::testing
