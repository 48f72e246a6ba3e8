#pragma once

#include <string_view>
#include <vector>

#include "reclink/sampler.hpp"

namespace reclink {

/// Both files flattened into one block each. Block variables are copied onto
/// every record as extra record variables; forced ones stay forced, so they
/// only restrict which record pairs may link.
struct FlatProblem {
    ComparisonCube cube;
    std::vector<std::pair<int, int>> file1_index;  // flat row -> (block, record)
    std::vector<std::pair<int, int>> file2_index;  // flat column -> (block, record)
};

/// Throws ResourceError when n1 * n2 exceeds `pair_cap`.
FlatProblem prepare_flat_problem(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                 std::size_t pair_cap, unsigned threads = 1);

/// Unblocked one-to-one linkage over the whole files.
ChainDiagnostics run_brl(const FlatProblem& problem, const Hyperparams& hyper, const ChainConfig& chain,
                         const SampleSink& sink);
ChainDiagnostics run_brl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                         const HyperSpec& hyper, const ChainConfig& chain, const SampleSink& sink);
std::vector<PosteriorSample> run_brl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                     const HyperSpec& hyper, const ChainConfig& chain);

/// Block pairing from block variables alone, then record sweeps inside the
/// sampled block pairs.
ChainDiagnostics run_cibrl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                           const HyperSpec& hyper, const ChainConfig& chain, const SampleSink& sink);
std::vector<PosteriorSample> run_cibrl(const BlockedFile& f1, const BlockedFile& f2, const ComparisonSchema& schema,
                                       const HyperSpec& hyper, const ChainConfig& chain);

enum class Method { mlbrl, cibrl, brl };

std::string_view to_string(Method m);
/// Throws ValidationError on an unknown name.
Method parse_method(std::string_view text);

ChainDiagnostics run_linkage(Method method, const BlockedFile& f1, const BlockedFile& f2,
                             const ComparisonSchema& schema, const HyperSpec& hyper, const ChainConfig& chain,
                             const SampleSink& sink);

}  // namespace reclink
