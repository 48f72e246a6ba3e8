#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace reclink {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stable substream seed for (seed, tag...). Independent of scheduling order,
/// so parallel workers reproduce the serial result bit for bit.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t tag : tags) h = splitmix64(h ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    return Rng(derive_seed(seed, tags));
}

inline double uniform01(Rng& rng) {
    // 53 random mantissa bits; [0, 1).
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Stream tags used by the samplers.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kBlockParams = 2;
inline constexpr std::uint64_t kRecordParams = 3;
inline constexpr std::uint64_t kSweep = 4;
inline constexpr std::uint64_t kBlockMove = 5;
inline constexpr std::uint64_t kDataset = 6;
inline constexpr std::uint64_t kErrors = 7;
inline constexpr std::uint64_t kChain = 8;
}  // namespace stream

}  // namespace reclink
