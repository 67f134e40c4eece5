#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace netchoice {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t default_seed = 0x5eedULL;

/// Independent generator for stream `stream` of `seed`. Results depend only on the pair,
/// so work split across any number of threads draws identical numbers.
inline Rng substream(std::uint64_t seed, std::uint64_t stream) {
    auto mix = [](std::uint64_t z) { // splitmix64 finalizer
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    const std::uint64_t a = mix(seed);
    const std::uint64_t b = mix(a ^ mix(stream + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return Rng(seq);
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = hardware concurrency).
/// Each index runs exactly once; callers write results into per-index slots.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) fn(i);
        });
}

} // namespace netchoice
