#pragma once

#include <cstdint>

namespace sstm {

/// SplitMix64 finalizer. Used to turn (base, index) pairs into
/// well-separated seeds for independent random streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of stream `index` under `base`. Run m of a Monte Carlo experiment
/// uses derive_seed(base, m) for m = 1..M.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace sstm
