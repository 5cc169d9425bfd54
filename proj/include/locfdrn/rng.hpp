#pragma once

#include <cstdint>
#include <random>

namespace locfdrn {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; used to derive independent stream seeds.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// A seed from which per-replicate generators are derived deterministically.
/// Stream (s, r) never depends on how many other streams were drawn, so
/// replicates can be computed in any order or on any worker.
struct SeedStream {
    std::uint64_t seed = 0;

    [[nodiscard]] SeedStream child(std::uint64_t tag) const noexcept {
        return SeedStream{mix64(seed ^ mix64(tag + 0x632be59bd9b4e019ULL))};
    }

    [[nodiscard]] Rng replicate(std::uint64_t r) const {
        const std::uint64_t s = mix64(mix64(seed) + mix64(r ^ 0xd1b54a32d192ed03ULL));
        std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                          static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32)};
        return Rng(seq);
    }
};

}  // namespace locfdrn
