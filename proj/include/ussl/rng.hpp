#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ussl {

using Rng = std::mt19937_64;

// Named sub-streams. Every random decision in a run is drawn from an engine seeded
// by mixing (run seed, stream, coordinates...), so results depend only on those
// coordinates and not on call order or thread placement.
enum class Stream : std::uint64_t {
    dataset = 1,
    test_set = 2,
    split = 3,
    init = 4,
    sampler = 5,
    labeled_weak = 6,
    guess = 7,
    unlabeled_strong = 8,
    export_views = 9,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
    std::uint64_t h = splitmix64(seed);
    for (auto c : coords) h = splitmix64(h ^ c);
    return h;
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> coords = {}) {
    std::uint64_t h = mix_seed(seed, {static_cast<std::uint64_t>(stream)});
    for (auto c : coords) h = splitmix64(h ^ c);
    return Rng(h);
}

}  // namespace ussl
