#pragma once

#include <cstdint>
#include <string_view>

namespace agbs::hashing {

// splitmix64 finalizer. Used as the mixing core for every deterministic
// hash in the project so results are identical across platforms.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a over bytes, then one splitmix round to spread low-entropy inputs.
constexpr std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Map a hash to the open interval (0, 1). The +0.5 offset keeps 0 and 1
// unreachable, which the mock backend's softmax relies on.
constexpr double to_unit_open(std::uint64_t h) {
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Map a hash to [-1, 1].
constexpr double to_signed_unit(std::uint64_t h) {
    return 2.0 * to_unit_open(h) - 1.0;
}

// Minimal deterministic PRNG for reproducible sampling. std::shuffle and
// std::uniform_int_distribution are implementation-defined, so corpus
// sampling uses this instead: a splitmix64 stream with rejection sampling
// for bounded draws. Same (seed, n) always yields the same permutation.
class SplitMixRng {
public:
    explicit SplitMixRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64(state_);
    }

    // Uniform draw from [0, bound) without modulo bias.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % bound;
    }

private:
    std::uint64_t state_;
};

}  // namespace agbs::hashing
