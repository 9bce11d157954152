#pragma once

#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

namespace rega {

// Deterministic counter-based generator (splitmix64 core). Streams are keyed
// by (seed, name) so that consuming one stream never perturbs another; the
// same key always yields the same sequence, on every platform. This is the
// single randomness source of the whole pipeline — std::shuffle and the
// std <random> distributions are implementation-defined and would break
// byte-for-byte reproducibility across toolchains.
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed) : state_(seed) {}

    // Sub-stream keyed by (seed, name).
    DeterministicRng(std::uint64_t seed, std::string_view name)
        : state_(mix(seed ^ fnv1a(name))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0, n). Multiply-shift bound; bias is < 2^-53 for any n
    // this project uses.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Seeded permutation of {0..n-1}.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        shuffle(idx);
        return idx;
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

} // namespace rega
