#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace ecl {

/// Deterministic splittable RNG. A (seed, stream_id) pair fully determines the
/// draw sequence, independent of platform and of any other stream, so parallel
/// consumers never perturb each other. The core is the splitmix64 output
/// function applied to a Weyl-sequence counter; distributions are derived from
/// the raw 64-bit stream here rather than through std::<distribution> (whose
/// output is implementation-defined).
class SeededRng {
public:
    SeededRng(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id), state_(mix(mix(seed) ^ mix(~stream_id))) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    /// Derive an independent child stream; the child depends only on
    /// (seed, stream_id, tag), never on how much this stream has been consumed.
    SeededRng fork(std::uint64_t tag) const {
        return SeededRng(seed_, mix(stream_id_ ^ mix(tag + 0x632BE59BD9B4E019ULL)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t uniform_int(std::uint64_t bound) {
        // Fixed-point multiply keeps the draw count per call constant, which
        // matters for reproducible interleaving; the bias is O(bound / 2^64).
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    /// Standard normal via Box-Muller. Always consumes exactly two uniforms.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Standard exponential (rate 1).
    double exponential() { return -std::log1p(-uniform()); }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t state_;
};

/// Stream-id registry. Trainers and stream builders draw from disjoint streams
/// so that e.g. adding ensemble members never shifts member 1's draws.
namespace streams {
constexpr std::uint64_t kBenchmark = 0x0100000000ULL;
inline std::uint64_t member_init(std::size_t i) { return 0x0200000000ULL + i; }
inline std::uint64_t dropout(std::size_t task, std::size_t member) {
    return 0x0300000000ULL + (task << 16) + member;
}
inline std::uint64_t shuffle(std::size_t task, std::size_t epoch) {
    return 0x0400000000ULL + (task << 16) + epoch;
}
inline std::uint64_t alpha(std::size_t task) { return 0x0500000000ULL + task; }
inline std::uint64_t assignment(std::size_t task) { return 0x0600000000ULL + task; }
inline std::uint64_t buffer(std::size_t task) { return 0x0700000000ULL + task; }
inline std::uint64_t connect(std::size_t task) { return 0x0800000000ULL + task; }
inline std::uint64_t perturb(std::size_t task, std::size_t member) {
    return 0x0900000000ULL + (task << 16) + member;
}
constexpr std::uint64_t kFastInit = 0x0A00000000ULL;
}  // namespace streams

}  // namespace ecl
