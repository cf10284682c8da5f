#ifndef VASSO_RNG_HPP
#define VASSO_RNG_HPP

#include <cstdint>
#include <vector>

#include "vasso/core.hpp"

namespace vasso {

/// Well-known stream ids. Each source of randomness in an experiment draws from
/// its own stream so that toggling one source never shifts another.
namespace streams {
inline constexpr std::uint64_t kSampler = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kGate = 3;
inline constexpr std::uint64_t kInit = 4;
inline constexpr std::uint64_t kAdversaryBatch = 5;
inline constexpr std::uint64_t kData = 6;
inline constexpr std::uint64_t kProbe = 7;
}  // namespace streams

/// Counter-based generator.
///
/// Output i of stream (seed, stream) is mix64(key + (i + 1) * G) where
/// key = mix64(seed ^ mix64(stream + G)), G = 0x9E3779B97F4A7C15 and mix64 is
/// the SplitMix64 finalizer (Stafford variant 13). Each draw is a pure function
/// of (seed, stream, counter), so sequences are reproducible bit-for-bit on any
/// platform, and distinct stream ids land on unrelated positions of the
/// Weyl sequence through the key hash.
///
/// Gaussian draws use the Box-Muller transform with both outputs consumed in
/// order.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);
    double normal();
    /// True with probability p. Always consumes exactly one draw.
    bool bernoulli(double p);

    ParamVector normal_vector(Eigen::Index dim, double stddev = 1.0);

    /// An independent generator derived from this one's seed.
    Rng fork(std::uint64_t stream) const { return Rng(seed_, stream); }

    static std::uint64_t mix64(std::uint64_t z);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace vasso

#endif  // VASSO_RNG_HPP
