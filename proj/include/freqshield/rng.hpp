#pragma once

#include <cstdint>

namespace freqshield {

/// Counter-based random stream. Draw i is a SplitMix64 finalization of (seed, i), so the
/// sequence depends only on the seed and is identical on every platform. Streams are
/// single-owner; derive independent children with split() instead of sharing one.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    /// 1 with probability p, 0 otherwise. Consumes exactly one draw.
    int bernoulli(double p);

    /// Child stream keyed by `stream_id`; does not advance this stream.
    RngStream split(std::uint64_t stream_id) const noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace freqshield
