#include "freqshield/rng.hpp"

#include <string>

#include "freqshield/errors.hpp"

namespace freqshield {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t RngStream::next_u64() noexcept {
    ++counter_;
    return mix64(seed_ + counter_ * kGolden);
}

double RngStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("RngStream::below: empty range");
    // Rejection keeps the result unbiased for every n.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
}

int RngStream::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidArgument("bernoulli: probability " + std::to_string(p) + " outside [0, 1]");
    }
    return uniform() < p ? 1 : 0;
}

RngStream RngStream::split(std::uint64_t stream_id) const noexcept {
    return RngStream(mix64(seed_ ^ mix64(stream_id + kGolden)) + stream_id);
}

}  // namespace freqshield
