#include "freqshield/freq_mask.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "freqshield/errors.hpp"

namespace freqshield {

void MaskPolicy::validate() const {
    if (!(r_lower >= 0.0 && r_lower <= r_upper && r_upper <= 1.0)) {
        throw InvalidArgument("mask policy bounds must satisfy 0 <= r_lower <= r_upper <= 1, got [" +
                              std::to_string(r_lower) + ", " + std::to_string(r_upper) + "]");
    }
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> bits, double threshold,
                       std::uint64_t seed)
    : height_(height), width_(width), bits_(std::move(bits)), threshold_(threshold), seed_(seed) {
    if (height <= 0 || width <= 0 || bits_.size() != static_cast<std::size_t>(height) * width) {
        throw ShapeError("BinaryMask: bit count does not match " + std::to_string(height) + "x" +
                         std::to_string(width));
    }
}

BinaryMask BinaryMask::all_ones(int height, int width) {
    return BinaryMask(height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 1),
                      1.0, 0);
}

BinaryMask BinaryMask::all_zeros(int height, int width) {
    return BinaryMask(height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 0),
                      0.0, 0);
}

std::size_t BinaryMask::kept_count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Tensor radius_map(int height, int width) {
    if (height <= 0 || width <= 0) throw ShapeError("radius_map: dimensions must be positive");
    const double r_max = std::hypot(height - 1.0, width - 1.0);
    if (r_max == 0.0) throw ShapeError("radius_map: 1x1 map has zero maximum radius");
    Tensor r(height, width, 1);
    for (int u = 0; u < height; ++u)
        for (int v = 0; v < width; ++v) r(u, v, 0) = std::hypot(static_cast<double>(u), v) / r_max;
    return r;
}

BinaryMask sample_mask(int height, int width, const MaskPolicy& policy, RngStream& stream) {
    policy.validate();
    const Tensor r = radius_map(height, width);
    const std::uint64_t seed = stream.seed();
    std::vector<std::uint8_t> bits(r.size(), 1);

    if (policy.mode == MaskMode::FixedCutoff) {
        const double cutoff = 0.5 * (policy.r_lower + policy.r_upper);
        for (std::size_t i = 0; i < r.size(); ++i) bits[i] = r[i] <= cutoff ? 1 : 0;
        return BinaryMask(height, width, std::move(bits), cutoff, seed);
    }

    const double threshold = stream.uniform(policy.r_lower, policy.r_upper);
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i] > threshold) bits[i] = stream.bernoulli(r[i]) == 1 ? 0 : 1;
    }
    return BinaryMask(height, width, std::move(bits), threshold, seed);
}

Tensor apply_mask(const Tensor& x, const BinaryMask& mask) {
    if (x.height() != mask.height() || x.width() != mask.width()) {
        throw ShapeError("apply_mask: mask " + std::to_string(mask.height()) + "x" +
                         std::to_string(mask.width()) + " does not match tensor " + to_string(x.shape()));
    }
    SpectralMap spectrum = dct2(x);
    Tensor& coeffs = spectrum.coefficients();
    for (int u = 0; u < x.height(); ++u) {
        for (int v = 0; v < x.width(); ++v) {
            if (mask.keep(u, v)) continue;
            for (int c = 0; c < x.channels(); ++c) coeffs(u, v, c) = 0.0;
        }
    }
    return idct2(spectrum);
}

Tensor mask_module_forward(const Tensor& x, const MaskPolicy& policy, bool gate, RngStream& stream) {
    if (!gate) return x;
    if (policy.resample_per_call) {
        return apply_mask(x, sample_mask(x.height(), x.width(), policy, stream));
    }
    RngStream frozen = stream;
    return apply_mask(x, sample_mask(x.height(), x.width(), policy, frozen));
}

}  // namespace freqshield
