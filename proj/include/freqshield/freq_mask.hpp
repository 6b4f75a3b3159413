#pragma once

#include <cstdint>
#include <vector>

#include "freqshield/dct.hpp"
#include "freqshield/rng.hpp"
#include "freqshield/tensor.hpp"

namespace freqshield {

enum class MaskMode {
    /// Threshold r_t ~ U[r_lower, r_upper]; above it, each coefficient is dropped with
    /// probability equal to its normalized radius.
    Random,
    /// Hard low-pass at (r_lower + r_upper) / 2 with no sampling.
    FixedCutoff,
};

struct MaskPolicy {
    double r_lower = 0.43;
    double r_upper = 0.5;
    bool resample_per_call = true;
    MaskMode mode = MaskMode::Random;

    /// Throws InvalidArgument unless 0 <= r_lower <= r_upper <= 1.
    void validate() const;

    static MaskPolicy all_pass() { return MaskPolicy{1.0, 1.0, true, MaskMode::Random}; }
};

/// Binary keep (1) / drop (0) decision per DCT coefficient, shared by all channels.
class BinaryMask {
public:
    BinaryMask(int height, int width, std::vector<std::uint8_t> bits, double threshold,
               std::uint64_t seed);

    static BinaryMask all_ones(int height, int width);
    static BinaryMask all_zeros(int height, int width);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool keep(int u, int v) const noexcept { return bits_[static_cast<std::size_t>(u) * width_ + v] != 0; }
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
    double threshold_used() const noexcept { return threshold_; }
    std::uint64_t seed_used() const noexcept { return seed_; }
    std::size_t kept_count() const noexcept;

private:
    int height_;
    int width_;
    std::vector<std::uint8_t> bits_;
    double threshold_;
    std::uint64_t seed_;
};

/// r(u, v) = sqrt(u^2 + v^2) / sqrt((H-1)^2 + (W-1)^2) as an H x W x 1 tensor.
/// Throws ShapeError for a 1 x 1 map, whose maximum radius is zero.
Tensor radius_map(int height, int width);

/// Draws one mask. Coefficients with r <= r_t are always kept; the rest are kept with
/// probability 1 - r. Only the draws for those coefficients (plus one for r_t) consume
/// the stream.
BinaryMask sample_mask(int height, int width, const MaskPolicy& policy, RngStream& stream);

/// idct2(mask * dct2(x)), the mask applied to every channel slice.
Tensor apply_mask(const Tensor& x, const BinaryMask& mask);

/// The mask module. gate == false returns x untouched. With resample_per_call == false
/// the mask is drawn from a copy of the stream, so every call reuses the same mask.
Tensor mask_module_forward(const Tensor& x, const MaskPolicy& policy, bool gate, RngStream& stream);

}  // namespace freqshield
