#pragma once

#include "freqshield/tensor.hpp"

namespace freqshield {

/// Per-channel orthonormal DCT-II coefficients of a tensor. Coefficient (u, v, c) uses
/// the compensation factors c(0) = sqrt(1/N), c(k > 0) = sqrt(2/N) along each axis.
class SpectralMap {
public:
    SpectralMap() = default;
    explicit SpectralMap(Tensor coefficients) : coefficients_(std::move(coefficients)) {}

    const Tensor& coefficients() const noexcept { return coefficients_; }
    Tensor& coefficients() noexcept { return coefficients_; }
    const Shape& shape() const noexcept { return coefficients_.shape(); }

private:
    Tensor coefficients_;
};

/// Separable 2D DCT-II, O(HW(H+W)) per channel. Any H, W >= 1.
SpectralMap dct2(const Tensor& x);

/// Inverse of dct2 (the matching DCT-III).
Tensor idct2(const SpectralMap& s);

/// Channel mean of |coefficient|, log1p-compressed and min-max normalized to [0, 1].
/// A flat map (including all zeros) yields all zeros.
Tensor spectrum_heatmap(const SpectralMap& s);

/// Mean of `map` (single channel) over positions whose normalized radius exceeds `radius`.
double high_band_mean(const Tensor& map, double radius);

}  // namespace freqshield
