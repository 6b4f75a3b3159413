#pragma once

#include <string>

#include "freqshield/tensor.hpp"

namespace freqshield {

struct MetricReport {
    double psnr_db = 0.0;  ///< +infinity for identical inputs
    double ssim = 0.0;
};

/// 10 log10(1 / MSE) for [0, 1] images. Identical inputs give +infinity.
double psnr(const Tensor& a, const Tensor& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5, dynamic range 1),
/// computed per channel and averaged. Both sides must be at least 11 pixels.
double ssim(const Tensor& a, const Tensor& b);

MetricReport evaluate_pair(const Tensor& output, const Tensor& reference);

/// "inf" for the identical-input sentinel, otherwise fixed notation with `digits` decimals.
std::string format_psnr(double psnr_db, int digits = 4);

}  // namespace freqshield
