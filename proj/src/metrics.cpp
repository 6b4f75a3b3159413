#include "freqshield/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "freqshield/errors.hpp"

namespace freqshield {

double psnr(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "psnr");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> taps{};
    double total = 0.0;
    const int half = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        total += taps[i];
    }
    for (double& t : taps) t /= total;
    return taps;
}

// Separable 'valid' Gaussian filtering of one channel: (H-10) x (W-10) result.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::array<double, kSsimWindow>& taps) {
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * img[static_cast<std::size_t>(y) * w + x + k];
            rows[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "ssim");
    const int h = a.height();
    const int w = a.width();
    if (h < kSsimWindow || w < kSsimWindow) {
        throw ShapeError("ssim: image " + to_string(a.shape()) + " smaller than the 11x11 window");
    }
    const auto taps = gaussian_taps();
    const std::size_t n = static_cast<std::size_t>(h) * w;
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a[i * a.channels() + c];
            y[i] = b[i * b.channels() + c];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, h, w, taps);
        const auto my = filter_valid(y, h, w, taps);
        const auto sxx = filter_valid(xx, h, w, taps);
        const auto syy = filter_valid(yy, h, w, taps);
        const auto sxy = filter_valid(xy, h, w, taps);
        double acc = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            acc += ((2.0 * mx[i] * my[i] + kSsimC1) * (2.0 * cov + kSsimC2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + kSsimC1) * (vx + vy + kSsimC2));
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / a.channels();
}

MetricReport evaluate_pair(const Tensor& output, const Tensor& reference) {
    return MetricReport{psnr(output, reference), ssim(output, reference)};
}

std::string format_psnr(double psnr_db, int digits) {
    if (std::isinf(psnr_db)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, psnr_db);
    return buf;
}

}  // namespace freqshield
