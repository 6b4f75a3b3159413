#include "freqshield/dct.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "freqshield/errors.hpp"

namespace freqshield {

namespace {

// basis[u * n + i] = c(u) cos((i + 0.5) pi u / n)
const std::vector<double>& dct_basis(int n) {
    thread_local std::map<int, std::vector<double>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> basis(static_cast<std::size_t>(n) * n);
    const double c0 = std::sqrt(1.0 / n);
    const double ck = std::sqrt(2.0 / n);
    for (int u = 0; u < n; ++u) {
        const double cu = u == 0 ? c0 : ck;
        for (int i = 0; i < n; ++i) {
            basis[static_cast<std::size_t>(u) * n + i] =
                cu * std::cos((i + 0.5) * std::numbers::pi * u / n);
        }
    }
    return cache.emplace(n, std::move(basis)).first->second;
}

// Applies out[k] = sum_j M(k, j) in[j] along the row axis (inverse=false) where
// M = basis, or along the transposed basis (inverse=true).
Tensor transform_rows(const Tensor& in, bool inverse) {
    const int h = in.height();
    const int row = in.width() * in.channels();
    const auto& basis = dct_basis(h);
    Tensor out(in.shape());
    for (int k = 0; k < h; ++k) {
        double* dst = &out[static_cast<std::size_t>(k) * row];
        for (int j = 0; j < h; ++j) {
            const double m = inverse ? basis[static_cast<std::size_t>(j) * h + k]
                                     : basis[static_cast<std::size_t>(k) * h + j];
            const double* src = &in[static_cast<std::size_t>(j) * row];
            for (int e = 0; e < row; ++e) dst[e] += m * src[e];
        }
    }
    return out;
}

Tensor transform_cols(const Tensor& in, bool inverse) {
    const int h = in.height();
    const int w = in.width();
    const int c = in.channels();
    const auto& basis = dct_basis(w);
    Tensor out(in.shape());
    for (int y = 0; y < h; ++y) {
        for (int k = 0; k < w; ++k) {
            double* dst = &out[out.index(y, k, 0)];
            for (int j = 0; j < w; ++j) {
                const double m = inverse ? basis[static_cast<std::size_t>(j) * w + k]
                                         : basis[static_cast<std::size_t>(k) * w + j];
                const double* src = &in[in.index(y, j, 0)];
                for (int ch = 0; ch < c; ++ch) dst[ch] += m * src[ch];
            }
        }
    }
    return out;
}

}  // namespace

SpectralMap dct2(const Tensor& x) {
    if (x.empty()) throw ShapeError("dct2: empty tensor");
    return SpectralMap(transform_cols(transform_rows(x, false), false));
}

Tensor idct2(const SpectralMap& s) {
    if (s.coefficients().empty()) throw ShapeError("idct2: empty spectrum");
    return transform_cols(transform_rows(s.coefficients(), true), true);
}

Tensor spectrum_heatmap(const SpectralMap& s) {
    const Tensor& coeffs = s.coefficients();
    Tensor heat(coeffs.height(), coeffs.width(), 1);
    for (int y = 0; y < coeffs.height(); ++y) {
        for (int x = 0; x < coeffs.width(); ++x) {
            double acc = 0.0;
            for (int c = 0; c < coeffs.channels(); ++c) acc += std::abs(coeffs(y, x, c));
            heat(y, x, 0) = std::log1p(acc / coeffs.channels());
        }
    }
    const auto [lo, hi] = std::minmax_element(heat.values().begin(), heat.values().end());
    const double low = *lo;
    const double range = *hi - low;
    for (double& v : heat.values()) v = range > 0.0 ? (v - low) / range : 0.0;
    return heat;
}

double high_band_mean(const Tensor& map, double radius) {
    const double r_max = std::hypot(map.height() - 1.0, map.width() - 1.0);
    double acc = 0.0;
    int count = 0;
    for (int u = 0; u < map.height(); ++u) {
        for (int v = 0; v < map.width(); ++v) {
            if (r_max > 0.0 && std::hypot(u, v) / r_max > radius) {
                acc += map(u, v, 0);
                ++count;
            }
        }
    }
    return count > 0 ? acc / count : 0.0;
}

}  // namespace freqshield
