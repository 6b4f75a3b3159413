#pragma once

// Reference implementations used only by tests. They follow the textbook definitions
// directly and share no code with the library paths they check.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "freqshield/rng.hpp"
#include "freqshield/tensor.hpp"

namespace oracle {

using freqshield::Tensor;

inline double dct_coef(int k, int n) { return k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n); }

/// X^(u,v) = c(u) c(v) sum_i sum_j X(i,j) cos((i+0.5) pi u / H) cos((j+0.5) pi v / W)
inline Tensor direct_dct2(const Tensor& x) {
    const int h = x.height(), w = x.width();
    Tensor out(x.shape());
    for (int c = 0; c < x.channels(); ++c)
        for (int u = 0; u < h; ++u)
            for (int v = 0; v < w; ++v) {
                double acc = 0.0;
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j)
                        acc += x(i, j, c) * std::cos((i + 0.5) * std::numbers::pi / h * u) *
                               std::cos((j + 0.5) * std::numbers::pi / w * v);
                out(u, v, c) = dct_coef(u, h) * dct_coef(v, w) * acc;
            }
    return out;
}

inline Tensor direct_idct2(const Tensor& s) {
    const int h = s.height(), w = s.width();
    Tensor out(s.shape());
    for (int c = 0; c < s.channels(); ++c)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double acc = 0.0;
                for (int u = 0; u < h; ++u)
                    for (int v = 0; v < w; ++v)
                        acc += dct_coef(u, h) * dct_coef(v, w) * s(u, v, c) *
                               std::cos((i + 0.5) * std::numbers::pi / h * u) *
                               std::cos((j + 0.5) * std::numbers::pi / w * v);
                out(i, j, c) = acc;
            }
    return out;
}

inline Tensor random_tensor(int h, int w, int c, freqshield::RngStream& s, double lo = -1.0, double hi = 1.0) {
    Tensor t(h, w, c);
    for (double& v : t.values()) v = s.uniform(lo, hi);
    return t;
}

/// Central differences of a scalar function of a tensor.
inline Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                double step = 1e-4) {
    Tensor g(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = probe[i];
        probe[i] = keep + step;
        const double up = f(probe);
        probe[i] = keep - step;
        const double down = f(probe);
        probe[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

/// ||a - b|| / max(||a||, ||b||, floor): relative error robust to tiny gradients.
inline double gradient_rel_error(const Tensor& a, const Tensor& b, double floor = 1e-8) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

/// Zero-padded 'same' convolution with kernel laid out (K*K) x Cin x Cout.
inline Tensor naive_conv(const Tensor& in, const Tensor& k, const Tensor& b) {
    const int ks = static_cast<int>(std::lround(std::sqrt(k.height())));
    const int pad = ks / 2;
    Tensor out(in.height(), in.width(), k.channels());
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x)
            for (int co = 0; co < k.channels(); ++co) {
                double acc = b(0, 0, co);
                for (int ky = 0; ky < ks; ++ky)
                    for (int kx = 0; kx < ks; ++kx) {
                        const int iy = y + ky - pad, ix = x + kx - pad;
                        if (iy < 0 || ix < 0 || iy >= in.height() || ix >= in.width()) continue;
                        for (int ci = 0; ci < in.channels(); ++ci) acc += in(iy, ix, ci) * k(ky * ks + kx, ci, co);
                    }
                out(y, x, co) = acc;
            }
    return out;
}

/// Direct windowed SSIM: explicit 11x11 Gaussian sums at every valid window position.
inline double direct_ssim(const Tensor& a, const Tensor& b) {
    const int win = 11;
    const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
    double wts[11][11];
    double total = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            wts[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * sigma * sigma));
            total += wts[i][j];
        }
    double per_channel = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double acc = 0.0;
        int count = 0;
        for (int y = 0; y + win <= a.height(); ++y)
            for (int x = 0; x + win <= a.width(); ++x) {
                double mx = 0, my = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        mx += wts[i][j] / total * a(y + i, x + j, c);
                        my += wts[i][j] / total * b(y + i, x + j, c);
                    }
                double vx = 0, vy = 0, cov = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double w = wts[i][j] / total;
                        const double dx = a(y + i, x + j, c) - mx, dy = b(y + i, x + j, c) - my;
                        vx += w * dx * dx;
                        vy += w * dy * dy;
                        cov += w * dx * dy;
                    }
                acc += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
        per_channel += acc / count;
    }
    return per_channel / a.channels();
}

}  // namespace oracle
