#include "freqshield/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace freqshield {

namespace {

double smoothstep_edge(double signed_distance, double softness) {
    return 1.0 / (1.0 + std::exp(-signed_distance / softness));
}

void blend(Tensor& img, int y, int x, const double* color, double weight) {
    for (int c = 0; c < 3; ++c) img(y, x, c) = (1.0 - weight) * img(y, x, c) + weight * color[c];
}

}  // namespace

Tensor make_toy_image(int height, int width, RngStream& stream) {
    Tensor img(height, width, 3);
    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = stream.uniform(0.2, 0.8);
        gx[c] = stream.uniform(-0.3, 0.3);
        gy[c] = stream.uniform(-0.3, 0.3);
    }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c)
                img(y, x, c) = base[c] + gx[c] * (x / double(width) - 0.5) + gy[c] * (y / double(height) - 0.5);

    // Low-frequency grating.
    {
        const double amp = stream.uniform(0.02, 0.08);
        const double freq = stream.uniform(0.5, 2.0) * 2.0 * std::numbers::pi / std::max(height, width);
        const double theta = stream.uniform(0.0, std::numbers::pi);
        const double phase = stream.uniform(0.0, 2.0 * std::numbers::pi);
        const double ct = std::cos(theta), st = std::sin(theta);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double v = amp * std::sin(freq * (ct * x + st * y) + phase);
                for (int c = 0; c < 3; ++c) img(y, x, c) += v;
            }
    }

    const int shapes = 2 + static_cast<int>(stream.below(3));
    for (int s = 0; s < shapes; ++s) {
        double color[3];
        for (double& c : color) c = stream.uniform(0.05, 0.95);
        const double cy = stream.uniform(0.0, height);
        const double cx = stream.uniform(0.0, width);
        const double softness = stream.uniform(0.6, 1.5);
        const bool disc = stream.uniform() < 0.5;
        const double radius = stream.uniform(0.12, 0.35) * std::min(height, width);
        const double half_len = stream.uniform(0.2, 0.5) * std::max(height, width);
        const double half_wid = stream.uniform(0.06, 0.15) * std::min(height, width);
        const double theta = stream.uniform(0.0, std::numbers::pi);
        const double ct = std::cos(theta), st = std::sin(theta);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double dy = y + 0.5 - cy;
                const double dx = x + 0.5 - cx;
                double inside;
                if (disc) {
                    inside = radius - std::hypot(dx, dy);
                } else {
                    const double along = std::abs(ct * dx + st * dy);
                    const double across = std::abs(-st * dx + ct * dy);
                    inside = std::min(half_len - along, half_wid - across);
                }
                blend(img, y, x, color, smoothstep_edge(inside, softness));
            }
    }

    const int blobs = 1 + static_cast<int>(stream.below(3));
    for (int b = 0; b < blobs; ++b) {
        double color[3];
        for (double& c : color) c = stream.uniform(0.0, 1.0);
        const double cy = stream.uniform(0.0, height);
        const double cx = stream.uniform(0.0, width);
        const double sigma = stream.uniform(0.08, 0.25) * std::min(height, width);
        const double strength = stream.uniform(0.3, 0.7);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                blend(img, y, x, color, strength * std::exp(-d2 / (2.0 * sigma * sigma)));
            }
    }
    return clamp(img, 0.0, 1.0);
}

PairedDataset make_toy_dataset(int count, int lr_side, int scale, RngStream& stream) {
    PairedDataset data;
    data.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        Tensor hr = make_toy_image(lr_side * scale, lr_side * scale, stream);
        Tensor lr = area_downsample(hr, scale);
        data.push_back(PatchPair{std::move(lr), std::move(hr)});
    }
    return data;
}

}  // namespace freqshield
