#include "freqshield/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "freqshield/errors.hpp"

namespace freqshield {

std::string to_string(const Shape& shape) {
    return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
           std::to_string(shape.channels);
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
        throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
    }
}

}  // namespace

Tensor::Tensor(int height, int width, int channels, double fill)
    : Tensor(Shape{height, width, channels}, fill) {}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
    validate_shape(shape_);
    data_.assign(shape_.size(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_.size()) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape_));
    }
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape.size() != size()) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Tensor(shape, data_);
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

namespace {

template <typename Op>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, Op op) {
    require_same_shape(a, b, what);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor subtract(const Tensor& a, const Tensor& b) {
    return zip(a, b, "subtract", [](double x, double y) { return x - y; });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
    return zip(a, b, "multiply", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double factor) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
    return out;
}

void add_in_place(Tensor& target, const Tensor& other) {
    require_same_shape(target, other, "add_in_place");
    for (std::size_t i = 0; i < target.size(); ++i) target[i] += other[i];
}

double sum(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v;
    return s;
}

double max_abs(const Tensor& t) {
    double m = 0.0;
    for (double v : t.values()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_difference(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_difference");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double relative_l2_error(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "relative_l2_error");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

Tensor channel_slice(const Tensor& t, int channel) {
    if (channel < 0 || channel >= t.channels()) throw ShapeError("channel index out of range");
    Tensor out(t.height(), t.width(), 1);
    for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x) out(y, x, 0) = t(y, x, channel);
    return out;
}

Tensor broadcast_channels(const Tensor& t, int channels) {
    if (t.channels() != 1 || channels == 1) return t;
    Tensor out(t.height(), t.width(), channels);
    for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x)
            for (int c = 0; c < channels; ++c) out(y, x, c) = t(y, x, 0);
    return out;
}

Tensor crop(const Tensor& t, int y, int x, int height, int width) {
    if (y < 0 || x < 0 || height <= 0 || width <= 0 || y + height > t.height() ||
        x + width > t.width()) {
        throw ShapeError("crop window outside tensor " + to_string(t.shape()));
    }
    Tensor out(height, width, t.channels());
    const std::size_t row = static_cast<std::size_t>(width) * t.channels();
    for (int r = 0; r < height; ++r) {
        const auto src = t.values().subspan(t.index(y + r, x, 0), row);
        std::copy(src.begin(), src.end(), out.values().begin() + out.index(r, 0, 0));
    }
    return out;
}

Tensor area_downsample(const Tensor& t, int factor) {
    if (factor <= 0 || t.height() % factor != 0 || t.width() % factor != 0) {
        throw ShapeError("area_downsample: " + to_string(t.shape()) + " not divisible by " +
                         std::to_string(factor));
    }
    Tensor out(t.height() / factor, t.width() / factor, t.channels());
    const double norm = 1.0 / (factor * factor);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < t.channels(); ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) acc += t(y * factor + dy, x * factor + dx, c);
                out(y, x, c) = acc * norm;
            }
    return out;
}

Tensor nearest_upsample(const Tensor& t, int factor) {
    if (factor <= 0) throw ShapeError("nearest_upsample: factor must be positive");
    Tensor out(t.height() * factor, t.width() * factor, t.channels());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < t.channels(); ++c) out(y, x, c) = t(y / factor, x / factor, c);
    return out;
}

Tensor clamp(const Tensor& t, double lo, double hi) {
    Tensor out(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = std::clamp(t[i], lo, hi);
    return out;
}

}  // namespace freqshield
