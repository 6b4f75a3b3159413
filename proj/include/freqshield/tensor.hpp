#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace freqshield {

struct Shape {
    int height = 0;
    int width = 0;
    int channels = 0;

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
               static_cast<std::size_t>(channels);
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// Dense height x width x channels array of doubles stored row-major in (h, w, c) order.
/// Images, feature maps, spectra, gradients and parameter blocks all use this type.
class Tensor {
public:
    Tensor() = default;
    Tensor(int height, int width, int channels, double fill = 0.0);
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value) { return Tensor(1, 1, 1, value); }

    const Shape& shape() const noexcept { return shape_; }
    int height() const noexcept { return shape_.height; }
    int width() const noexcept { return shape_.width; }
    int channels() const noexcept { return shape_.channels; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * shape_.width + x) * shape_.channels + c;
    }
    double& operator()(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
    const double& operator()(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    const double& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    /// Same data, new shape with the same element count.
    Tensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_{};
    std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
void add_in_place(Tensor& target, const Tensor& other);

double sum(const Tensor& t);
double max_abs(const Tensor& t);
double max_abs_difference(const Tensor& a, const Tensor& b);
/// ||a - b||_2 / ||b||_2, or the absolute norm when b is zero.
double relative_l2_error(const Tensor& a, const Tensor& b);

/// Single channel slice as an H x W x 1 tensor.
Tensor channel_slice(const Tensor& t, int channel);
/// Repeats a single-channel tensor into `channels` channels; other inputs are returned unchanged.
Tensor broadcast_channels(const Tensor& t, int channels);
/// Crops the window [y, y+height) x [x, x+width).
Tensor crop(const Tensor& t, int y, int x, int height, int width);
/// factor x factor box averaging; dimensions must be divisible by factor.
Tensor area_downsample(const Tensor& t, int factor);
/// Nearest-neighbour enlargement by an integer factor.
Tensor nearest_upsample(const Tensor& t, int factor);
Tensor clamp(const Tensor& t, double lo, double hi);

}  // namespace freqshield
