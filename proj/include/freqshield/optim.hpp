#pragma once

#include <span>
#include <vector>

#include "freqshield/tensor.hpp"

namespace freqshield {

struct AdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive moment estimation with bias correction.
class Adam {
public:
    Adam(AdamConfig config, std::span<const Tensor> params);

    /// One update with an explicit step size (the caller owns the schedule).
    void step(std::span<Tensor> params, std::span<const Tensor> grads, double learning_rate);

    long steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    long t_ = 0;
};

/// base * 0.5^floor(iteration / interval); interval <= 0 disables halving.
double halved_learning_rate(double base, long iteration, long interval);

}  // namespace freqshield
