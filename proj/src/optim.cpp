#include "freqshield/optim.hpp"

#include <cmath>

#include "freqshield/errors.hpp"

namespace freqshield {

Adam::Adam(AdamConfig config, std::span<const Tensor> params) : config_(config) {
    for (const Tensor& p : params) {
        m_.emplace_back(p.shape(), 0.0);
        v_.emplace_back(p.shape(), 0.0);
    }
}

void Adam::step(std::span<Tensor> params, std::span<const Tensor> grads, double learning_rate) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ShapeError("Adam::step: parameter count changed");
    }
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = params[k];
        const Tensor& g = grads[k];
        require_same_shape(p, g, "Adam::step");
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
        }
    }
}

double halved_learning_rate(double base, long iteration, long interval) {
    if (interval <= 0) return base;
    return base * std::ldexp(1.0, -static_cast<int>(iteration / interval));
}

}  // namespace freqshield
