#include "freqshield/attack.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "freqshield/errors.hpp"

namespace freqshield {

double AttackConfig::step_size() const {
    if (step) return *step;
    return iterations > 0 ? 2.0 * alpha / iterations : 0.0;
}

void AttackConfig::validate() const {
    if (!(alpha >= 0.0)) throw InvalidArgument("attack: alpha must be non-negative");
    if (iterations <= 0) throw InvalidArgument("attack: iterations must be positive");
    if (alpha > 0.0 && !(step_size() > 0.0)) {
        throw InvalidArgument("attack: step must be positive when alpha > 0");
    }
    if (!(clamp_lo < clamp_hi)) throw InvalidArgument("attack: empty clamp range");
}

AttackConfig attack_from_numerator(int numerator, int iterations) {
    AttackConfig config;
    config.alpha = numerator / 255.0;
    config.iterations = iterations;
    return config;
}

Tensor BackboneAttackModel::predict(const Tensor& x) {
    return forward(x, params_, config_, gate_, streams_).sr;
}

LossAndGradient BackboneAttackModel::loss_gradient(const Tensor& x, const Tensor& target) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    vars.reserve(params_.tensors.size());
    for (const Tensor& t : params_.tensors) vars.push_back(tape.constant(t));
    const ad::Var input = tape.leaf(x);
    const GraphOutput out = forward_graph(input, vars, config_, gate_, streams_);
    const ad::Var loss = sr_loss(out, target);
    tape.backward(loss);
    return LossAndGradient{loss.value()[0], tape.gradient(input)};
}

Tensor basic_attack(const Tensor& x, const Tensor& hr, AttackModel& model, const AttackConfig& config,
                    const IterateObserver& observer) {
    config.validate();
    if (config.alpha == 0.0 || config.iterations == 0) return x;

    const Tensor target = config.loss_target == LossTarget::GroundTruth ? hr : model.predict(x);
    const double step = config.step_size();
    Tensor lower(x.shape());
    Tensor upper(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double lo = x[i] - config.alpha;
        double hi = x[i] + config.alpha;
        // Pull rounded bounds inward so |bound - x| <= alpha holds in floating point too.
        while (x[i] - lo > config.alpha) lo = std::nextafter(lo, x[i]);
        while (hi - x[i] > config.alpha) hi = std::nextafter(hi, x[i]);
        lower[i] = std::max(lo, config.clamp_lo);
        upper[i] = std::min(hi, config.clamp_hi);
        if (lower[i] > upper[i]) lower[i] = upper[i] = std::clamp(x[i], config.clamp_lo, config.clamp_hi);
    }

    Tensor adv = x;
    for (int it = 0; it < config.iterations; ++it) {
        const LossAndGradient lg = model.loss_gradient(adv, target);
        if (!std::isfinite(lg.loss) || !lg.gradient.all_finite()) {
            throw NumericalError("attack: non-finite gradient at iteration " + std::to_string(it));
        }
        require_same_shape(lg.gradient, x, "attack gradient");
        for (std::size_t i = 0; i < adv.size(); ++i) {
            const double g = lg.gradient[i];
            const double s = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
            adv[i] = std::clamp(adv[i] + step * s, lower[i], upper[i]);
        }
        if (observer) observer(it, adv);
    }
    return adv;
}

Tensor attack_defended(const Tensor& x, const Tensor& hr, const BackboneParams& params,
                       const BackboneConfig& config, const AttackConfig& attack, MaskStreams& streams,
                       const IterateObserver& observer) {
    BackboneAttackModel model(params, config, true, streams);
    return basic_attack(x, hr, model, attack, observer);
}

PerturbationCheck check_perturbation(const Tensor& x, const Tensor& x_adv, const AttackConfig& config) {
    require_same_shape(x, x_adv, "check_perturbation");
    PerturbationCheck check;
    for (std::size_t i = 0; i < x.size(); ++i) {
        check.linf = std::max(check.linf, std::abs(x_adv[i] - x[i]));
        check.in_range = check.in_range && x_adv[i] >= config.clamp_lo && x_adv[i] <= config.clamp_hi;
    }
    return check;
}

}  // namespace freqshield
