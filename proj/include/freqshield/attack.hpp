#pragma once

#include <functional>
#include <optional>

#include "freqshield/backbone.hpp"
#include "freqshield/tensor.hpp"

namespace freqshield {

enum class LossTarget {
    GroundTruth,  ///< maximize the SR loss against the HR ground truth
    CleanOutput,  ///< maximize the SR loss against the model's own output on the clean input
};

struct AttackConfig {
    double alpha = 8.0 / 255.0;      ///< L-infinity radius in [0, 1] pixel units
    int iterations = 10;
    std::optional<double> step;      ///< defaults to 2 * alpha / iterations
    LossTarget loss_target = LossTarget::GroundTruth;
    double clamp_lo = 0.0;
    double clamp_hi = 1.0;

    double step_size() const;
    void validate() const;
};

/// Intensity given as a numerator over 255.
AttackConfig attack_from_numerator(int numerator, int iterations);

struct LossAndGradient {
    double loss = 0.0;
    Tensor gradient;  ///< d loss / d input
};

/// White-box view of a model: its output and the input gradient of a loss against a target.
class AttackModel {
public:
    virtual ~AttackModel() = default;
    virtual Tensor predict(const Tensor& x) = 0;
    virtual LossAndGradient loss_gradient(const Tensor& x, const Tensor& target) = 0;
};

/// The SR backbone under sr_loss. Every call runs a fresh forward pass, so with an active
/// gate each call draws new masks, and its backward pass reuses that call's masks.
class BackboneAttackModel final : public AttackModel {
public:
    BackboneAttackModel(const BackboneParams& params, const BackboneConfig& config, bool gate,
                        MaskStreams& streams)
        : params_(params), config_(config), gate_(gate), streams_(streams) {}

    Tensor predict(const Tensor& x) override;
    LossAndGradient loss_gradient(const Tensor& x, const Tensor& target) override;

private:
    const BackboneParams& params_;
    const BackboneConfig& config_;
    bool gate_;
    MaskStreams& streams_;
};

/// Called with (iteration index, iterate) after every projected update.
using IterateObserver = std::function<void(int, const Tensor&)>;

/// Iterative gradient-sign attack: x <- proj(x + step * sign(grad)), where proj clips to
/// the alpha ball around the clean input and to [clamp_lo, clamp_hi]. alpha == 0 returns
/// the input unchanged. Throws NumericalError (naming the iteration) on a non-finite gradient.
Tensor basic_attack(const Tensor& x, const Tensor& hr, AttackModel& model, const AttackConfig& config,
                    const IterateObserver& observer = {});

/// basic_attack against the mask-defended backbone. The classifier gate is not
/// differentiable and is held at Adversarial, so every mask site is active.
Tensor attack_defended(const Tensor& x, const Tensor& hr, const BackboneParams& params,
                       const BackboneConfig& config, const AttackConfig& attack, MaskStreams& streams,
                       const IterateObserver& observer = {});

/// Largest |x_adv - x| and whether every value is inside the clamp range.
struct PerturbationCheck {
    double linf = 0.0;
    bool in_range = true;
};
PerturbationCheck check_perturbation(const Tensor& x, const Tensor& x_adv, const AttackConfig& config);

}  // namespace freqshield
