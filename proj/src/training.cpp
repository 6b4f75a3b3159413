#include "freqshield/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "freqshield/errors.hpp"

namespace freqshield {

namespace {

constexpr std::uint64_t kStage1Tag = 1;
constexpr std::uint64_t kStage2Tag = 2;
constexpr std::uint64_t kStage3Tag = 3;

bool gate_for(GateMode mode, const ClassifierParams* classifier, const Tensor& x) {
    switch (mode) {
        case GateMode::Never: return false;
        case GateMode::Always: return true;
        case GateMode::Classifier: return classify(x, *classifier).label == Label::Adversarial;
    }
    return false;
}

}  // namespace

void TrainConfig::validate() const {
    backbone.validate();
    train_attack.validate();
    if (batch_size <= 0) throw InvalidArgument("train: batch_size must be positive");
    if (max_iterations < 0) throw InvalidArgument("train: max_iterations must be non-negative");
    if (patch_size <= 0 || patch_size % (1 << backbone.hg_depth) != 0) {
        throw InvalidArgument("train: patch_size must be a positive multiple of 2^hg_depth");
    }
    if (!(adversarial_fraction >= 0.0 && adversarial_fraction <= 1.0)) {
        throw InvalidArgument("train: adversarial_fraction must be in [0, 1]");
    }
}

PatchPair random_crop(const PatchPair& pair, int patch_size, int scale, RngStream& stream) {
    const int h = pair.lr.height();
    const int w = pair.lr.width();
    if (h < patch_size || w < patch_size) throw DataError("training pair smaller than patch_size");
    if (pair.hr.height() != h * scale || pair.hr.width() != w * scale) {
        throw DataError("HR patch is not scale x LR patch");
    }
    if (h == patch_size && w == patch_size) return pair;
    const int y = static_cast<int>(stream.below(static_cast<std::uint64_t>(h - patch_size + 1)));
    const int x = static_cast<int>(stream.below(static_cast<std::uint64_t>(w - patch_size + 1)));
    return PatchPair{crop(pair.lr, y, x, patch_size, patch_size),
                     crop(pair.hr, y * scale, x * scale, patch_size * scale, patch_size * scale)};
}

BackboneTrainResult train_backbone(const PairedDataset& dataset, const TrainConfig& config, const TrainPlan& plan) {
    config.validate();
    if (dataset.empty()) throw DataError("train: empty dataset");
    if (plan.gate == GateMode::Classifier && plan.classifier == nullptr) {
        throw InvalidArgument("train: classifier gate requested without a classifier");
    }
    const BackboneConfig& net = config.backbone;

    const RngStream root = RngStream(config.seed).split(plan.stream_tag);
    RngStream init_stream = root.split(0);
    RngStream batch_stream = root.split(1);
    MaskStreams train_masks(root.split(2), net.mask_site_count());
    MaskStreams attack_masks(root.split(3), net.mask_site_count());

    BackboneTrainResult result;
    result.params = init_backbone(net, init_stream);
    BackboneParams& params = result.params;
    Adam adam(config.adam, params.tensors);

    const int adversarial_per_batch =
        plan.adversarial ? static_cast<int>(std::lround(config.batch_size * config.adversarial_fraction)) : 0;
    const bool attack_gate = plan.gate != GateMode::Never;

    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (long it = 0; it < config.max_iterations; ++it) {
        const double lr = halved_learning_rate(config.adam.learning_rate, it, config.lr_halving_interval);
        tape.clear();
        vars.clear();
        for (const Tensor& t : params.tensors) vars.push_back(tape.leaf(t));

        ad::Var total;
        for (int b = 0; b < config.batch_size; ++b) {
            const PatchPair& source = dataset[batch_stream.below(dataset.size())];
            PatchPair sample = random_crop(source, config.patch_size, net.scale, batch_stream);
            if (b < adversarial_per_batch) {
                BackboneAttackModel target(params, net, attack_gate, attack_masks);
                Tensor adv = basic_attack(sample.lr, sample.hr, target, config.train_attack);
                const PerturbationCheck check = check_perturbation(sample.lr, adv, config.train_attack);
                if (check.linf > config.train_attack.alpha + 1e-12 || !check.in_range) {
                    throw Error("train: adversarial sample violates the attack constraints");
                }
                sample.lr = std::move(adv);
            }
            const bool gate = gate_for(plan.gate, plan.classifier, sample.lr);
            const GraphOutput out = forward_graph(tape.constant(sample.lr), vars, net, gate, train_masks);
            const ad::Var loss = sr_loss(out, sample.hr);
            total = b == 0 ? loss : ad::add(total, loss);
        }
        const ad::Var loss = ad::scale(total, 1.0 / config.batch_size);
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
            throw NumericalError("train: non-finite loss at iteration " + std::to_string(it));
        }
        const std::vector<Tensor> grads = ad::grad(tape, loss, vars);
        adam.step(params.tensors, grads, lr);
        result.log.push_back(TrainLogRow{it, value, lr});
    }
    if (!params.all_finite()) throw NumericalError("train: parameters became non-finite");
    return result;
}

BackboneTrainResult stage1_train_backbone(const PairedDataset& dataset, const TrainConfig& config) {
    return train_backbone(dataset, config, TrainPlan{false, GateMode::Never, nullptr, kStage1Tag});
}

std::vector<Tensor> synthesize_adversarial(const PairedDataset& dataset, const BackboneParams& backbone,
                                           const TrainConfig& config) {
    const RngStream root = RngStream(config.seed).split(kStage2Tag);
    RngStream crop_stream = root.split(0);
    std::vector<Tensor> adversarial;
    adversarial.reserve(dataset.size());
    MaskStreams unused(root.split(1), config.backbone.mask_site_count());
    BackboneAttackModel target(backbone, config.backbone, false, unused);
    for (const PatchPair& pair : dataset) {
        const PatchPair sample = random_crop(pair, config.patch_size, config.backbone.scale, crop_stream);
        adversarial.push_back(basic_attack(sample.lr, sample.hr, target, config.train_attack));
    }
    return adversarial;
}

Stage2Result stage2_build_classifier(const PairedDataset& dataset, const BackboneParams& backbone,
                                     const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) throw DataError("stage 2: empty dataset");
    const RngStream root = RngStream(config.seed).split(kStage2Tag);
    // Same crop stream as synthesize_adversarial, so clean[i] and adversarial[i] are twins.
    RngStream crop_stream = root.split(0);
    std::vector<Tensor> clean;
    clean.reserve(dataset.size());
    for (const PatchPair& pair : dataset) {
        clean.push_back(random_crop(pair, config.patch_size, config.backbone.scale, crop_stream).lr);
    }
    const std::vector<Tensor> adversarial = synthesize_adversarial(dataset, backbone, config);

    RngStream fit_stream = root.split(2);
    TrainedClassifier trained = train_classifier(clean, adversarial, config.classifier, fit_stream);
    return Stage2Result{std::move(trained.params), std::move(trained.log), clean.size(), adversarial.size()};
}

BackboneTrainResult stage3_adversarial_train(const PairedDataset& dataset, const ClassifierParams& classifier,
                                             const TrainConfig& config) {
    classifier.validate();
    const ClassifierParams snapshot = classifier;
    BackboneTrainResult result =
        train_backbone(dataset, config, TrainPlan{true, GateMode::Classifier, &classifier, kStage3Tag});
    if (!(snapshot == classifier)) throw Error("stage 3: classifier parameters changed during training");
    return result;
}

void write_train_log_csv(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << "iteration,loss,lr\n";
    char buf[128];
    for (const TrainLogRow& row : log) {
        std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g\n", row.iteration, row.loss, row.learning_rate);
        out << buf;
    }
}

}  // namespace freqshield
