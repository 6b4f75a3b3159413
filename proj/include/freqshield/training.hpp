#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "freqshield/attack.hpp"
#include "freqshield/backbone.hpp"
#include "freqshield/classifier.hpp"
#include "freqshield/optim.hpp"

namespace freqshield {

struct PatchPair {
    Tensor lr;
    Tensor hr;
};

using PairedDataset = std::vector<PatchPair>;

struct TrainConfig {
    BackboneConfig backbone{};
    AdamConfig adam{};  ///< beta1 = 0.9 is the "exponential decay rate"
    int batch_size = 8;
    long lr_halving_interval = 2000;
    long max_iterations = 10000;
    int patch_size = 16;  ///< LR side of training crops
    AttackConfig train_attack = attack_from_numerator(6, 2);
    /// Share of each batch replaced by attacked samples in adversarial training.
    double adversarial_fraction = 0.5;
    ClassifierTrainConfig classifier{};
    std::uint64_t seed = 0;

    void validate() const;
};

/// How the mask sites are driven during a training run.
enum class GateMode {
    Never,       ///< plain backbone
    Always,      ///< masks on every forward pass (no classifier)
    Classifier,  ///< masks on when the frozen classifier flags the sample
};

struct TrainPlan {
    bool adversarial = false;
    GateMode gate = GateMode::Never;
    const ClassifierParams* classifier = nullptr;
    /// Selects the RNG sub-streams (initialization, crops, masks) for this run.
    std::uint64_t stream_tag = 1;
};

struct TrainLogRow {
    long iteration = 0;
    double loss = 0.0;
    double learning_rate = 0.0;
};

struct BackboneTrainResult {
    BackboneParams params;
    std::vector<TrainLogRow> log;
};

/// Random patch_size crop of a pair (identity when the pair already has that size).
PatchPair random_crop(const PatchPair& pair, int patch_size, int scale, RngStream& stream);

/// Mini-batch Adam on sr_loss with a halving step schedule. With plan.adversarial, the first
/// round(batch_size * adversarial_fraction) samples of every batch are replaced by
/// basic-attack samples against the current network (classifier gate held at Adversarial).
/// Throws NumericalError on a non-finite loss.
BackboneTrainResult train_backbone(const PairedDataset& dataset, const TrainConfig& config, const TrainPlan& plan);

/// Stage 1: the backbone alone, no masks and no classifier.
BackboneTrainResult stage1_train_backbone(const PairedDataset& dataset, const TrainConfig& config);

struct Stage2Result {
    ClassifierParams params;
    ClassifierTrainLog log;
    std::size_t clean_count = 0;
    std::size_t adversarial_count = 0;
};

/// Stage 2: attack every patch with train_attack on the frozen stage-1 backbone and fit the
/// classifier on the balanced clean / attacked set.
Stage2Result stage2_build_classifier(const PairedDataset& dataset, const BackboneParams& backbone,
                                     const TrainConfig& config);

/// The attacked twins used by stage 2, in dataset order.
std::vector<Tensor> synthesize_adversarial(const PairedDataset& dataset, const BackboneParams& backbone,
                                           const TrainConfig& config);

/// Stage 3: fresh backbone, classifier-gated masks, adversarial batches. The classifier is
/// read-only and verified unchanged on exit.
BackboneTrainResult stage3_adversarial_train(const PairedDataset& dataset, const ClassifierParams& classifier,
                                             const TrainConfig& config);

/// CSV with header "iteration,loss,lr".
void write_train_log_csv(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

}  // namespace freqshield
