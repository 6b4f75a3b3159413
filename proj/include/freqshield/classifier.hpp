#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "freqshield/autodiff.hpp"
#include "freqshield/optim.hpp"
#include "freqshield/rng.hpp"
#include "freqshield/tensor.hpp"

namespace freqshield {

enum class Label { Clean = 0, Adversarial = 1 };

const char* to_string(Label label);

struct Verdict {
    Label label = Label::Clean;
    double confidence = 0.5;                 ///< probability of the reported label
    std::array<double, 2> probabilities{};   ///< {clean, adversarial}
};

/// Weights of the spectral detector: pooled DCT features -> FC -> FC -> FC(2) -> softmax.
/// Weight matrices are stored out x in x 1, biases out x 1 x 1.
struct ClassifierParams {
    int gamma = 3;
    double leaky_slope = 0.01;
    int train_height = 0;
    int train_width = 0;
    Tensor w1, b1, w2, b2, w3, b3;

    int pooled_height() const noexcept { return train_height / gamma; }
    int pooled_width() const noexcept { return train_width / gamma; }
    int input_dim() const noexcept { return pooled_height() * pooled_width(); }
    int hidden1() const noexcept { return w1.height(); }
    int hidden2() const noexcept { return w2.height(); }

    /// Throws ShapeError unless the layer dimensions chain input_dim -> h1 -> h2 -> 2.
    void validate() const;

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;

    friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

/// Glorot-uniform weights, zero biases.
ClassifierParams init_classifier(int train_height, int train_width, int gamma, int hidden1, int hidden2,
                                 double leaky_slope, RngStream& stream);

/// Channel-averaged DCT map of x (H x W x 1), before pooling.
Tensor channel_mean_spectrum(const Tensor& x);

/// dct2 -> channel mean -> gamma x gamma average pool (stride gamma, trailing remainder
/// dropped) -> row-major flatten.
std::vector<double> featurize(const Tensor& x, int gamma);

/// Feature vector (input_dim x 1 x 1) for params. When the pooled size of x differs from
/// the training size, the channel-mean map is first adaptive-average-pooled to the
/// training size.
Tensor classifier_features(const Tensor& x, const ClassifierParams& params);

/// Adaptive average pooling of a single-channel map to out_h x out_w.
Tensor adaptive_average_pool(const Tensor& map, int out_h, int out_w);

/// Logits (2 x 1 x 1) of the FC stack given feature and parameter Vars on one tape.
struct ClassifierVars {
    ad::Var w1, b1, w2, b2, w3, b3;
};
ClassifierVars classifier_vars(ad::Tape& tape, const ClassifierParams& params, bool requires_grad);
ad::Var classifier_logits(ad::Var features, const ClassifierVars& vars, double leaky_slope);

/// Softmax verdict. Exact ties resolve to Clean.
Verdict classify(const Tensor& x, const ClassifierParams& params);

struct ClassifierTrainConfig {
    int epochs = 300;
    int batch_size = 16;
    AdamConfig adam{};
    double validation_fraction = 0.2;
    int gamma = 3;
    int hidden1 = 128;
    int hidden2 = 32;
    double leaky_slope = 0.01;
};

struct ClassifierTrainLog {
    std::vector<double> epoch_loss;
    double train_accuracy = 0.0;
    std::optional<double> validation_accuracy;  ///< empty when nothing was held out
    std::size_t train_count = 0;
    std::size_t validation_count = 0;
};

struct TrainedClassifier {
    ClassifierParams params;
    ClassifierTrainLog log;
};

/// Mini-batch Adam on two-class cross-entropy (clean = 0, adversarial = 1). A shuffled
/// validation_fraction of the pooled samples is held out. Throws InvalidArgument for empty
/// datasets and NumericalError when the loss stops being finite.
TrainedClassifier train_classifier(std::span<const Tensor> clean, std::span<const Tensor> adversarial,
                                   const ClassifierTrainConfig& config, RngStream& stream);

/// Fraction of samples whose verdict matches its label.
double classifier_accuracy(const ClassifierParams& params, std::span<const Tensor> samples,
                           std::span<const Label> labels);

/// Binary format: 16-byte header ("FSCL", u16 version, u16 gamma, u16 train_height,
/// u16 train_width, u16 hidden1, u16 hidden2), then f64 leaky_slope and the six tensors,
/// all little-endian.
void save_classifier(const ClassifierParams& params, const std::filesystem::path& path);
ClassifierParams load_classifier(const std::filesystem::path& path);

}  // namespace freqshield
