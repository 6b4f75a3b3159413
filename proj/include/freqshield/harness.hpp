#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "freqshield/attack.hpp"
#include "freqshield/backbone.hpp"
#include "freqshield/classifier.hpp"
#include "freqshield/training.hpp"

namespace freqshield {

/// Everything a command needs besides its paths. Loaded from a flat `key = value` file;
/// unknown keys are rejected.
///
///   mask.r_lower, mask.r_upper
///   model.scale, model.num_hourglass, model.base_channels, model.hg_depth
///   train.batch_size, train.lr, train.lr_halving_interval, train.max_iterations,
///   train.patch_size, train.attack_alpha (numerator over 255), train.attack_iterations,
///   train.adversarial_fraction
///   classifier.epochs, classifier.batch_size, classifier.lr, classifier.hidden1,
///   classifier.hidden2, classifier.gamma, classifier.validation_fraction
///   eval.alphas (comma-separated numerators), eval.iterations, eval.loss_target
///   (ground_truth | clean_output)
///   dataset.count, dataset.synthetic_side
struct HarnessConfig {
    TrainConfig train{};
    std::vector<int> eval_alphas{1, 2, 4, 6, 8};
    int eval_iterations = 10;
    LossTarget eval_loss_target = LossTarget::GroundTruth;
    int dataset_count = 256;
    /// HR side of synthetic source images for prepare-dataset --synthetic.
    int synthetic_side = 64;

    void validate() const;
};

/// Parses the config format. Throws InvalidArgument naming the offending line.
HarnessConfig parse_config(std::istream& in);
HarnessConfig load_config(const std::filesystem::path& path);

/// Canonical `key = value` rendering of every setting, in a fixed order.
std::string canonical_config(const HarnessConfig& config);

/// 64-bit FNV-1a of the canonical rendering, as 16 lowercase hex digits.
std::string config_hash(const HarnessConfig& config);

std::uint64_t fnv1a64(const std::string& text) noexcept;

// ---------------------------------------------------------------------------------------
// Datasets on disk: <dir>/manifest.csv plus <dir>/lr/NNNNN.png and <dir>/hr/NNNNN.png.

struct DatasetSource {
    /// HR images; LR is made by area downsampling.
    std::filesystem::path images;
    /// Paired real LR / HR directories matched by file name. Used when both are set.
    std::filesystem::path paired_lr;
    std::filesystem::path paired_hr;
    /// Number of synthetic toy source images to generate instead of reading files.
    int synthetic = 0;
    int synthetic_side = 64;
};

struct PrepareReport {
    std::size_t written = 0;
    std::size_t sources = 0;
    std::size_t skipped = 0;  ///< unreadable source images
};

/// Writes `count` random patch pairs (LR side patch_size, HR side patch_size * scale).
/// Throws DataError when no source image is readable (unless count is 0).
PrepareReport prepare_dataset(const DatasetSource& source, const std::filesystem::path& out_dir,
                              int patch_size, int scale, int count, std::uint64_t seed);

PairedDataset load_dataset(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------------------
// Evaluation.

struct ResultRow {
    std::string variant;
    int alpha = 0;  ///< numerator over 255; 0 is the clean row
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    std::size_t n_images = 0;
};

inline constexpr const char* kResultsHeader = "variant,alpha,mean_psnr,mean_ssim,n_images,seed,config_hash";

void write_results_csv(const std::vector<ResultRow>& rows, std::uint64_t seed, const std::string& hash,
                       const std::filesystem::path& path);

/// How a model is run and attacked.
struct ModelUnderTest {
    const BackboneParams* params = nullptr;
    BackboneConfig config{};
    enum class Gate { Off, On, Classifier } gate = Gate::Off;
    const ClassifierParams* classifier = nullptr;  ///< for Gate::Classifier
};

/// Mean PSNR / SSIM of the model on every pair, attacked at alpha / 255 (clean when 0).
/// Attacks are white-box; a classifier gate is held at Adversarial while attacking.
/// Image i uses streams derived from (seed, i) only.
ResultRow evaluate_model(const std::string& variant, const ModelUnderTest& model, const PairedDataset& data,
                         int alpha, int iterations, LossTarget target, std::uint64_t seed);

// ---------------------------------------------------------------------------------------
// Commands. Each returns normally on success and throws library errors otherwise.

struct TrainOutputs {
    std::filesystem::path checkpoint;
    std::filesystem::path log;
};

TrainOutputs cmd_train(int stage, const HarnessConfig& config, const std::filesystem::path& data_dir,
                       const std::filesystem::path& model_path, const std::filesystem::path& classifier_path,
                       const std::filesystem::path& out_dir, std::ostream& report);

struct EvaluateRequest {
    std::filesystem::path data_dir;
    std::filesystem::path model_path;       ///< defended backbone
    std::filesystem::path classifier_path;
    std::filesystem::path baseline_path;    ///< optional undefended backbone
    std::filesystem::path out_dir;
};

/// Writes results.csv (one row per variant and alpha, clean row included) and curve.csv.
std::vector<ResultRow> cmd_evaluate(const HarnessConfig& config, const EvaluateRequest& request,
                                    std::ostream& report);

/// Writes 2 * (1 + num_hourglass) heatmap PNGs (input and each hourglass entry feature,
/// clean and attacked) and dct_stats.csv. Returns the image paths.
std::vector<std::filesystem::path> cmd_visualize_dct(const HarnessConfig& config,
                                                     const std::filesystem::path& image_path,
                                                     const std::filesystem::path& model_path,
                                                     const std::filesystem::path& out_dir, std::ostream& report);

inline const std::vector<std::string> kAblationVariants{"baseline", "+FM", "+RM", "+AT", "+RM+AT", "Ours"};
inline const std::vector<int> kAblationAlphas{0, 4, 8};

struct AblationVariant {
    std::string name;
    BackboneParams params;
    BackboneConfig net;
    ModelUnderTest::Gate gate = ModelUnderTest::Gate::Off;
};

struct AblationModels {
    std::vector<AblationVariant> variants;  ///< in kAblationVariants order
    ClassifierParams classifier;            ///< gates "Ours"
};

/// Models already trained with the same config and data; reused instead of retrained.
struct AblationPretrained {
    const BackboneParams* baseline = nullptr;
    const ClassifierParams* classifier = nullptr;
    const BackboneParams* ours = nullptr;
};

AblationModels train_ablation_models(const TrainConfig& config, const PairedDataset& train_data, std::ostream& report,
                                     const AblationPretrained& pretrained = {});

/// Evaluates every variant at kAblationAlphas.
std::vector<ResultRow> evaluate_ablation(const HarnessConfig& config, const AblationModels& models,
                                         const PairedDataset& test_data, std::ostream& report);

/// Trains the six variants on `train_data` and evaluates them on `test_data` at alphas 0, 4
/// and 8; writes ablation.csv.
std::vector<ResultRow> cmd_ablate(const HarnessConfig& config, const PairedDataset& train_data,
                                  const PairedDataset& test_data, const std::filesystem::path& out_dir,
                                  std::ostream& report);

}  // namespace freqshield
