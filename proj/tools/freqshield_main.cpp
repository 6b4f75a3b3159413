// freqshield: dataset preparation, staged training, evaluation, spectrum figures and the
// ablation study from one binary.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "freqshield/errors.hpp"
#include "freqshield/harness.hpp"

namespace fs = std::filesystem;
using namespace freqshield;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct GlobalOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

HarnessConfig resolve_config(const GlobalOptions& global) {
    HarnessConfig config = global.config_path.empty() ? HarnessConfig{} : load_config(global.config_path);
    config.train.seed = global.seed;
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-mask defense for super-resolution networks"};
    app.require_subcommand(1);
    GlobalOptions global;
    app.add_option("--config", global.config_path, "Flat key = value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", global.seed, "Seed for every random stream");
    app.add_option("--out", global.out_dir, "Output directory");

    // prepare-dataset
    auto* prepare = app.add_subcommand("prepare-dataset", "Crop paired LR/HR patches into a dataset directory");
    std::string src, src_lr, src_hr;
    int synthetic = 0;
    int count = -1;
    int patch = 0;
    int scale = 0;
    auto* src_opt = prepare->add_option("--src", src, "Directory of HR images (LR by area downsampling)");
    auto* lr_opt = prepare->add_option("--src-lr", src_lr, "Directory of real LR images paired by file name");
    auto* hr_opt = prepare->add_option("--src-hr", src_hr, "Directory of real HR images paired by file name");
    auto* synth_opt = prepare->add_option("--synthetic", synthetic, "Generate N synthetic source scenes instead")
                          ->check(CLI::PositiveNumber);
    lr_opt->needs(hr_opt);
    hr_opt->needs(lr_opt);
    src_opt->excludes(lr_opt)->excludes(synth_opt);
    synth_opt->excludes(lr_opt);
    prepare->add_option("--count", count, "Number of patches (default dataset.count)")->check(CLI::NonNegativeNumber);
    prepare->add_option("--patch", patch, "LR patch side (default train.patch_size)")->check(CLI::PositiveNumber);
    prepare->add_option("--scale", scale, "Upscaling factor (default model.scale)")->check(CLI::PositiveNumber);

    // train
    auto* train = app.add_subcommand("train", "Run one training stage");
    int stage = 0;
    std::string data_dir, model_path, classifier_path;
    train->add_option("--stage", stage, "1: backbone, 2: classifier, 3: adversarial training")
        ->required()
        ->check(CLI::IsMember({1, 2, 3}));
    train->add_option("--data", data_dir, "Prepared dataset directory")->required();
    train->add_option("--model-path", model_path, "Stage-1 backbone for stage 2 (default <out>/backbone_stage1.bin)");
    train->add_option("--classifier-path", classifier_path, "Classifier for stage 3 (default <out>/classifier.bin)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Clean and attacked PSNR/SSIM, undefended vs defended");
    EvaluateRequest request;
    std::string eval_data, eval_model, eval_classifier, eval_baseline, alphas_text;
    int eval_iterations = 0;
    evaluate->add_option("--data", eval_data, "Prepared dataset directory")->required();
    evaluate->add_option("--model-path", eval_model, "Defended backbone checkpoint")->required();
    evaluate->add_option("--classifier-path", eval_classifier, "Classifier checkpoint")->required();
    evaluate->add_option("--baseline-path", eval_baseline, "Undefended backbone (default: the defended one, gate off)");
    auto* alphas_opt = evaluate->add_option("--alphas", alphas_text,
                                            "Comma-separated numerators over 255; empty for clean only "
                                            "(default eval.alphas)");
    evaluate->add_option("--iterations", eval_iterations, "Attack iterations (default eval.iterations)")
        ->check(CLI::PositiveNumber);

    // visualize-dct
    auto* visualize = app.add_subcommand("visualize-dct", "Spectrum heatmaps of clean and attacked features");
    std::string image_path, vis_model;
    visualize->add_option("--image", image_path, "Input image")->required();
    visualize->add_option("--model-path", vis_model, "Backbone checkpoint")->required();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Train and evaluate baseline, +FM, +RM, +AT, +RM+AT and Ours");
    std::string ablate_data, ablate_test;
    ablate->add_option("--data", ablate_data, "Training dataset directory")->required();
    ablate->add_option("--test-data", ablate_test, "Held-out dataset directory (default: the training set)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        HarnessConfig config = resolve_config(global);
        const fs::path out = global.out_dir;

        if (*prepare) {
            DatasetSource source;
            source.images = src;
            source.paired_lr = src_lr;
            source.paired_hr = src_hr;
            source.synthetic = synthetic;
            source.synthetic_side = config.synthetic_side;
            if (src.empty() && src_lr.empty() && synthetic == 0) {
                std::cerr << "prepare-dataset: one of --src, --src-lr/--src-hr or --synthetic is required\n";
                return kUsage;
            }
            const PrepareReport report = prepare_dataset(
                source, out, patch > 0 ? patch : config.train.patch_size, scale > 0 ? scale : config.train.backbone.scale,
                count >= 0 ? count : config.dataset_count, config.train.seed);
            if (report.skipped > 0) std::cerr << "warning: skipped " << report.skipped << " unreadable or too small images\n";
            std::cout << "wrote " << report.written << " patch pairs from " << report.sources << " sources to "
                      << out.string() << '\n';
        } else if (*train) {
            cmd_train(stage, config, data_dir, model_path, classifier_path, out, std::cout);
        } else if (*evaluate) {
            if (alphas_opt->count() > 0) {
                std::istringstream in("eval.alphas = " + alphas_text);
                config.eval_alphas = parse_config(in).eval_alphas;
            }
            if (eval_iterations > 0) config.eval_iterations = eval_iterations;
            request.data_dir = eval_data;
            request.model_path = eval_model;
            request.classifier_path = eval_classifier;
            request.baseline_path = eval_baseline;
            request.out_dir = out;
            cmd_evaluate(config, request, std::cout);
        } else if (*visualize) {
            cmd_visualize_dct(config, image_path, vis_model, out, std::cout);
        } else if (*ablate) {
            const PairedDataset train_data = load_dataset(ablate_data);
            const PairedDataset test_data = ablate_test.empty() ? train_data : load_dataset(ablate_test);
            cmd_ablate(config, train_data, test_data, out, std::cout);
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
