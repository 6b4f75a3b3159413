#include "freqshield/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "freqshield/dct.hpp"
#include "freqshield/errors.hpp"
#include "freqshield/image_io.hpp"
#include "freqshield/metrics.hpp"
#include "freqshield/toy_data.hpp"

namespace freqshield {
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw InvalidArgument("config: bad value for " + key + ": '" + text + "'");
    }
    return value;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
    std::vector<int> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        values.push_back(parse_number<int>(key, item));
    }
    return values;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_fixed(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

const char* loss_target_name(LossTarget t) {
    return t == LossTarget::GroundTruth ? "ground_truth" : "clean_output";
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

Tensor as_rgb(Tensor image) {
    if (image.channels() == 1) return broadcast_channels(image, 3);
    if (image.channels() != 3) throw DataError("expected a grey or RGB image");
    return image;
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw DataError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

struct SourcePair {
    Tensor lr;
    Tensor hr;
    std::string name;
};

}  // namespace

// ---------------------------------------------------------------------------------------
// Configuration

void HarnessConfig::validate() const {
    train.validate();
    train.backbone.mask_policy.validate();
    for (int a : eval_alphas) {
        if (a < 0 || a > 255) throw InvalidArgument("config: eval.alphas must lie in [0, 255]");
    }
    if (eval_iterations <= 0) throw InvalidArgument("config: eval.iterations must be positive");
    if (dataset_count < 0) throw InvalidArgument("config: dataset.count must be non-negative");
    if (synthetic_side <= 0) throw InvalidArgument("config: dataset.synthetic_side must be positive");
    const ClassifierTrainConfig& c = train.classifier;
    if (c.epochs < 0 || c.batch_size <= 0 || c.hidden1 <= 0 || c.hidden2 <= 0 || c.gamma <= 0) {
        throw InvalidArgument("config: classifier sizes must be positive");
    }
    if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
        throw InvalidArgument("config: classifier.validation_fraction must be in [0, 1)");
    }
}

HarnessConfig parse_config(std::istream& in) {
    HarnessConfig config;
    TrainConfig& t = config.train;
    BackboneConfig& b = t.backbone;
    ClassifierTrainConfig& c = t.classifier;
    int attack_alpha = 6;
    int attack_iterations = 2;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto as_int = [&] { return parse_number<int>(key, value); };
        auto as_long = [&] { return parse_number<long>(key, value); };
        auto as_double = [&] { return parse_number<double>(key, value); };

        if (key == "mask.r_lower") b.mask_policy.r_lower = as_double();
        else if (key == "mask.r_upper") b.mask_policy.r_upper = as_double();
        else if (key == "model.scale") b.scale = as_int();
        else if (key == "model.num_hourglass") b.num_hourglass = as_int();
        else if (key == "model.base_channels") b.base_channels = as_int();
        else if (key == "model.hg_depth") b.hg_depth = as_int();
        else if (key == "train.batch_size") t.batch_size = as_int();
        else if (key == "train.lr") t.adam.learning_rate = as_double();
        else if (key == "train.lr_halving_interval") t.lr_halving_interval = as_long();
        else if (key == "train.max_iterations") t.max_iterations = as_long();
        else if (key == "train.patch_size") t.patch_size = as_int();
        else if (key == "train.attack_alpha") attack_alpha = as_int();
        else if (key == "train.attack_iterations") attack_iterations = as_int();
        else if (key == "train.adversarial_fraction") t.adversarial_fraction = as_double();
        else if (key == "classifier.epochs") c.epochs = as_int();
        else if (key == "classifier.batch_size") c.batch_size = as_int();
        else if (key == "classifier.lr") c.adam.learning_rate = as_double();
        else if (key == "classifier.hidden1") c.hidden1 = as_int();
        else if (key == "classifier.hidden2") c.hidden2 = as_int();
        else if (key == "classifier.gamma") c.gamma = as_int();
        else if (key == "classifier.validation_fraction") c.validation_fraction = as_double();
        else if (key == "eval.alphas") config.eval_alphas = parse_int_list(key, value);
        else if (key == "eval.iterations") config.eval_iterations = as_int();
        else if (key == "eval.loss_target") {
            if (value == "ground_truth") config.eval_loss_target = LossTarget::GroundTruth;
            else if (value == "clean_output") config.eval_loss_target = LossTarget::CleanOutput;
            else throw InvalidArgument("config: eval.loss_target must be ground_truth or clean_output");
        }
        else if (key == "dataset.count") config.dataset_count = as_int();
        else if (key == "dataset.synthetic_side") config.synthetic_side = as_int();
        else throw InvalidArgument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    t.train_attack = attack_from_numerator(attack_alpha, attack_iterations);
    config.validate();
    return config;
}

HarnessConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path.string());
    return parse_config(in);
}

std::string canonical_config(const HarnessConfig& config) {
    const TrainConfig& t = config.train;
    const BackboneConfig& b = t.backbone;
    const ClassifierTrainConfig& c = t.classifier;
    std::string alphas;
    for (std::size_t i = 0; i < config.eval_alphas.size(); ++i) {
        alphas += (i ? "," : "") + std::to_string(config.eval_alphas[i]);
    }
    std::ostringstream out;
    out << "mask.r_lower = " << format_double(b.mask_policy.r_lower) << '\n'
        << "mask.r_upper = " << format_double(b.mask_policy.r_upper) << '\n'
        << "model.scale = " << b.scale << '\n'
        << "model.num_hourglass = " << b.num_hourglass << '\n'
        << "model.base_channels = " << b.base_channels << '\n'
        << "model.hg_depth = " << b.hg_depth << '\n'
        << "train.batch_size = " << t.batch_size << '\n'
        << "train.lr = " << format_double(t.adam.learning_rate) << '\n'
        << "train.lr_halving_interval = " << t.lr_halving_interval << '\n'
        << "train.max_iterations = " << t.max_iterations << '\n'
        << "train.patch_size = " << t.patch_size << '\n'
        << "train.attack_alpha = " << format_double(t.train_attack.alpha * 255.0) << '\n'
        << "train.attack_iterations = " << t.train_attack.iterations << '\n'
        << "train.adversarial_fraction = " << format_double(t.adversarial_fraction) << '\n'
        << "classifier.epochs = " << c.epochs << '\n'
        << "classifier.batch_size = " << c.batch_size << '\n'
        << "classifier.lr = " << format_double(c.adam.learning_rate) << '\n'
        << "classifier.hidden1 = " << c.hidden1 << '\n'
        << "classifier.hidden2 = " << c.hidden2 << '\n'
        << "classifier.gamma = " << c.gamma << '\n'
        << "classifier.validation_fraction = " << format_double(c.validation_fraction) << '\n'
        << "eval.alphas = " << alphas << '\n'
        << "eval.iterations = " << config.eval_iterations << '\n'
        << "eval.loss_target = " << loss_target_name(config.eval_loss_target) << '\n'
        << "dataset.count = " << config.dataset_count << '\n'
        << "dataset.synthetic_side = " << config.synthetic_side << '\n';
    return out.str();
}

std::uint64_t fnv1a64(const std::string& text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const HarnessConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config(config))));
    return buf;
}

// ---------------------------------------------------------------------------------------
// Datasets

PrepareReport prepare_dataset(const DatasetSource& source, const fs::path& out_dir, int patch_size, int scale,
                              int count, std::uint64_t seed) {
    if (patch_size <= 0 || scale <= 0 || count < 0) throw InvalidArgument("prepare: bad patch size, scale or count");
    ensure_dir(out_dir / "lr");
    ensure_dir(out_dir / "hr");
    PrepareReport report;
    const RngStream root(seed);

    std::vector<SourcePair> sources;
    const int hr_patch = patch_size * scale;
    auto add_hr_source = [&](Tensor hr, std::string name) {
        hr = as_rgb(std::move(hr));
        const int h = hr.height() / scale * scale;
        const int w = hr.width() / scale * scale;
        if (h < hr_patch || w < hr_patch) {
            ++report.skipped;
            return;
        }
        hr = crop(hr, 0, 0, h, w);
        Tensor lr = area_downsample(hr, scale);
        sources.push_back({std::move(lr), std::move(hr), std::move(name)});
    };

    if (count > 0) {
        if (source.synthetic > 0) {
            RngStream synth = root.split(1);
            for (int k = 0; k < source.synthetic; ++k) {
                RngStream image_stream = synth.split(static_cast<std::uint64_t>(k));
                const int side = std::max(hr_patch, source.synthetic_side);
                add_hr_source(make_toy_image(side, side, image_stream), "synthetic:" + std::to_string(k));
            }
        } else if (!source.paired_lr.empty() && !source.paired_hr.empty()) {
            for (const fs::path& hr_path : sorted_files(source.paired_hr)) {
                const fs::path lr_path = source.paired_lr / hr_path.filename();
                try {
                    Tensor hr = as_rgb(load_image(hr_path));
                    Tensor lr = as_rgb(load_image(lr_path));
                    if (hr.height() != lr.height() * scale || hr.width() != lr.width() * scale ||
                        lr.height() < patch_size || lr.width() < patch_size) {
                        ++report.skipped;
                        continue;
                    }
                    sources.push_back({std::move(lr), std::move(hr), hr_path.filename().string()});
                } catch (const DataError&) {
                    ++report.skipped;
                }
            }
        } else if (!source.images.empty()) {
            for (const fs::path& path : sorted_files(source.images)) {
                try {
                    add_hr_source(load_image(path), path.filename().string());
                } catch (const DataError&) {
                    ++report.skipped;
                }
            }
        } else {
            throw InvalidArgument("prepare: no source given");
        }
        if (sources.empty()) throw DataError("prepare: no readable source image large enough for the patch size");
    }
    report.sources = sources.size();

    std::ofstream manifest = open_output(out_dir / "manifest.csv");
    manifest << "index,lr,hr,source,lr_y,lr_x\n";
    RngStream pick = root.split(2);
    for (int i = 0; i < count; ++i) {
        const SourcePair& s = sources[pick.below(sources.size())];
        const int y = static_cast<int>(pick.below(static_cast<std::uint64_t>(s.lr.height() - patch_size + 1)));
        const int x = static_cast<int>(pick.below(static_cast<std::uint64_t>(s.lr.width() - patch_size + 1)));
        char name[32];
        std::snprintf(name, sizeof name, "%05d.png", i);
        save_image(crop(s.lr, y, x, patch_size, patch_size), out_dir / "lr" / name);
        save_image(crop(s.hr, y * scale, x * scale, hr_patch, hr_patch), out_dir / "hr" / name);
        manifest << i << ",lr/" << name << ",hr/" << name << ',' << s.name << ',' << y << ',' << x << '\n';
        ++report.written;
    }
    if (!manifest) throw DataError("write failed: " + (out_dir / "manifest.csv").string());
    return report;
}

PairedDataset load_dataset(const fs::path& dir) {
    std::ifstream in(dir / "manifest.csv");
    if (!in) throw DataError("missing manifest: " + (dir / "manifest.csv").string());
    std::string line;
    if (!std::getline(in, line) || trim(line).rfind("index,lr,hr", 0) != 0) {
        throw DataError("malformed manifest header in " + dir.string());
    }
    PairedDataset data;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string index, lr, hr;
        if (!std::getline(ss, index, ',') || !std::getline(ss, lr, ',') || !std::getline(ss, hr, ',')) {
            throw DataError("malformed manifest row: " + line);
        }
        PatchPair pair{as_rgb(load_image(dir / lr)), as_rgb(load_image(dir / hr))};
        if (pair.hr.height() % pair.lr.height() != 0 || pair.hr.width() % pair.lr.width() != 0 ||
            pair.hr.height() / pair.lr.height() != pair.hr.width() / pair.lr.width()) {
            throw DataError("LR/HR sizes do not match a common scale in row " + index);
        }
        data.push_back(std::move(pair));
    }
    return data;
}

// ---------------------------------------------------------------------------------------
// Evaluation

void write_results_csv(const std::vector<ResultRow>& rows, std::uint64_t seed, const std::string& hash,
                       const fs::path& path) {
    std::ofstream out = open_output(path);
    out << kResultsHeader << '\n';
    for (const ResultRow& r : rows) {
        out << r.variant << ',' << r.alpha << ',' << format_fixed(r.mean_psnr) << ',' << format_fixed(r.mean_ssim)
            << ',' << r.n_images << ',' << seed << ',' << hash << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

ResultRow evaluate_model(const std::string& variant, const ModelUnderTest& model, const PairedDataset& data,
                         int alpha, int iterations, LossTarget target, std::uint64_t seed) {
    if (model.params == nullptr) throw InvalidArgument("evaluate: no model");
    if (model.gate == ModelUnderTest::Gate::Classifier && model.classifier == nullptr) {
        throw InvalidArgument("evaluate: classifier gate without a classifier");
    }
    if (data.empty()) throw DataError("evaluate: empty dataset");
    const int sites = model.config.mask_site_count();
    const bool attack_gate = model.gate != ModelUnderTest::Gate::Off;

    ResultRow row{variant, alpha, 0.0, 0.0, data.size()};
    const RngStream root(seed);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const RngStream image_root = root.split(i);
        MaskStreams attack_streams(image_root.split(0), sites);
        MaskStreams eval_streams(image_root.split(1), sites);
        const PatchPair& pair = data[i];

        Tensor x = pair.lr;
        if (alpha > 0) {
            AttackConfig attack = attack_from_numerator(alpha, iterations);
            attack.loss_target = target;
            BackboneAttackModel attacked(*model.params, model.config, attack_gate, attack_streams);
            x = basic_attack(pair.lr, pair.hr, attacked, attack);
        }
        Tensor sr;
        switch (model.gate) {
            case ModelUnderTest::Gate::Off:
                sr = forward(x, *model.params, model.config, false, eval_streams).sr;
                break;
            case ModelUnderTest::Gate::On:
                sr = forward(x, *model.params, model.config, true, eval_streams).sr;
                break;
            case ModelUnderTest::Gate::Classifier:
                sr = defended_pipeline(x, *model.params, model.config, *model.classifier, eval_streams).sr;
                break;
        }
        if (!sr.all_finite()) throw NumericalError("evaluate: non-finite output for image " + std::to_string(i));
        const MetricReport m = evaluate_pair(clamp(sr, 0.0, 1.0), pair.hr);
        row.mean_psnr += m.psnr_db;
        row.mean_ssim += m.ssim;
    }
    row.mean_psnr /= static_cast<double>(data.size());
    row.mean_ssim /= static_cast<double>(data.size());
    return row;
}

// ---------------------------------------------------------------------------------------
// Commands

TrainOutputs cmd_train(int stage, const HarnessConfig& config, const fs::path& data_dir, const fs::path& model_path,
                       const fs::path& classifier_path, const fs::path& out_dir, std::ostream& report) {
    if (stage < 1 || stage > 3) throw InvalidArgument("train: stage must be 1, 2 or 3");
    ensure_dir(out_dir);
    const PairedDataset data = load_dataset(data_dir);
    TrainConfig train = config.train;
    TrainOutputs outputs;

    if (stage == 1) {
        const BackboneTrainResult result = stage1_train_backbone(data, train);
        outputs = {out_dir / "backbone_stage1.bin", out_dir / "train_log_stage1.csv"};
        save_backbone(result.params, train.backbone, outputs.checkpoint);
        write_train_log_csv(result.log, outputs.log);
        report << "stage 1: " << result.log.size() << " iterations, final loss "
               << (result.log.empty() ? std::string("n/a") : format_fixed(result.log.back().loss)) << '\n';
    } else if (stage == 2) {
        const fs::path backbone_path = model_path.empty() ? out_dir / "backbone_stage1.bin" : model_path;
        const BackboneParams backbone = load_backbone(backbone_path, train.backbone);
        const Stage2Result result = stage2_build_classifier(data, backbone, train);
        outputs = {out_dir / "classifier.bin", out_dir / "classifier_log.csv"};
        save_classifier(result.params, outputs.checkpoint);
        std::ofstream log = open_output(outputs.log);
        log << "epoch,loss\n";
        for (std::size_t e = 0; e < result.log.epoch_loss.size(); ++e) {
            log << e << ',' << format_double(result.log.epoch_loss[e]) << '\n';
        }
        report << "stage 2: " << result.clean_count << " clean + " << result.adversarial_count
               << " attacked samples, train accuracy " << format_fixed(result.log.train_accuracy);
        if (result.log.validation_accuracy) report << ", held-out accuracy " << format_fixed(*result.log.validation_accuracy);
        report << '\n';
    } else {
        const fs::path cls_path = classifier_path.empty() ? out_dir / "classifier.bin" : classifier_path;
        const ClassifierParams classifier = load_classifier(cls_path);
        const BackboneTrainResult result = stage3_adversarial_train(data, classifier, train);
        outputs = {out_dir / "backbone_stage3.bin", out_dir / "train_log_stage3.csv"};
        save_backbone(result.params, train.backbone, outputs.checkpoint);
        write_train_log_csv(result.log, outputs.log);
        report << "stage 3: " << result.log.size() << " iterations, final loss "
               << (result.log.empty() ? std::string("n/a") : format_fixed(result.log.back().loss)) << '\n';
    }
    return outputs;
}

std::vector<ResultRow> cmd_evaluate(const HarnessConfig& config, const EvaluateRequest& request,
                                    std::ostream& report) {
    ensure_dir(request.out_dir);
    const PairedDataset data = load_dataset(request.data_dir);
    BackboneConfig defended_config = config.train.backbone;
    const BackboneParams defended = load_backbone(request.model_path, defended_config);
    const ClassifierParams classifier = load_classifier(request.classifier_path);
    BackboneConfig baseline_config = config.train.backbone;
    const BackboneParams baseline =
        request.baseline_path.empty() ? defended : load_backbone(request.baseline_path, baseline_config);
    if (request.baseline_path.empty()) baseline_config = defended_config;

    std::vector<int> alphas{0};
    for (int a : config.eval_alphas)
        if (a > 0) alphas.push_back(a);
    std::sort(alphas.begin(), alphas.end());
    alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

    const std::uint64_t seed = config.train.seed;
    const ModelUnderTest undefended{&baseline, baseline_config, ModelUnderTest::Gate::Off, nullptr};
    const ModelUnderTest full{&defended, defended_config, ModelUnderTest::Gate::Classifier, &classifier};
    std::vector<ResultRow> rows;
    for (int a : alphas) {
        rows.push_back(evaluate_model("undefended", undefended, data, a, config.eval_iterations,
                                      config.eval_loss_target, seed));
        rows.push_back(evaluate_model("defended", full, data, a, config.eval_iterations, config.eval_loss_target,
                                      seed));
        report << "alpha " << a << "/255: undefended " << format_psnr(rows[rows.size() - 2].mean_psnr)
               << " dB, defended " << format_psnr(rows.back().mean_psnr) << " dB\n";
    }
    const std::string hash = config_hash(config);
    write_results_csv(rows, seed, hash, request.out_dir / "results.csv");

    std::ofstream curve = open_output(request.out_dir / "curve.csv");
    curve << "alpha,undefended_psnr,defended_psnr,undefended_ssim,defended_ssim\n";
    for (std::size_t k = 0; k + 1 < rows.size(); k += 2) {
        curve << rows[k].alpha << ',' << format_fixed(rows[k].mean_psnr) << ',' << format_fixed(rows[k + 1].mean_psnr)
              << ',' << format_fixed(rows[k].mean_ssim) << ',' << format_fixed(rows[k + 1].mean_ssim) << '\n';
    }
    return rows;
}

std::vector<fs::path> cmd_visualize_dct(const HarnessConfig& config, const fs::path& image_path,
                                        const fs::path& model_path, const fs::path& out_dir, std::ostream& report) {
    ensure_dir(out_dir);
    BackboneConfig net = config.train.backbone;
    const BackboneParams params = load_backbone(model_path, net);
    Tensor image = as_rgb(load_image(image_path));
    const int multiple = 1 << net.hg_depth;
    const int h = image.height() / multiple * multiple;
    const int w = image.width() / multiple * multiple;
    if (h == 0 || w == 0) throw DataError("visualize: image smaller than " + std::to_string(multiple) + " pixels");
    image = crop(image, 0, 0, h, w);

    const RngStream root(config.train.seed);
    MaskStreams streams(root.split(0), net.mask_site_count());
    AttackConfig attack = attack_from_numerator(8, 10);
    attack.loss_target = LossTarget::CleanOutput;
    BackboneAttackModel model(params, net, false, streams);
    const Tensor attacked = basic_attack(image, nearest_upsample(image, net.scale), model, attack);

    const SrOutput clean_out = forward(image, params, net, false, streams);
    const SrOutput attacked_out = forward(attacked, params, net, false, streams);

    std::vector<std::pair<std::string, std::pair<Tensor, Tensor>>> maps;
    maps.push_back({"input", {image, attacked}});
    for (int k = 0; k < net.num_hourglass; ++k) {
        maps.push_back({"hg" + std::to_string(k),
                        {clean_out.hourglass_entry_features[static_cast<std::size_t>(k)],
                         attacked_out.hourglass_entry_features[static_cast<std::size_t>(k)]}});
    }

    constexpr double kHighBand = 0.7;
    std::vector<fs::path> written;
    std::ofstream stats = open_output(out_dir / "dct_stats.csv");
    stats << "map,clean_high_band_mean,attacked_high_band_mean\n";
    for (const auto& [name, pair] : maps) {
        const Tensor clean_map = spectrum_heatmap(dct2(pair.first));
        const Tensor attacked_map = spectrum_heatmap(dct2(pair.second));
        const fs::path clean_path = out_dir / (name + "_clean.png");
        const fs::path attacked_path = out_dir / (name + "_attacked.png");
        save_image(clean_map, clean_path);
        save_image(attacked_map, attacked_path);
        written.push_back(clean_path);
        written.push_back(attacked_path);
        const double hc = high_band_mean(clean_map, kHighBand);
        const double ha = high_band_mean(attacked_map, kHighBand);
        stats << name << ',' << format_fixed(hc) << ',' << format_fixed(ha) << '\n';
        report << name << ": high-band (r > 0.7) mean clean " << format_fixed(hc) << ", attacked "
               << format_fixed(ha) << '\n';
    }
    return written;
}

AblationModels train_ablation_models(const TrainConfig& config, const PairedDataset& train_data, std::ostream& report,
                                     const AblationPretrained& pretrained) {
    TrainConfig fixed = config;
    fixed.backbone.mask_policy.mode = MaskMode::FixedCutoff;
    constexpr std::uint64_t kTag = 1;
    using Gate = ModelUnderTest::Gate;

    AblationModels models;
    auto add = [&](const std::string& name, BackboneParams params, const BackboneConfig& net, Gate gate) {
        models.variants.push_back({name, std::move(params), net, gate});
        report << "trained " << name << '\n';
    };
    const BackboneParams baseline =
        pretrained.baseline ? *pretrained.baseline : stage1_train_backbone(train_data, config).params;
    add("baseline", baseline, config.backbone, Gate::Off);
    add("+FM", train_backbone(train_data, fixed, TrainPlan{false, GateMode::Always, nullptr, kTag}).params,
        fixed.backbone, Gate::On);
    add("+RM", train_backbone(train_data, config, TrainPlan{false, GateMode::Always, nullptr, kTag}).params,
        config.backbone, Gate::On);
    add("+AT", train_backbone(train_data, config, TrainPlan{true, GateMode::Never, nullptr, kTag}).params,
        config.backbone, Gate::Off);
    add("+RM+AT", train_backbone(train_data, config, TrainPlan{true, GateMode::Always, nullptr, kTag}).params,
        config.backbone, Gate::On);
    models.classifier =
        pretrained.classifier ? *pretrained.classifier : stage2_build_classifier(train_data, baseline, config).params;
    add("Ours",
        pretrained.ours ? *pretrained.ours : stage3_adversarial_train(train_data, models.classifier, config).params,
        config.backbone, Gate::Classifier);
    return models;
}

std::vector<ResultRow> evaluate_ablation(const HarnessConfig& config, const AblationModels& models,
                                         const PairedDataset& test_data, std::ostream& report) {
    std::vector<ResultRow> rows;
    for (const AblationVariant& v : models.variants) {
        const ModelUnderTest model{&v.params, v.net, v.gate, &models.classifier};
        for (int a : kAblationAlphas) {
            rows.push_back(evaluate_model(v.name, model, test_data, a, config.eval_iterations,
                                          config.eval_loss_target, config.train.seed));
            report << v.name << " alpha " << a << "/255: " << format_psnr(rows.back().mean_psnr) << " dB\n";
        }
    }
    return rows;
}

std::vector<ResultRow> cmd_ablate(const HarnessConfig& config, const PairedDataset& train_data,
                                  const PairedDataset& test_data, const fs::path& out_dir, std::ostream& report) {
    ensure_dir(out_dir);
    const AblationModels models = train_ablation_models(config.train, train_data, report);
    std::vector<ResultRow> rows = evaluate_ablation(config, models, test_data, report);
    write_results_csv(rows, config.train.seed, config_hash(config), out_dir / "ablation.csv");
    return rows;
}

}  // namespace freqshield
