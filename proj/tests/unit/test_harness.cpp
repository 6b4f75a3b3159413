#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "freqshield/errors.hpp"
#include "freqshield/harness.hpp"
#include "freqshield/image_io.hpp"
#include "freqshield/toy_data.hpp"

using namespace freqshield;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "freqshield_test_harness" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

HarnessConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

HarnessConfig small_config() {
    HarnessConfig c;
    c.train.backbone.num_hourglass = 2;
    c.train.backbone.base_channels = 4;
    c.train.backbone.hg_depth = 1;
    c.train.batch_size = 2;
    c.train.max_iterations = 6;
    c.train.lr_halving_interval = 3;
    c.train.patch_size = 8;
    c.train.seed = 5;
    c.train.classifier.epochs = 2;
    c.train.classifier.hidden1 = 8;
    c.train.classifier.hidden2 = 4;
    c.eval_alphas = {4};
    c.eval_iterations = 2;
    return c;
}

ClassifierParams hard_wired(Label label) {
    RngStream s(0);
    ClassifierParams p = init_classifier(8, 8, 3, 4, 4, 0.01, s);
    for (Tensor* t : p.tensors()) *t = Tensor(t->shape());
    p.b3[static_cast<std::size_t>(label)] = 10.0;
    return p;
}

PairedDataset toy(int count, int side, std::uint64_t seed) {
    RngStream s(seed);
    return make_toy_dataset(count, side, 2, s);
}

void write_source_image(const fs::path& dir, const std::string& name, int side, std::uint64_t seed) {
    RngStream s(seed);
    save_image(make_toy_image(side, side, s), dir / name);
}

}  // namespace

TEST_CASE("config parsing") {
    const HarnessConfig c = parse(
        "# comment line\n"
        "\n"
        "mask.r_lower = 0.3   # trailing comment\n"
        "mask.r_upper=0.6\n"
        "train.attack_alpha = 4\n"
        "eval.alphas = 2, 8\n"
        "eval.loss_target = clean_output\n"
        "dataset.count = 12\n");
    CHECK(c.train.backbone.mask_policy.r_lower == 0.3);
    CHECK(c.train.backbone.mask_policy.r_upper == 0.6);
    CHECK(c.train.train_attack.alpha == doctest::Approx(4.0 / 255.0).epsilon(1e-15));
    CHECK(c.eval_alphas == std::vector<int>{2, 8});
    CHECK(c.eval_loss_target == LossTarget::CleanOutput);
    CHECK(c.dataset_count == 12);
    CHECK(parse("eval.alphas =\n").eval_alphas.empty());

    CHECK_THROWS_AS(parse("train.no_such_key = 1\n"), InvalidArgument);
    CHECK_THROWS_AS(parse("train.batch_size = eight\n"), InvalidArgument);
    CHECK_THROWS_AS(parse("train.batch_size = 8x\n"), InvalidArgument);
    CHECK_THROWS_AS(parse("train.batch_size 8\n"), InvalidArgument);
    CHECK_THROWS_AS(parse("eval.loss_target = psnr\n"), InvalidArgument);
    CHECK_THROWS_AS(parse("eval.iterations = 0\n"), InvalidArgument);
    CHECK_THROWS_AS(parse("mask.r_lower = 0.9\nmask.r_upper = 0.1\n"), InvalidArgument);
    CHECK_THROWS_AS(load_config("/nonexistent/freqshield.cfg"), InvalidArgument);
}

TEST_CASE("canonical config round trips and hashes") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);

    HarnessConfig c = small_config();
    c.train.adam.learning_rate = 1.0 / 3.0;
    const std::string text = canonical_config(c);
    CHECK(canonical_config(parse(text)) == text);
    CHECK(config_hash(parse(text)) == config_hash(c));

    const std::string hash = config_hash(c);
    CHECK(hash.size() == 16);
    CHECK(std::all_of(hash.begin(), hash.end(), [](char ch) { return std::isxdigit(ch) && !std::isupper(ch); }));
    c.eval_iterations += 1;
    CHECK(config_hash(c) != hash);
}

TEST_CASE("results csv schema") {
    CHECK(std::string(kResultsHeader) == "variant,alpha,mean_psnr,mean_ssim,n_images,seed,config_hash");
    const fs::path dir = scratch("schema");
    write_results_csv({{"undefended", 0, 30.5, 0.9, 4}, {"defended", 8, std::numeric_limits<double>::infinity(), 1.0, 4}},
                      9, "0123456789abcdef", dir / "r.csv");
    CHECK(slurp(dir / "r.csv") ==
          "variant,alpha,mean_psnr,mean_ssim,n_images,seed,config_hash\n"
          "undefended,0,30.500000,0.900000,4,9,0123456789abcdef\n"
          "defended,8,inf,1.000000,4,9,0123456789abcdef\n");
}

TEST_CASE("prepare dataset from one image") {
    const fs::path src = scratch("prepare_src");
    write_source_image(src, "scene.png", 64, 3);
    const fs::path out = scratch("prepare_out");
    DatasetSource source;
    source.images = src;

    const PrepareReport report = prepare_dataset(source, out, 16, 2, 4, 11);
    CHECK(report.written == 4);
    CHECK(report.sources == 1);
    CHECK(report.skipped == 0);
    const PairedDataset data = load_dataset(out);
    REQUIRE(data.size() == 4);
    const Tensor scene = load_image(src / "scene.png");
    const std::vector<std::string> manifest = lines_of(out / "manifest.csv");
    REQUIRE(manifest.size() == 5);
    CHECK(manifest[0] == "index,lr,hr,source,lr_y,lr_x");
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(data[i].lr.shape() == Shape{16, 16, 3});
        CHECK(data[i].hr.shape() == Shape{32, 32, 3});
        // HR is an exact crop of the source; LR is its 2x area downsample up to 8-bit rounding.
        std::istringstream row(manifest[i + 1]);
        std::vector<std::string> fields;
        for (std::string f; std::getline(row, f, ',');) fields.push_back(f);
        REQUIRE(fields.size() == 6);
        CHECK(fields[3] == "scene.png");
        const int y = std::stoi(fields[4]), x = std::stoi(fields[5]);
        CHECK(data[i].hr == crop(scene, 2 * y, 2 * x, 32, 32));
        const Tensor expected_lr = area_downsample(data[i].hr, 2);
        double worst = 0.0;
        for (std::size_t k = 0; k < expected_lr.size(); ++k)
            worst = std::max(worst, std::abs(expected_lr[k] - data[i].lr[k]));
        CHECK(worst <= 0.5 / 255.0 + 1e-12);
    }
}

TEST_CASE("prepare dataset edge cases") {
    const fs::path src = scratch("edge_src");
    write_source_image(src, "a.png", 64, 1);
    write_source_image(src, "tiny.png", 8, 2);
    {
        std::ofstream junk(src / "junk.png");
        junk << "not an image";
    }
    DatasetSource source;
    source.images = src;

    const fs::path empty_out = scratch("edge_empty");
    const PrepareReport none = prepare_dataset(source, empty_out, 16, 2, 0, 1);
    CHECK(none.written == 0);
    CHECK(slurp(empty_out / "manifest.csv") == "index,lr,hr,source,lr_y,lr_x\n");
    CHECK(load_dataset(empty_out).empty());

    const fs::path out = scratch("edge_out");
    const PrepareReport report = prepare_dataset(source, out, 16, 2, 3, 1);
    CHECK(report.written == 3);
    CHECK(report.sources == 1);
    CHECK(report.skipped == 2);

    const fs::path nothing = scratch("edge_nothing");
    DatasetSource empty_source;
    empty_source.images = nothing;
    CHECK_THROWS_AS(prepare_dataset(empty_source, scratch("edge_nothing_out"), 16, 2, 3, 1), DataError);
    CHECK_THROWS_AS(prepare_dataset(source, scratch("edge_bad"), 0, 2, 3, 1), InvalidArgument);
    CHECK_THROWS_AS(load_dataset(nothing), DataError);
}

TEST_CASE("prepare dataset is deterministic per seed") {
    DatasetSource source;
    source.synthetic = 3;
    source.synthetic_side = 40;
    const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
    prepare_dataset(source, a, 8, 2, 6, 21);
    prepare_dataset(source, b, 8, 2, 6, 21);
    prepare_dataset(source, c, 8, 2, 6, 22);
    CHECK(slurp(a / "manifest.csv") == slurp(b / "manifest.csv"));
    CHECK(slurp(a / "lr" / "00005.png") == slurp(b / "lr" / "00005.png"));
    CHECK(slurp(a / "hr" / "00005.png") == slurp(b / "hr" / "00005.png"));
    CHECK(slurp(a / "manifest.csv") != slurp(c / "manifest.csv"));
}

TEST_CASE("paired sources are matched by file name") {
    const fs::path lr_dir = scratch("pair_lr"), hr_dir = scratch("pair_hr");
    RngStream s(4);
    const Tensor hr = make_toy_image(40, 40, s);
    save_image(hr, hr_dir / "x.png");
    save_image(area_downsample(hr, 2), lr_dir / "x.png");
    save_image(hr, hr_dir / "unmatched.png");
    DatasetSource source;
    source.paired_lr = lr_dir;
    source.paired_hr = hr_dir;
    const PrepareReport report = prepare_dataset(source, scratch("pair_out"), 8, 2, 2, 3);
    CHECK(report.sources == 1);
    CHECK(report.skipped == 1);
}

TEST_CASE("evaluate with a Clean gate reproduces the undefended model") {
    HarnessConfig c = small_config();
    RngStream init(8);
    const BackboneParams params = init_backbone(c.train.backbone, init);
    const PairedDataset data = toy(3, 8, 2);
    const ClassifierParams clean = hard_wired(Label::Clean);
    const ClassifierParams adversarial = hard_wired(Label::Adversarial);
    const ModelUnderTest off{&params, c.train.backbone, ModelUnderTest::Gate::Off, nullptr};
    const ModelUnderTest on{&params, c.train.backbone, ModelUnderTest::Gate::On, nullptr};
    const ModelUnderTest gated_clean{&params, c.train.backbone, ModelUnderTest::Gate::Classifier, &clean};
    const ModelUnderTest gated_adv{&params, c.train.backbone, ModelUnderTest::Gate::Classifier, &adversarial};

    const ResultRow base = evaluate_model("u", off, data, 0, 2, LossTarget::GroundTruth, 3);
    const ResultRow skip = evaluate_model("d", gated_clean, data, 0, 2, LossTarget::GroundTruth, 3);
    CHECK(base.mean_psnr == skip.mean_psnr);
    CHECK(base.mean_ssim == skip.mean_ssim);
    CHECK(base.n_images == 3);

    for (int alpha : {0, 4}) {
        const ResultRow forced = evaluate_model("d", on, data, alpha, 2, LossTarget::GroundTruth, 3);
        const ResultRow flagged = evaluate_model("d", gated_adv, data, alpha, 2, LossTarget::GroundTruth, 3);
        CHECK(forced.mean_psnr == flagged.mean_psnr);
        CHECK(forced.mean_ssim == flagged.mean_ssim);
    }
    const ResultRow attacked = evaluate_model("u", off, data, 8, 3, LossTarget::GroundTruth, 3);
    CHECK(attacked.mean_psnr < base.mean_psnr);

    CHECK_THROWS_AS(evaluate_model("x", ModelUnderTest{}, data, 0, 2, LossTarget::GroundTruth, 3), InvalidArgument);
    const ModelUnderTest missing{&params, c.train.backbone, ModelUnderTest::Gate::Classifier, nullptr};
    CHECK_THROWS_AS(evaluate_model("x", missing, data, 0, 2, LossTarget::GroundTruth, 3), InvalidArgument);
    CHECK_THROWS_AS(evaluate_model("x", off, PairedDataset{}, 0, 2, LossTarget::GroundTruth, 3), DataError);
}

TEST_CASE("train, evaluate and visualize commands") {
    HarnessConfig c = small_config();
    const fs::path data_dir = scratch("cmd_data");
    DatasetSource source;
    source.synthetic = 2;
    source.synthetic_side = 32;
    prepare_dataset(source, data_dir, 8, 2, 4, 1);
    const fs::path out = scratch("cmd_out");
    std::ostringstream report;

    CHECK_THROWS_AS(cmd_train(4, c, data_dir, {}, {}, out, report), InvalidArgument);
    CHECK_THROWS_AS(cmd_train(2, c, data_dir, {}, {}, out, report), DataError);

    const TrainOutputs s1 = cmd_train(1, c, data_dir, {}, {}, out, report);
    CHECK(s1.checkpoint == out / "backbone_stage1.bin");
    CHECK(lines_of(s1.log).size() == 1 + static_cast<std::size_t>(c.train.max_iterations));
    const TrainOutputs s2 = cmd_train(2, c, data_dir, {}, {}, out, report);
    CHECK(fs::exists(out / "classifier.bin"));
    CHECK(lines_of(s2.log).front() == "epoch,loss");
    const TrainOutputs s3 = cmd_train(3, c, data_dir, {}, {}, out, report);
    CHECK(s3.checkpoint == out / "backbone_stage3.bin");

    SUBCASE("evaluate writes one row per variant and alpha, reproducibly") {
        EvaluateRequest req{data_dir, s3.checkpoint, out / "classifier.bin", s1.checkpoint, out / "eval_a"};
        const std::vector<ResultRow> rows = cmd_evaluate(c, req, report);
        REQUIRE(rows.size() == 4);
        CHECK(rows[0].variant == "undefended");
        CHECK(rows[1].variant == "defended");
        CHECK(rows[0].alpha == 0);
        CHECK(rows[2].alpha == 4);
        CHECK(lines_of(req.out_dir / "results.csv").size() == 5);
        CHECK(lines_of(req.out_dir / "curve.csv").front() ==
              "alpha,undefended_psnr,defended_psnr,undefended_ssim,defended_ssim");
        const std::string first = slurp(req.out_dir / "results.csv");
        req.out_dir = out / "eval_b";
        cmd_evaluate(c, req, report);
        CHECK(slurp(req.out_dir / "results.csv") == first);

        c.eval_alphas.clear();
        req.out_dir = out / "eval_clean";
        CHECK(cmd_evaluate(c, req, report).size() == 2);
    }

    SUBCASE("visualize writes two heatmaps per map") {
        const fs::path image = out / "scene.png";
        RngStream s(6);
        save_image(make_toy_image(17, 19, s), image);
        const std::vector<fs::path> files = cmd_visualize_dct(c, image, s1.checkpoint, out / "vis", report);
        CHECK(files.size() == 2 * (1 + static_cast<std::size_t>(c.train.backbone.num_hourglass)));
        for (const fs::path& f : files) CHECK(fs::exists(f));
        const std::vector<std::string> stats = lines_of(out / "vis" / "dct_stats.csv");
        REQUIRE(stats.size() == 2 + static_cast<std::size_t>(c.train.backbone.num_hourglass));
        CHECK(stats[0] == "map,clean_high_band_mean,attacked_high_band_mean");
        CHECK(stats[1].rfind("input,", 0) == 0);
    }

    SUBCASE("a constant image is hot only at DC") {
        const fs::path image = out / "flat.png";
        save_image(Tensor(16, 16, 3, 0.5), image);
        cmd_visualize_dct(c, image, s1.checkpoint, out / "flat", report);
        const Tensor map = load_image(out / "flat" / "input_clean.png");
        CHECK(map(0, 0, 0) == 1.0);
        double rest = 0.0;
        for (int u = 0; u < map.height(); ++u)
            for (int v = 0; v < map.width(); ++v)
                if (u + v > 0) rest = std::max(rest, map(u, v, 0));
        CHECK(rest == 0.0);
    }

    CHECK_THROWS_AS(cmd_visualize_dct(c, out / "missing.png", s1.checkpoint, out / "vis_missing", report), DataError);
}

TEST_CASE("ablation emits the six variants") {
    HarnessConfig c = small_config();
    c.train.max_iterations = 3;
    const PairedDataset train = toy(4, 8, 1);
    const PairedDataset test = toy(2, 8, 2);
    std::ostringstream report;
    const fs::path out = scratch("ablate");
    const std::vector<ResultRow> rows = cmd_ablate(c, train, test, out, report);
    REQUIRE(rows.size() == kAblationVariants.size() * kAblationAlphas.size());
    std::vector<std::string> names;
    for (const ResultRow& r : rows)
        if (names.empty() || names.back() != r.variant) names.push_back(r.variant);
    CHECK(names == std::vector<std::string>{"baseline", "+FM", "+RM", "+AT", "+RM+AT", "Ours"});
    for (std::size_t k = 0; k < rows.size(); ++k) CHECK(rows[k].alpha == kAblationAlphas[k % 3]);
    const std::vector<std::string> csv = lines_of(out / "ablation.csv");
    CHECK(csv.size() == 1 + rows.size());
    CHECK(csv.front() == kResultsHeader);
}
