#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "freqshield/classifier.hpp"
#include "freqshield/dct.hpp"
#include "freqshield/errors.hpp"
#include "gradcheck.hpp"

using namespace freqshield;
namespace fs = std::filesystem;

namespace {

ClassifierParams zero_classifier(int side) {
    RngStream s(0);
    ClassifierParams p = init_classifier(side, side, 3, 8, 4, 0.01, s);
    for (Tensor* t : p.tensors()) *t = Tensor(t->shape());
    return p;
}

// Smooth image: random low band only. Energized variant adds high-band coefficients.
Tensor banded_image(int side, bool energize_high, RngStream& s) {
    Tensor spec(side, side, 3);
    const Tensor r = radius_map(side, side);
    for (int u = 0; u < side; ++u)
        for (int v = 0; v < side; ++v)
            for (int c = 0; c < 3; ++c) {
                if (r(u, v, 0) < 0.2)
                    spec(u, v, c) = s.uniform(-1.0, 1.0) + (u == 0 && v == 0 ? side * 0.5 : 0.0);
                else if (energize_high && r(u, v, 0) > 0.5)
                    spec(u, v, c) = s.uniform(0.2, 0.6);
            }
    return idct2(SpectralMap(spec));
}

}  // namespace

TEST_CASE("featurize lengths and window means") {
    RngStream s(1);
    CHECK(featurize(oracle::random_tensor(48, 48, 3, s), 3).size() == 256);
    CHECK(featurize(oracle::random_tensor(50, 47, 3, s), 3).size() == 16 * 15);

    const std::vector<double> flat = featurize(Tensor(12, 9, 3, 0.4), 3);
    int nonzero = 0;
    for (double v : flat) nonzero += std::abs(v) > 1e-12 ? 1 : 0;
    CHECK(nonzero == 1);
    CHECK(std::abs(flat[0]) > 0.0);

    const Tensor x = oracle::random_tensor(6, 6, 3, s);
    const Tensor spec = oracle::direct_dct2(x);
    const std::vector<double> f = featurize(x, 3);
    REQUIRE(f.size() == 4);
    for (int py = 0; py < 2; ++py)
        for (int px = 0; px < 2; ++px) {
            double acc = 0.0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int c = 0; c < 3; ++c) acc += spec(py * 3 + i, px * 3 + j, c);
            CHECK(f[static_cast<std::size_t>(py * 2 + px)] == doctest::Approx(acc / 27.0).epsilon(1e-12));
        }
    CHECK_THROWS_AS(featurize(Tensor(2, 5, 3), 3), ShapeError);
}

TEST_CASE("featurize is exactly invariant to channel order") {
    RngStream s(2);
    const Tensor x = oracle::random_tensor(12, 15, 3, s);
    Tensor permuted(x.shape());
    for (int y = 0; y < 12; ++y)
        for (int w = 0; w < 15; ++w) {
            permuted(y, w, 0) = x(y, w, 2);
            permuted(y, w, 1) = x(y, w, 0);
            permuted(y, w, 2) = x(y, w, 1);
        }
    CHECK(featurize(x, 3) == featurize(permuted, 3));
}

TEST_CASE("zero classifier ties to Clean") {
    const Verdict v = classify(Tensor(12, 12, 3, 0.3), zero_classifier(12));
    CHECK(v.label == Label::Clean);
    CHECK(v.confidence == 0.5);
}

TEST_CASE("large adversarial bias always wins") {
    ClassifierParams p = zero_classifier(12);
    p.b3[1] = 100.0;
    RngStream s(3);
    for (int i = 0; i < 10; ++i) {
        const Verdict v = classify(oracle::random_tensor(12, 12, 3, s, 0.0, 1.0), p);
        CHECK(v.label == Label::Adversarial);
        CHECK(v.confidence > 1.0 - 1e-12);
    }
}

TEST_CASE("softmax probabilities sum to one and confidence is the max") {
    RngStream s(4);
    const ClassifierParams p = init_classifier(12, 12, 3, 16, 8, 0.01, s);
    for (int i = 0; i < 20; ++i) {
        const Verdict v = classify(oracle::random_tensor(12, 12, 3, s, 0.0, 1.0), p);
        CHECK(std::abs(v.probabilities[0] + v.probabilities[1] - 1.0) <= 1e-12);
        CHECK(v.confidence >= 0.5);
        CHECK(v.confidence == std::max(v.probabilities[0], v.probabilities[1]));
    }
}

TEST_CASE("adaptive pooling serves inputs larger than the training size") {
    RngStream s(5);
    const ClassifierParams p = init_classifier(48, 48, 3, 16, 8, 0.01, s);
    const Tensor big = oracle::random_tensor(96, 96, 3, s, 0.0, 1.0);
    const Verdict v = classify(big, p);
    CHECK(v.confidence >= 0.5);
    CHECK(classifier_features(big, p).shape() == Shape{256, 1, 1});

    Tensor map(4, 4, 1);
    for (int i = 0; i < 16; ++i) map[static_cast<std::size_t>(i)] = i;
    const Tensor pooled = adaptive_average_pool(map, 2, 2);
    CHECK(pooled(0, 0, 0) == doctest::Approx(2.5));
    CHECK(pooled(1, 1, 0) == doctest::Approx(12.5));
    CHECK(adaptive_average_pool(map, 4, 4) == map);
}

TEST_CASE("FC parameter gradients match finite differences") {
    RngStream s(6);
    for (int trial = 0; trial < 5; ++trial) {
        const ClassifierParams p = init_classifier(9, 12, 3, 6, 4, 0.01, s);
        const Tensor features = classifier_features(oracle::random_tensor(9, 12, 3, s), p);
        const int label = trial % 2;
        std::vector<Tensor> inputs;
        for (const Tensor* t : p.tensors()) inputs.push_back(*t);
        inputs.push_back(features);
        const double err = oracle::primitive_gradient_error(
            [&](ad::Tape&, std::span<const ad::Var> v) {
                const ClassifierVars vars{v[0], v[1], v[2], v[3], v[4], v[5]};
                return ad::softmax_cross_entropy(classifier_logits(v[6], vars, p.leaky_slope), label);
            },
            inputs, s);
        CHECK(err <= 1e-5);
    }
}

TEST_CASE("separable synthetic set reaches perfect validation accuracy") {
    RngStream s(7);
    std::vector<Tensor> clean, adversarial;
    for (int i = 0; i < 40; ++i) {
        clean.push_back(banded_image(12, false, s));
        adversarial.push_back(banded_image(12, true, s));
    }
    ClassifierTrainConfig config;
    config.epochs = 50;
    config.hidden1 = 16;
    config.hidden2 = 8;
    config.adam.learning_rate = 2e-3;
    RngStream train_stream(8);
    const TrainedClassifier trained = train_classifier(clean, adversarial, config, train_stream);
    REQUIRE(trained.log.validation_accuracy.has_value());
    CHECK(*trained.log.validation_accuracy == 1.0);
    CHECK(trained.log.epoch_loss.size() == 50);
    CHECK(trained.log.validation_count == 16);
}

TEST_CASE("full-batch loss decreases monotonically on a two-sample set") {
    RngStream s(9);
    const std::vector<Tensor> clean{banded_image(9, false, s)};
    const std::vector<Tensor> adversarial{banded_image(9, true, s)};
    ClassifierTrainConfig config;
    config.epochs = 40;
    config.batch_size = 2;
    config.validation_fraction = 0.0;
    config.hidden1 = 8;
    config.hidden2 = 4;
    config.adam.learning_rate = 1e-4;
    RngStream train_stream(10);
    const TrainedClassifier trained = train_classifier(clean, adversarial, config, train_stream);
    CHECK_FALSE(trained.log.validation_accuracy.has_value());
    for (std::size_t i = 1; i < trained.log.epoch_loss.size(); ++i)
        CHECK(trained.log.epoch_loss[i] < trained.log.epoch_loss[i - 1]);
}

TEST_CASE("training rejects empty datasets") {
    RngStream s(11);
    const std::vector<Tensor> one{Tensor(9, 9, 3)};
    const std::vector<Tensor> none;
    CHECK_THROWS_AS(train_classifier(one, none, ClassifierTrainConfig{}, s), InvalidArgument);
    CHECK_THROWS_AS(train_classifier(none, one, ClassifierTrainConfig{}, s), InvalidArgument);
}

TEST_CASE("training is deterministic given the stream") {
    RngStream s(12);
    std::vector<Tensor> clean, adversarial;
    for (int i = 0; i < 6; ++i) {
        clean.push_back(banded_image(9, false, s));
        adversarial.push_back(banded_image(9, true, s));
    }
    ClassifierTrainConfig config;
    config.epochs = 5;
    config.hidden1 = 8;
    config.hidden2 = 4;
    RngStream a(13), b(13);
    CHECK(train_classifier(clean, adversarial, config, a).params == train_classifier(clean, adversarial, config, b).params);
}

TEST_CASE("checkpoint round trip and header") {
    const fs::path dir = fs::temp_directory_path() / "freqshield_test_classifier";
    fs::create_directories(dir);
    RngStream s(14);
    const ClassifierParams p = init_classifier(48, 48, 3, 128, 32, 0.01, s);
    save_classifier(p, dir / "c.bin");
    CHECK(load_classifier(dir / "c.bin") == p);

    std::ifstream in(dir / "c.bin", std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "FSCL");
    const auto expected_size = 16 + 8 + 8 * (256 * 128 + 128 + 128 * 32 + 32 + 32 * 2 + 2);
    CHECK(fs::file_size(dir / "c.bin") == static_cast<std::uintmax_t>(expected_size));

    std::ofstream(dir / "bad.bin", std::ios::binary) << "NOPE0000000000000000";
    CHECK_THROWS_AS(load_classifier(dir / "bad.bin"), DataError);
    fs::resize_file(dir / "c.bin", 100);
    CHECK_THROWS_AS(load_classifier(dir / "c.bin"), DataError);
}
