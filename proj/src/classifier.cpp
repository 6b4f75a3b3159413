#include "freqshield/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "freqshield/binary_io.hpp"
#include "freqshield/dct.hpp"
#include "freqshield/errors.hpp"

namespace freqshield {

const char* to_string(Label label) { return label == Label::Clean ? "clean" : "adversarial"; }

void ClassifierParams::validate() const {
    auto fail = [](const std::string& what) { throw ShapeError("classifier params: " + what); };
    if (gamma <= 0) fail("gamma must be positive");
    if (pooled_height() <= 0 || pooled_width() <= 0) fail("training side smaller than one pooling window");
    if (w1.empty() || w2.empty() || w3.empty()) fail("missing weights");
    if (w1.width() != input_dim()) fail("W1 input dimension does not match pooled feature size");
    if (b1.shape() != Shape{w1.height(), 1, 1}) fail("b1 shape");
    if (w2.width() != w1.height()) fail("W2 input dimension does not match W1 output");
    if (b2.shape() != Shape{w2.height(), 1, 1}) fail("b2 shape");
    if (w3.width() != w2.height()) fail("W3 input dimension does not match W2 output");
    if (w3.height() != 2) fail("W3 must have two outputs");
    if (b3.shape() != Shape{2, 1, 1}) fail("b3 shape");
}

std::vector<Tensor*> ClassifierParams::tensors() { return {&w1, &b1, &w2, &b2, &w3, &b3}; }

std::vector<const Tensor*> ClassifierParams::tensors() const { return {&w1, &b1, &w2, &b2, &w3, &b3}; }

namespace {

Tensor glorot(int out, int in, RngStream& stream) {
    const double a = std::sqrt(6.0 / (in + out));
    Tensor w(out, in, 1);
    for (double& v : w.values()) v = stream.uniform(-a, a);
    return w;
}

Tensor average_pool(const Tensor& map, int gamma) {
    const int ph = map.height() / gamma;
    const int pw = map.width() / gamma;
    if (ph == 0 || pw == 0) {
        throw ShapeError("featurize: input " + to_string(map.shape()) + " smaller than a " +
                         std::to_string(gamma) + "x" + std::to_string(gamma) + " window");
    }
    Tensor out(ph, pw, 1);
    const double norm = 1.0 / (gamma * gamma);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x) {
            double acc = 0.0;
            for (int dy = 0; dy < gamma; ++dy)
                for (int dx = 0; dx < gamma; ++dx) acc += map(y * gamma + dy, x * gamma + dx, 0);
            out(y, x, 0) = acc * norm;
        }
    return out;
}

}  // namespace

ClassifierParams init_classifier(int train_height, int train_width, int gamma, int hidden1, int hidden2,
                                 double leaky_slope, RngStream& stream) {
    ClassifierParams p;
    p.gamma = gamma;
    p.leaky_slope = leaky_slope;
    p.train_height = train_height;
    p.train_width = train_width;
    if (gamma <= 0 || p.input_dim() <= 0) {
        throw ShapeError("init_classifier: training side smaller than one pooling window");
    }
    p.w1 = glorot(hidden1, p.input_dim(), stream);
    p.b1 = Tensor(hidden1, 1, 1);
    p.w2 = glorot(hidden2, hidden1, stream);
    p.b2 = Tensor(hidden2, 1, 1);
    p.w3 = glorot(2, hidden2, stream);
    p.b3 = Tensor(2, 1, 1);
    return p;
}

Tensor channel_mean_spectrum(const Tensor& x) {
    const SpectralMap spectrum = dct2(x);
    const Tensor& coeffs = spectrum.coefficients();
    Tensor mean(x.height(), x.width(), 1);
    std::vector<double> column(static_cast<std::size_t>(x.channels()));
    for (int y = 0; y < x.height(); ++y)
        for (int xx = 0; xx < x.width(); ++xx) {
            // Sorted summation makes the mean exactly invariant to channel order.
            for (int c = 0; c < x.channels(); ++c) column[static_cast<std::size_t>(c)] = coeffs(y, xx, c);
            std::sort(column.begin(), column.end());
            double acc = 0.0;
            for (double v : column) acc += v;
            mean(y, xx, 0) = acc / x.channels();
        }
    return mean;
}

std::vector<double> featurize(const Tensor& x, int gamma) {
    if (gamma <= 0) throw InvalidArgument("featurize: gamma must be positive");
    if (x.height() < gamma || x.width() < gamma) {
        throw ShapeError("featurize: input " + to_string(x.shape()) + " smaller than one pooling window");
    }
    const Tensor pooled = average_pool(channel_mean_spectrum(x), gamma);
    return pooled.storage();
}

Tensor adaptive_average_pool(const Tensor& map, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ShapeError("adaptive_average_pool: output size must be positive");
    Tensor out(out_h, out_w, 1);
    const int h = map.height();
    const int w = map.width();
    for (int y = 0; y < out_h; ++y) {
        const int y0 = (y * h) / out_h;
        const int y1 = ((y + 1) * h + out_h - 1) / out_h;
        for (int x = 0; x < out_w; ++x) {
            const int x0 = (x * w) / out_w;
            const int x1 = ((x + 1) * w + out_w - 1) / out_w;
            double acc = 0.0;
            for (int yy = y0; yy < y1; ++yy)
                for (int xx = x0; xx < x1; ++xx) acc += map(yy, xx, 0);
            out(y, x, 0) = acc / ((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

Tensor classifier_features(const Tensor& x, const ClassifierParams& params) {
    const int gamma = params.gamma;
    if (x.height() < gamma || x.width() < gamma) {
        throw ShapeError("classify: input " + to_string(x.shape()) + " smaller than one pooling window");
    }
    Tensor mean = channel_mean_spectrum(x);
    if (x.height() / gamma != params.pooled_height() || x.width() / gamma != params.pooled_width()) {
        mean = adaptive_average_pool(mean, params.train_height, params.train_width);
    }
    const Tensor pooled = average_pool(mean, gamma);
    return pooled.reshaped(Shape{params.input_dim(), 1, 1});
}

ClassifierVars classifier_vars(ad::Tape& tape, const ClassifierParams& params, bool requires_grad) {
    return ClassifierVars{tape.leaf(params.w1, requires_grad), tape.leaf(params.b1, requires_grad),
                          tape.leaf(params.w2, requires_grad), tape.leaf(params.b2, requires_grad),
                          tape.leaf(params.w3, requires_grad), tape.leaf(params.b3, requires_grad)};
}

ad::Var classifier_logits(ad::Var features, const ClassifierVars& v, double leaky_slope) {
    ad::Var h1 = ad::leaky_relu(ad::add(ad::matmul(v.w1, features), v.b1), leaky_slope);
    ad::Var h2 = ad::leaky_relu(ad::add(ad::matmul(v.w2, h1), v.b2), leaky_slope);
    return ad::add(ad::matmul(v.w3, h2), v.b3);
}

Verdict classify(const Tensor& x, const ClassifierParams& params) {
    params.validate();
    ad::Tape tape;
    const ad::Var features = tape.constant(classifier_features(x, params));
    const ad::Var logits = classifier_logits(features, classifier_vars(tape, params, false), params.leaky_slope);
    const Tensor& z = logits.value();
    const double zmax = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - zmax);
    const double e1 = std::exp(z[1] - zmax);
    Verdict verdict;
    verdict.probabilities = {e0 / (e0 + e1), e1 / (e0 + e1)};
    verdict.label = verdict.probabilities[1] > verdict.probabilities[0] ? Label::Adversarial : Label::Clean;
    verdict.confidence = verdict.probabilities[static_cast<int>(verdict.label)];
    return verdict;
}

double classifier_accuracy(const ClassifierParams& params, std::span<const Tensor> samples,
                           std::span<const Label> labels) {
    if (samples.size() != labels.size()) throw InvalidArgument("classifier_accuracy: size mismatch");
    if (samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) correct += classify(samples[i], params).label == labels[i];
    return static_cast<double>(correct) / samples.size();
}

TrainedClassifier train_classifier(std::span<const Tensor> clean, std::span<const Tensor> adversarial,
                                   const ClassifierTrainConfig& config, RngStream& stream) {
    if (clean.empty() || adversarial.empty()) throw InvalidArgument("train_classifier: empty dataset");
    if (config.batch_size <= 0 || config.epochs < 0) throw InvalidArgument("train_classifier: bad config");
    const Tensor& first = clean.front();

    std::vector<const Tensor*> samples;
    std::vector<Label> labels;
    for (const Tensor& t : clean) {
        samples.push_back(&t);
        labels.push_back(Label::Clean);
    }
    for (const Tensor& t : adversarial) {
        samples.push_back(&t);
        labels.push_back(Label::Adversarial);
    }
    for (const Tensor* s : samples) {
        if (s->height() < config.gamma || s->width() < config.gamma) {
            throw ShapeError("train_classifier: sample smaller than one pooling window");
        }
    }

    RngStream init_stream = stream.split(1);
    RngStream order_stream = stream.split(2);

    TrainedClassifier result;
    ClassifierParams& params = result.params;
    params = init_classifier(first.height(), first.width(), config.gamma, config.hidden1, config.hidden2,
                             config.leaky_slope, init_stream);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_stream.below(i)]);
    const auto held_out = static_cast<std::size_t>(std::floor(config.validation_fraction * order.size()));
    std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(held_out));
    std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(held_out), order.end());
    if (train_idx.empty()) throw InvalidArgument("train_classifier: validation split leaves no training data");

    std::vector<Tensor> features;
    features.reserve(samples.size());
    for (const Tensor* s : samples) features.push_back(classifier_features(*s, params));

    // Optimize on standardized features; the affine map is folded into (w1, b1) afterwards,
    // so the returned network consumes raw features.
    const std::size_t dim = static_cast<std::size_t>(params.input_dim());
    std::vector<double> mu(dim, 0.0), sigma(dim, 0.0);
    for (std::size_t i : train_idx)
        for (std::size_t j = 0; j < dim; ++j) mu[j] += features[i][j];
    for (double& m : mu) m /= static_cast<double>(train_idx.size());
    for (std::size_t i : train_idx)
        for (std::size_t j = 0; j < dim; ++j) sigma[j] += (features[i][j] - mu[j]) * (features[i][j] - mu[j]);
    for (double& sd : sigma) {
        sd = std::sqrt(sd / static_cast<double>(train_idx.size()));
        if (!(sd > 1e-12)) sd = 1.0;
    }
    std::vector<Tensor> standardized = features;
    for (Tensor& f : standardized)
        for (std::size_t j = 0; j < dim; ++j) f[j] = (f[j] - mu[j]) / sigma[j];

    std::vector<Tensor> param_values;
    for (const Tensor* t : std::as_const(params).tensors()) param_values.push_back(*t);
    Adam adam(config.adam, param_values);

    ad::Tape tape;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = train_idx.size(); i > 1; --i) {
            std::swap(train_idx[i - 1], train_idx[order_stream.below(i)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
            const std::size_t end = std::min(train_idx.size(), start + config.batch_size);
            tape.clear();
            ClassifierVars vars{tape.leaf(param_values[0]), tape.leaf(param_values[1]),
                                tape.leaf(param_values[2]), tape.leaf(param_values[3]),
                                tape.leaf(param_values[4]), tape.leaf(param_values[5])};
            ad::Var total;
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t idx = train_idx[k];
                ad::Var logits = classifier_logits(tape.constant(standardized[idx]), vars, params.leaky_slope);
                ad::Var ce = ad::softmax_cross_entropy(logits, static_cast<int>(labels[idx]));
                total = k == start ? ce : ad::add(total, ce);
            }
            ad::Var loss = ad::scale(total, 1.0 / static_cast<double>(end - start));
            const double value = loss.value()[0];
            if (!std::isfinite(value)) {
                throw NumericalError("train_classifier: non-finite loss at epoch " + std::to_string(epoch));
            }
            epoch_loss += value * static_cast<double>(end - start);
            const ad::Var wrt[] = {vars.w1, vars.b1, vars.w2, vars.b2, vars.w3, vars.b3};
            const std::vector<Tensor> grads = ad::grad(tape, loss, wrt);
            adam.step(param_values, grads, config.adam.learning_rate);
        }
        result.log.epoch_loss.push_back(epoch_loss / static_cast<double>(train_idx.size()));
    }

    Tensor& w1 = param_values[0];
    Tensor& b1 = param_values[1];
    for (int o = 0; o < w1.height(); ++o) {
        double shift = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            double& w = w1(o, static_cast<int>(j), 0);
            w /= sigma[j];
            shift += w * mu[j];
        }
        b1[static_cast<std::size_t>(o)] -= shift;
    }
    auto targets = params.tensors();
    for (std::size_t k = 0; k < targets.size(); ++k) *targets[k] = param_values[k];
    params.validate();

    auto accuracy = [&](const std::vector<std::size_t>& idx) {
        std::size_t correct = 0;
        for (std::size_t i : idx) correct += classify(*samples[i], params).label == labels[i];
        return static_cast<double>(correct) / static_cast<double>(idx.size());
    };
    result.log.train_accuracy = accuracy(train_idx);
    if (!val_idx.empty()) result.log.validation_accuracy = accuracy(val_idx);
    result.log.train_count = train_idx.size();
    result.log.validation_count = val_idx.size();
    return result;
}

namespace {
constexpr char kClassifierMagic[4] = {'F', 'S', 'C', 'L'};
constexpr std::uint16_t kClassifierVersion = 1;
}  // namespace

void save_classifier(const ClassifierParams& params, const std::filesystem::path& path) {
    params.validate();
    BinaryWriter out;
    out.bytes(kClassifierMagic, 4);
    out.u16(kClassifierVersion);
    out.u16(static_cast<std::uint16_t>(params.gamma));
    out.u16(static_cast<std::uint16_t>(params.train_height));
    out.u16(static_cast<std::uint16_t>(params.train_width));
    out.u16(static_cast<std::uint16_t>(params.hidden1()));
    out.u16(static_cast<std::uint16_t>(params.hidden2()));
    out.f64(params.leaky_slope);
    for (const Tensor* t : params.tensors()) out.tensor(*t);
    out.write_file(path);
}

ClassifierParams load_classifier(const std::filesystem::path& path) {
    BinaryReader in = BinaryReader::from_file(path);
    char magic[4];
    in.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kClassifierMagic)) in.fail("not a classifier checkpoint");
    if (in.u16() != kClassifierVersion) in.fail("unsupported classifier checkpoint version");
    ClassifierParams p;
    p.gamma = in.u16();
    p.train_height = in.u16();
    p.train_width = in.u16();
    const int hidden1 = in.u16();
    const int hidden2 = in.u16();
    if (p.gamma == 0 || p.input_dim() == 0 || hidden1 == 0 || hidden2 == 0) in.fail("invalid header dimensions");
    p.leaky_slope = in.f64();
    p.w1 = in.tensor(Shape{hidden1, p.input_dim(), 1});
    p.b1 = in.tensor(Shape{hidden1, 1, 1});
    p.w2 = in.tensor(Shape{hidden2, hidden1, 1});
    p.b2 = in.tensor(Shape{hidden2, 1, 1});
    p.w3 = in.tensor(Shape{2, hidden2, 1});
    p.b3 = in.tensor(Shape{2, 1, 1});
    in.expect_end();
    p.validate();
    return p;
}

}  // namespace freqshield
