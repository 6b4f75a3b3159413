#include "freqshield/backbone.hpp"

#include <cmath>

#include "freqshield/binary_io.hpp"
#include "freqshield/errors.hpp"

namespace freqshield {

namespace {

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;
constexpr int kImageChannels = 3;

void add_conv(std::vector<ParamSpec>& out, const std::string& name, int cin, int cout) {
    out.push_back(ParamSpec{name + ".kernel", Shape{kTaps, cin, cout}, kTaps * cin, kTaps * cout});
    out.push_back(ParamSpec{name + ".bias", Shape{1, 1, cout}, 0, 0});
}

void add_hourglass_level(std::vector<ParamSpec>& out, const std::string& prefix, int level, int c) {
    const std::string name = prefix + ".level" + std::to_string(level);
    add_conv(out, name + ".skip", c, c);
    add_conv(out, name + ".down", c, c);
    if (level > 1) {
        add_hourglass_level(out, prefix, level - 1, c);
    } else {
        add_conv(out, prefix + ".bottom", c, c);
    }
    add_conv(out, name + ".up", c, c);
}

// Hands out consecutive (kernel, bias) pairs in layout order.
class ConvCursor {
public:
    explicit ConvCursor(std::span<const ad::Var> params) : params_(params) {}

    ad::Var conv(ad::Var x) {
        if (next_ + 2 > params_.size()) throw ShapeError("backbone: parameter list too short for config");
        ad::Var k = params_[next_++];
        ad::Var b = params_[next_++];
        return ad::conv2d(x, k, b);
    }

    void finish() const {
        if (next_ != params_.size()) throw ShapeError("backbone: parameter list too long for config");
    }

private:
    std::span<const ad::Var> params_;
    std::size_t next_ = 0;
};

ad::Var act(ad::Var x) { return ad::leaky_relu(x, kBackboneLeakySlope); }

ad::Var hourglass_level(ad::Var f, int level, ConvCursor& cursor) {
    ad::Var skip = act(cursor.conv(f));
    ad::Var down = act(cursor.conv(ad::downsample2x(f)));
    ad::Var inner = level > 1 ? hourglass_level(down, level - 1, cursor) : act(cursor.conv(down));
    ad::Var up = cursor.conv(ad::upsample2x(inner));
    return act(ad::add(skip, up));
}

ad::Var mask_site(ad::Var x, const MaskPolicy& policy, RngStream& stream, std::vector<BinaryMask>& applied) {
    const Shape& s = x.shape();
    BinaryMask mask = [&] {
        if (policy.resample_per_call) return sample_mask(s.height, s.width, policy, stream);
        RngStream frozen = stream;
        return sample_mask(s.height, s.width, policy, frozen);
    }();
    ad::Var out = ad::masked_linear(x, mask);
    applied.push_back(std::move(mask));
    return out;
}

}  // namespace

int BackboneConfig::upsample_stages() const noexcept {
    int stages = 0;
    for (int s = scale; s > 1; s /= 2) ++stages;
    return stages;
}

void BackboneConfig::validate() const {
    if (scale < 2 || (scale & (scale - 1)) != 0) throw InvalidArgument("backbone: scale must be a power of two >= 2");
    if (num_hourglass < 1) throw InvalidArgument("backbone: num_hourglass must be positive");
    if (base_channels < 1) throw InvalidArgument("backbone: base_channels must be positive");
    if (hg_depth < 1) throw InvalidArgument("backbone: hg_depth must be positive");
    mask_policy.validate();
}

std::vector<ParamSpec> backbone_layout(const BackboneConfig& config) {
    config.validate();
    const int c = config.base_channels;
    std::vector<ParamSpec> out;
    add_conv(out, "head", kImageChannels, c);
    for (int k = 0; k < config.num_hourglass; ++k) {
        const std::string hg = "hg" + std::to_string(k);
        add_hourglass_level(out, hg, config.hg_depth, c);
        add_conv(out, hg + ".res.conv1", c, c);
        add_conv(out, hg + ".res.conv2", c, c);
        const int stages = config.upsample_stages();
        for (int s = 0; s < stages; ++s) {
            add_conv(out, hg + ".exit.stage" + std::to_string(s), c, s + 1 == stages ? kImageChannels : c);
        }
    }
    return out;
}

std::size_t BackboneParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.size();
    return n;
}

bool BackboneParams::all_finite() const noexcept {
    for (const Tensor& t : tensors)
        if (!t.all_finite()) return false;
    return true;
}

BackboneParams init_backbone(const BackboneConfig& config, RngStream& stream) {
    BackboneParams params;
    for (const ParamSpec& spec : backbone_layout(config)) {
        Tensor t(spec.shape, 0.0);
        if (spec.fan_out > 0) {
            const double a = std::sqrt(6.0 / (spec.fan_in + spec.fan_out));
            for (double& v : t.values()) v = stream.uniform(-a, a);
        }
        params.tensors.push_back(std::move(t));
    }
    return params;
}

MaskStreams::MaskStreams(const RngStream& root, int site_count) {
    for (int i = 0; i < site_count; ++i) sites_.push_back(root.split(static_cast<std::uint64_t>(i)));
}

GraphOutput forward_graph(ad::Var x, std::span<const ad::Var> params, const BackboneConfig& config, bool gate,
                          MaskStreams& streams) {
    config.validate();
    const Shape& s = x.shape();
    const int align = 1 << config.hg_depth;
    if (s.channels != kImageChannels) throw ShapeError("backbone: input must have 3 channels");
    if (s.height % align != 0 || s.width % align != 0) {
        throw ShapeError("backbone: input " + to_string(s) + " not divisible by 2^hg_depth");
    }
    const bool active = gate && config.masks_enabled;
    if (active && streams.size() < config.mask_site_count()) {
        throw InvalidArgument("backbone: need one mask stream per mask site");
    }

    GraphOutput out;
    ConvCursor cursor(params);
    int site = 0;
    // Streams are only touched when masks are active.
    auto masked = [&](ad::Var v) {
        if (!active) return v;
        return mask_site(v, config.mask_policy, streams.site(site++), out.masks);
    };

    ad::Var input = masked(x);
    ad::Var base = input;
    for (int st = 0; st < config.upsample_stages(); ++st) base = ad::upsample2x(base);

    ad::Var feature = act(cursor.conv(input));
    for (int k = 0; k < config.num_hourglass; ++k) {
        out.hourglass_entry_features.push_back(feature.value());
        ad::Var entry = masked(feature);
        ad::Var h = ad::add(entry, hourglass_level(entry, config.hg_depth, cursor));
        h = masked(h);
        ad::Var res = cursor.conv(act(cursor.conv(h)));
        feature = ad::add(h, res);

        ad::Var e = feature;
        const int stages = config.upsample_stages();
        for (int st = 0; st < stages; ++st) {
            e = cursor.conv(ad::upsample2x(e));
            if (st + 1 < stages) e = act(e);
        }
        out.intermediates.push_back(ad::add(e, base));
    }
    cursor.finish();
    out.sr = out.intermediates.back();
    return out;
}

SrOutput forward(const Tensor& x, const BackboneParams& params, const BackboneConfig& config, bool gate,
                 MaskStreams& streams) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    vars.reserve(params.tensors.size());
    for (const Tensor& t : params.tensors) vars.push_back(tape.constant(t));
    GraphOutput g = forward_graph(tape.constant(x), vars, config, gate, streams);
    SrOutput out;
    out.sr = g.sr.value();
    for (const ad::Var& v : g.intermediates) out.intermediates.push_back(v.value());
    out.hourglass_entry_features = std::move(g.hourglass_entry_features);
    return out;
}

Tensor gradient_weights(const Tensor& hr) {
    const int h = hr.height();
    const int w = hr.width();
    const int ch = hr.channels();
    Tensor weights(hr.shape());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int c = 0; c < ch; ++c) {
                const double gx = x + 1 < w ? hr(y, x + 1, c) - hr(y, x, c) : 0.0;
                const double gy = y + 1 < h ? hr(y + 1, x, c) - hr(y, x, c) : 0.0;
                acc += std::sqrt(gx * gx + gy * gy);
            }
            const double wv = 1.0 + acc / ch;
            for (int c = 0; c < ch; ++c) weights(y, x, c) = wv;
        }
    }
    return weights;
}

double sr_loss(const Tensor& sr, std::span<const Tensor> intermediates, const Tensor& hr) {
    require_same_shape(sr, hr, "sr_loss");
    double total = 0.0;
    for (const Tensor& inter : intermediates) {
        require_same_shape(inter, hr, "sr_loss");
        double acc = 0.0;
        for (std::size_t i = 0; i < hr.size(); ++i) acc += std::abs(inter[i] - hr[i]);
        total += acc / static_cast<double>(hr.size());
    }
    const Tensor w = gradient_weights(hr);
    double acc = 0.0;
    for (std::size_t i = 0; i < hr.size(); ++i) acc += w[i] * std::abs(sr[i] - hr[i]);
    return total + acc / static_cast<double>(hr.size());
}

ad::Var sr_loss(const GraphOutput& out, const Tensor& hr) {
    ad::Tape& tape = *out.sr.tape();
    const ad::Var target = tape.constant(hr);
    ad::Var total = ad::weighted_l1_loss(out.sr, target, gradient_weights(hr));
    for (const ad::Var& inter : out.intermediates) total = ad::add(total, ad::l1_loss(inter, target));
    return total;
}

DefendedOutput defended_pipeline(const Tensor& x, const BackboneParams& params, const BackboneConfig& config,
                                 const ClassifierParams& classifier, MaskStreams& streams) {
    DefendedOutput out;
    out.verdict = classify(x, classifier);
    out.gate = out.verdict.label == Label::Adversarial;
    out.sr = forward(x, params, config, out.gate, streams).sr;
    return out;
}

namespace {
constexpr char kBackboneMagic[4] = {'F', 'S', 'B', 'B'};
constexpr std::uint16_t kBackboneVersion = 1;
}  // namespace

void save_backbone(const BackboneParams& params, const BackboneConfig& config, const std::filesystem::path& path) {
    const auto layout = backbone_layout(config);
    if (layout.size() != params.tensors.size()) throw ShapeError("save_backbone: params do not match config");
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layout[i].shape != params.tensors[i].shape()) {
            throw ShapeError("save_backbone: " + layout[i].name + " has the wrong shape");
        }
    }
    BinaryWriter out;
    out.bytes(kBackboneMagic, 4);
    out.u16(kBackboneVersion);
    out.u16(static_cast<std::uint16_t>(config.scale));
    out.u16(static_cast<std::uint16_t>(config.num_hourglass));
    out.u16(static_cast<std::uint16_t>(config.base_channels));
    out.u16(static_cast<std::uint16_t>(config.hg_depth));
    out.u16(0);
    out.u64(params.parameter_count());
    for (const Tensor& t : params.tensors) out.tensor(t);
    out.write_file(path);
}

BackboneParams load_backbone(const std::filesystem::path& path, BackboneConfig& config) {
    BinaryReader in = BinaryReader::from_file(path);
    char magic[4];
    in.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kBackboneMagic)) in.fail("not a backbone checkpoint");
    if (in.u16() != kBackboneVersion) in.fail("unsupported backbone checkpoint version");
    BackboneConfig loaded = config;
    loaded.scale = in.u16();
    loaded.num_hourglass = in.u16();
    loaded.base_channels = in.u16();
    loaded.hg_depth = in.u16();
    in.u16();
    try {
        loaded.validate();
    } catch (const Error& e) {
        in.fail(std::string("invalid header: ") + e.what());
    }
    const auto layout = backbone_layout(loaded);
    const std::uint64_t count = in.u64();
    BackboneParams params;
    for (const ParamSpec& spec : layout) params.tensors.push_back(in.tensor(spec.shape));
    if (count != params.parameter_count()) in.fail("parameter count does not match header");
    in.expect_end();
    config = loaded;
    return params;
}

}  // namespace freqshield
