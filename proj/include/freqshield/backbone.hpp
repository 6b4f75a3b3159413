#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "freqshield/autodiff.hpp"
#include "freqshield/classifier.hpp"
#include "freqshield/freq_mask.hpp"
#include "freqshield/rng.hpp"
#include "freqshield/tensor.hpp"

namespace freqshield {

/// Miniature stacked-hourglass SR network.
///
/// head mask -> head conv -> for each hourglass:
///     entry mask -> encoder/decoder with additive skips (+ identity) -> pre-residual mask
///     -> residual block -> SR exit (nearest upsample + conv per x2 stage, plus an upsampled
///        copy of the masked input)
///
/// Every hourglass produces an intermediate SR image; the last one is the network output.
struct BackboneConfig {
    int scale = 2;
    int num_hourglass = 2;
    int base_channels = 8;
    int hg_depth = 2;
    MaskPolicy mask_policy{};
    bool masks_enabled = true;

    void validate() const;
    int mask_site_count() const noexcept { return 1 + 2 * num_hourglass; }
    int upsample_stages() const noexcept;
};

inline constexpr double kBackboneLeakySlope = 0.1;

struct ParamSpec {
    std::string name;
    Shape shape;
    int fan_in = 0;
    int fan_out = 0;  ///< 0 for biases
};

/// Ordered list of every parameter tensor; a pure function of the config.
std::vector<ParamSpec> backbone_layout(const BackboneConfig& config);

struct BackboneParams {
    std::vector<Tensor> tensors;

    std::size_t parameter_count() const noexcept;
    bool all_finite() const noexcept;
    friend bool operator==(const BackboneParams&, const BackboneParams&) = default;
};

/// Kernels uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)); biases zero.
BackboneParams init_backbone(const BackboneConfig& config, RngStream& stream);

/// One RngStream per mask site (site 0 is the head, then entry / pre-residual per hourglass).
class MaskStreams {
public:
    MaskStreams() = default;
    MaskStreams(const RngStream& root, int site_count);

    RngStream& site(int index) { return sites_.at(static_cast<std::size_t>(index)); }
    int size() const noexcept { return static_cast<int>(sites_.size()); }

private:
    std::vector<RngStream> sites_;
};

struct GraphOutput {
    ad::Var sr;
    std::vector<ad::Var> intermediates;           ///< one per hourglass, last == sr
    std::vector<Tensor> hourglass_entry_features;  ///< feature entering each hourglass, pre-mask
    std::vector<BinaryMask> masks;                 ///< masks actually applied, in site order
};

/// Records the forward pass on x's tape. `params` holds one Var per layout entry.
/// Mask sites are identity unless gate && config.masks_enabled.
GraphOutput forward_graph(ad::Var x, std::span<const ad::Var> params, const BackboneConfig& config,
                          bool gate, MaskStreams& streams);

struct SrOutput {
    Tensor sr;
    std::vector<Tensor> intermediates;
    std::vector<Tensor> hourglass_entry_features;
};

/// Value-only forward pass.
SrOutput forward(const Tensor& x, const BackboneParams& params, const BackboneConfig& config, bool gate,
                 MaskStreams& streams);

/// 1 + channel-averaged forward-difference gradient magnitude of hr, repeated per channel.
Tensor gradient_weights(const Tensor& hr);

/// sum_k mean|intermediate_k - hr| + mean(w * |sr - hr|), w = gradient_weights(hr).
double sr_loss(const Tensor& sr, std::span<const Tensor> intermediates, const Tensor& hr);
ad::Var sr_loss(const GraphOutput& out, const Tensor& hr);

struct DefendedOutput {
    Tensor sr;
    Verdict verdict;
    bool gate = false;
};

/// Classifier-gated forward: masks are active only when the input is judged adversarial.
DefendedOutput defended_pipeline(const Tensor& x, const BackboneParams& params, const BackboneConfig& config,
                                 const ClassifierParams& classifier, MaskStreams& streams);

/// Binary format: 16-byte header ("FSBB", u16 version, u16 scale, u16 num_hourglass,
/// u16 base_channels, u16 hg_depth, u16 reserved), u64 parameter count, then every tensor
/// in layout order as little-endian f64.
void save_backbone(const BackboneParams& params, const BackboneConfig& config, const std::filesystem::path& path);
/// Reads params; the architecture fields of `config` are overwritten from the header.
BackboneParams load_backbone(const std::filesystem::path& path, BackboneConfig& config);

}  // namespace freqshield
