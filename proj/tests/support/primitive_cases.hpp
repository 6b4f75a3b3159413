#pragma once

// One gradient-check case per tape primitive: a graph builder plus a generator of fresh
// random inputs.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "freqshield/autodiff.hpp"
#include "freqshield/freq_mask.hpp"
#include "gradcheck.hpp"

namespace oracle {

struct PrimitiveCase {
    std::string name;
    GraphBuilder build;
    std::function<std::vector<Tensor>()> inputs;
};

/// Uniform in [-1, 1] with |v| >= margin, keeping probes away from kinks at zero.
inline Tensor away_from_zero(int h, int w, int c, freqshield::RngStream& s, double margin = 1e-3) {
    Tensor t(h, w, c);
    for (double& v : t.values()) {
        do v = s.uniform(-1.0, 1.0);
        while (std::abs(v) < margin);
    }
    return t;
}

/// `s` must outlive the returned cases; input generators draw from it.
inline std::vector<PrimitiveCase> primitive_cases(freqshield::RngStream& s) {
    using namespace freqshield;
    using VarSpan = std::span<const ad::Var>;
    auto rt = [&s](int h, int w, int c) { return random_tensor(h, w, c, s); };
    auto near_pair = [&s, rt](int h, int w, int c) {
        const Tensor a = rt(h, w, c);
        return std::vector{a, add(a, away_from_zero(h, w, c, s))};
    };

    std::vector<PrimitiveCase> cases;
    cases.push_back({"add", [](ad::Tape&, VarSpan v) { return ad::add(v[0], v[1]); },
                     [rt] { return std::vector{rt(3, 4, 2), rt(3, 4, 2)}; }});
    cases.push_back({"multiply", [](ad::Tape&, VarSpan v) { return ad::multiply(v[0], v[1]); },
                     [rt] { return std::vector{rt(3, 4, 2), rt(3, 4, 2)}; }});
    cases.push_back({"scale", [](ad::Tape&, VarSpan v) { return ad::scale(v[0], -1.3); },
                     [rt] { return std::vector{rt(5, 2, 3)}; }});
    cases.push_back({"sum", [](ad::Tape&, VarSpan v) { return ad::sum(v[0]); },
                     [rt] { return std::vector{rt(4, 3, 2)}; }});
    cases.push_back({"reshape", [](ad::Tape&, VarSpan v) { return ad::reshape(v[0], Shape{24, 1, 1}); },
                     [rt] { return std::vector{rt(4, 3, 2)}; }});
    cases.push_back({"conv2d 3x3", [](ad::Tape&, VarSpan v) { return ad::conv2d(v[0], v[1], v[2]); },
                     [rt] { return std::vector{rt(5, 5, 2), rt(9, 2, 3), rt(1, 1, 3)}; }});
    cases.push_back({"conv2d 1x1", [](ad::Tape&, VarSpan v) { return ad::conv2d(v[0], v[1], v[2]); },
                     [rt] { return std::vector{rt(4, 6, 3), rt(1, 3, 2), rt(1, 1, 2)}; }});
    cases.push_back({"downsample2x", [](ad::Tape&, VarSpan v) { return ad::downsample2x(v[0]); },
                     [rt] { return std::vector{rt(6, 4, 2)}; }});
    cases.push_back({"upsample2x", [](ad::Tape&, VarSpan v) { return ad::upsample2x(v[0]); },
                     [rt] { return std::vector{rt(3, 5, 2)}; }});
    cases.push_back({"leaky_relu", [](ad::Tape&, VarSpan v) { return ad::leaky_relu(v[0], 0.1); },
                     [&s] { return std::vector{away_from_zero(4, 4, 2, s)}; }});
    cases.push_back({"matmul", [](ad::Tape&, VarSpan v) { return ad::matmul(v[0], v[1]); },
                     [rt] { return std::vector{rt(5, 7, 1), rt(7, 1, 1)}; }});
    cases.push_back({"l1_loss", [](ad::Tape&, VarSpan v) { return ad::l1_loss(v[0], v[1]); },
                     [near_pair] { return near_pair(4, 5, 3); }});
    cases.push_back({"weighted_l1_loss",
                     [w = random_tensor(4, 5, 3, s, 1.0, 3.0)](ad::Tape&, VarSpan v) {
                         return ad::weighted_l1_loss(v[0], v[1], w);
                     },
                     [near_pair] { return near_pair(4, 5, 3); }});
    cases.push_back({"masked_linear",
                     [m = sample_mask(7, 6, MaskPolicy{}, s)](ad::Tape&, VarSpan v) { return ad::masked_linear(v[0], m); },
                     [rt] { return std::vector{rt(7, 6, 3)}; }});
    cases.push_back({"softmax_cross_entropy", [](ad::Tape&, VarSpan v) { return ad::softmax_cross_entropy(v[0], 1); },
                     [rt] { return std::vector{rt(4, 1, 1)}; }});
    return cases;
}

}  // namespace oracle
