#pragma once

#include <functional>
#include <span>
#include <vector>

#include "freqshield/freq_mask.hpp"
#include "freqshield/tensor.hpp"

namespace freqshield::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as its Tape lives and has not
/// been cleared.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    Tape* tape() const noexcept { return tape_; }
    int id() const noexcept { return id_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

struct BackwardContext {
    const Tensor& upstream;
    const Tensor& output;
    std::span<const Tensor* const> inputs;
    /// nullptr for inputs that do not need a gradient.
    std::span<Tensor* const> grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Append-only record of primitive operations. Nodes are stored in creation order, which is
/// a topological order, so the reverse pass is a single backwards sweep.
class Tape {
public:
    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    /// Registers the result of a primitive. `backward` may be empty for non-differentiable
    /// results; it is only invoked when some input requires a gradient.
    Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse pass from a scalar (1x1x1) loss. Throws ShapeError for non-scalar losses.
    void backward(Var loss);
    /// Gradient of the last backward() loss w.r.t. v; zeros when v did not contribute.
    Tensor gradient(Var v) const;
    /// Nodes whose backward rule ran during the last backward().
    std::size_t last_backward_visits() const noexcept { return visits_; }

    void clear();

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::vector<int> inputs;
        BackwardFn backward;
    };

    void check(Var v) const;

    std::vector<Node> nodes_;
    std::size_t visits_ = 0;
};

/// Runs backward(loss) and returns d loss / d v for every v in wrt.
std::vector<Tensor> grad(Tape& tape, Var loss, std::span<const Var> wrt);

// Primitives. All shapes are explicit; the only broadcasting is scalar * tensor in scale().
Var add(Var a, Var b);
Var multiply(Var a, Var b);
Var scale(Var a, double factor);
/// Sum of all elements as a 1x1x1 scalar.
Var sum(Var a);
Var reshape(Var a, Shape shape);
/// Stride 1, zero padding K/2. kernel: (K*K) x Cin x Cout, tap-major (ky * K + kx);
/// bias: 1 x 1 x Cout.
Var conv2d(Var x, Var kernel, Var bias);
/// 2x2 average pooling; height and width must be even.
Var downsample2x(Var x);
/// Nearest-neighbour 2x enlargement.
Var upsample2x(Var x);
Var leaky_relu(Var x, double slope);
/// weights: out x in x 1, x: in x 1 x 1 -> out x 1 x 1.
Var matmul(Var weights, Var x);
/// mean |a - b|; subgradient 0 where a == b.
Var l1_loss(Var a, Var b);
/// mean(w * |a - b|) with constant non-negative weights w of the same shape.
Var weighted_l1_loss(Var a, Var b, const Tensor& weights);
/// idct2(mask * dct2(x)). Self-adjoint, so the backward rule reuses the same mask.
Var masked_linear(Var x, const BinaryMask& mask);
/// -log softmax(logits)[label] for logits of shape n x 1 x 1.
Var softmax_cross_entropy(Var logits, int label);

}  // namespace freqshield::ad
