#include "freqshield/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "freqshield/errors.hpp"

namespace freqshield::ad {

const Tensor& Var::value() const {
    if (tape_ == nullptr) throw InvalidArgument("Var is not attached to a tape");
    return tape_->value(*this);
}

void Tape::check(Var v) const {
    if (v.tape() != this || v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size()) {
        throw InvalidArgument("Var does not belong to this tape");
    }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    for (const Var& in : inputs) {
        check(in);
        node.inputs.push_back(in.id());
        node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    node.requires_grad = node.requires_grad && static_cast<bool>(node.backward);
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

const Tensor& Tape::value(Var v) const {
    check(v);
    return nodes_[v.id()].value;
}

bool Tape::requires_grad(Var v) const {
    check(v);
    return nodes_[v.id()].requires_grad;
}

void Tape::backward(Var loss) {
    check(loss);
    if (nodes_[loss.id()].value.size() != 1) {
        throw ShapeError("backward: loss must be a scalar, got " +
                         to_string(nodes_[loss.id()].value.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    visits_ = 0;
    Node& root = nodes_[loss.id()];
    if (!root.requires_grad) return;
    root.grad = Tensor(root.value.shape(), 1.0);

    std::vector<const Tensor*> inputs;
    std::vector<Tensor*> grads;
    for (int id = loss.id(); id >= 0; --id) {
        Node& node = nodes_[id];
        if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
        inputs.clear();
        grads.clear();
        for (int in : node.inputs) {
            Node& src = nodes_[in];
            inputs.push_back(&src.value);
            if (src.requires_grad) {
                if (src.grad.empty()) src.grad = Tensor(src.value.shape(), 0.0);
                grads.push_back(&src.grad);
            } else {
                grads.push_back(nullptr);
            }
        }
        node.backward(BackwardContext{node.grad, node.value, inputs, grads});
        ++visits_;
    }
}

Tensor Tape::gradient(Var v) const {
    check(v);
    const Node& node = nodes_[v.id()];
    return node.grad.empty() ? Tensor(node.value.shape(), 0.0) : node.grad;
}

void Tape::clear() {
    nodes_.clear();
    visits_ = 0;
}

std::vector<Tensor> grad(Tape& tape, Var loss, std::span<const Var> wrt) {
    tape.backward(loss);
    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (const Var& v : wrt) out.push_back(tape.gradient(v));
    return out;
}

namespace {

Tape& tape_of(Var a, Var b) {
    if (a.tape() == nullptr || a.tape() != b.tape()) throw InvalidArgument("Vars from different tapes");
    return *a.tape();
}

Tape& tape_of(Var a) {
    if (a.tape() == nullptr) throw InvalidArgument("Var is not attached to a tape");
    return *a.tape();
}

}  // namespace

Var add(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    return tape.record(freqshield::add(a.value(), b.value()), {a, b}, [](const BackwardContext& ctx) {
        for (Tensor* g : ctx.grads)
            if (g) add_in_place(*g, ctx.upstream);
    });
}

Var multiply(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    return tape.record(freqshield::multiply(a.value(), b.value()), {a, b},
                       [](const BackwardContext& ctx) {
                           const Tensor& x = *ctx.inputs[0];
                           const Tensor& y = *ctx.inputs[1];
                           if (Tensor* gx = ctx.grads[0])
                               for (std::size_t i = 0; i < x.size(); ++i) (*gx)[i] += ctx.upstream[i] * y[i];
                           if (Tensor* gy = ctx.grads[1])
                               for (std::size_t i = 0; i < y.size(); ++i) (*gy)[i] += ctx.upstream[i] * x[i];
                       });
}

Var scale(Var a, double factor) {
    Tape& tape = tape_of(a);
    return tape.record(freqshield::scale(a.value(), factor), {a}, [factor](const BackwardContext& ctx) {
        Tensor& g = *ctx.grads[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * ctx.upstream[i];
    });
}

Var sum(Var a) {
    Tape& tape = tape_of(a);
    return tape.record(Tensor::scalar(freqshield::sum(a.value())), {a}, [](const BackwardContext& ctx) {
        Tensor& g = *ctx.grads[0];
        const double up = ctx.upstream[0];
        for (double& v : g.values()) v += up;
    });
}

Var reshape(Var a, Shape shape) {
    Tape& tape = tape_of(a);
    return tape.record(a.value().reshaped(shape), {a}, [](const BackwardContext& ctx) {
        Tensor& g = *ctx.grads[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.upstream[i];
    });
}

Var conv2d(Var x, Var kernel, Var bias) {
    Tape& tape = tape_of(x, kernel);
    tape_of(x, bias);
    const Tensor& in = x.value();
    const Tensor& k = kernel.value();
    const Tensor& b = bias.value();
    const int taps = k.height();
    const int ksize = static_cast<int>(std::lround(std::sqrt(static_cast<double>(taps))));
    if (ksize * ksize != taps || ksize % 2 == 0) {
        throw ShapeError("conv2d: kernel tap count must be an odd square, got " + to_string(k.shape()));
    }
    const int cin = in.channels();
    const int cout = k.channels();
    if (k.width() != cin) {
        throw ShapeError("conv2d: kernel expects " + std::to_string(k.width()) + " input channels, got " +
                         std::to_string(cin));
    }
    if (b.shape() != Shape{1, 1, cout}) throw ShapeError("conv2d: bias must be 1x1x" + std::to_string(cout));

    const int h = in.height();
    const int w = in.width();
    const int pad = ksize / 2;
    Tensor out(h, w, cout);
    for (int y = 0; y < h; ++y) {
        for (int xo = 0; xo < w; ++xo) {
            double* o = &out[out.index(y, xo, 0)];
            for (int co = 0; co < cout; ++co) o[co] = b[co];
            for (int ky = 0; ky < ksize; ++ky) {
                const int iy = y + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < ksize; ++kx) {
                    const int ix = xo + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const double* px = &in[in.index(iy, ix, 0)];
                    const double* kt = &k[static_cast<std::size_t>(ky * ksize + kx) * cin * cout];
                    for (int ci = 0; ci < cin; ++ci) {
                        const double v = px[ci];
                        const double* kr = kt + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) o[co] += v * kr[co];
                    }
                }
            }
        }
    }

    return tape.record(std::move(out), {x, kernel, bias}, [ksize, pad](const BackwardContext& ctx) {
        const Tensor& in = *ctx.inputs[0];
        const Tensor& k = *ctx.inputs[1];
        const Tensor& g = ctx.upstream;
        Tensor* gin = ctx.grads[0];
        Tensor* gk = ctx.grads[1];
        Tensor* gb = ctx.grads[2];
        const int h = in.height();
        const int w = in.width();
        const int cin = in.channels();
        const int cout = k.channels();
        const double* gdata = g.values().data();
        const double* kdata = k.values().data();
        const double* idata = in.values().data();
        double* gin_data = gin ? gin->values().data() : nullptr;
        double* gk_data = gk ? gk->values().data() : nullptr;
        double* gb_data = gb ? gb->values().data() : nullptr;
        for (int y = 0; y < h; ++y) {
            for (int xo = 0; xo < w; ++xo) {
                const double* go = gdata + g.index(y, xo, 0);
                if (gb_data)
                    for (int co = 0; co < cout; ++co) gb_data[co] += go[co];
                for (int ky = 0; ky < ksize; ++ky) {
                    const int iy = y + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < ksize; ++kx) {
                        const int ix = xo + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        const std::size_t tap = static_cast<std::size_t>(ky * ksize + kx) * cin * cout;
                        const std::size_t pix = in.index(iy, ix, 0);
                        for (int ci = 0; ci < cin; ++ci) {
                            const std::size_t row = tap + static_cast<std::size_t>(ci) * cout;
                            if (gin_data) {
                                const double* kr = kdata + row;
                                double acc = 0.0;
                                for (int co = 0; co < cout; ++co) acc += go[co] * kr[co];
                                gin_data[pix + ci] += acc;
                            }
                            if (gk_data) {
                                const double v = idata[pix + ci];
                                double* gkr = gk_data + row;
                                for (int co = 0; co < cout; ++co) gkr[co] += v * go[co];
                            }
                        }
                    }
                }
            }
        }
    });
}

Var downsample2x(Var x) {
    Tape& tape = tape_of(x);
    const Tensor& in = x.value();
    if (in.height() % 2 != 0 || in.width() % 2 != 0) {
        throw ShapeError("downsample2x: odd spatial size " + to_string(in.shape()));
    }
    return tape.record(area_downsample(in, 2), {x}, [](const BackwardContext& ctx) {
        Tensor& g = *ctx.grads[0];
        const Tensor& up = ctx.upstream;
        for (int y = 0; y < g.height(); ++y)
            for (int xx = 0; xx < g.width(); ++xx)
                for (int c = 0; c < g.channels(); ++c) g(y, xx, c) += 0.25 * up(y / 2, xx / 2, c);
    });
}

Var upsample2x(Var x) {
    Tape& tape = tape_of(x);
    return tape.record(nearest_upsample(x.value(), 2), {x}, [](const BackwardContext& ctx) {
        Tensor& g = *ctx.grads[0];
        const Tensor& up = ctx.upstream;
        for (int y = 0; y < up.height(); ++y)
            for (int xx = 0; xx < up.width(); ++xx)
                for (int c = 0; c < up.channels(); ++c) g(y / 2, xx / 2, c) += up(y, xx, c);
    });
}

Var leaky_relu(Var x, double slope) {
    Tape& tape = tape_of(x);
    const Tensor& in = x.value();
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : slope * in[i];
    return tape.record(std::move(out), {x}, [slope](const BackwardContext& ctx) {
        const Tensor& in = *ctx.inputs[0];
        Tensor& g = *ctx.grads[0];
        for (std::size_t i = 0; i < in.size(); ++i) g[i] += ctx.upstream[i] * (in[i] > 0.0 ? 1.0 : slope);
    });
}

Var matmul(Var weights, Var x) {
    Tape& tape = tape_of(weights, x);
    const Tensor& wt = weights.value();
    const Tensor& in = x.value();
    if (wt.channels() != 1 || in.width() != 1 || in.channels() != 1 || wt.width() != in.height()) {
        throw ShapeError("matmul: incompatible shapes " + to_string(wt.shape()) + " and " +
                         to_string(in.shape()));
    }
    const int rows = wt.height();
    const int cols = wt.width();
    Tensor out(rows, 1, 1);
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += wt(r, c, 0) * in[c];
        out[r] = acc;
    }
    return tape.record(std::move(out), {weights, x}, [rows, cols](const BackwardContext& ctx) {
        const Tensor& wt = *ctx.inputs[0];
        const Tensor& in = *ctx.inputs[1];
        const Tensor& up = ctx.upstream;
        if (Tensor* gw = ctx.grads[0])
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) (*gw)(r, c, 0) += up[r] * in[c];
        if (Tensor* gx = ctx.grads[1])
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) (*gx)[c] += up[r] * wt(r, c, 0);
    });
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Var l1_impl(Var a, Var b, const Tensor* weights) {
    Tape& tape = tape_of(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    require_same_shape(x, y, "l1_loss");
    if (weights) require_same_shape(x, *weights, "weighted_l1_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (weights ? (*weights)[i] : 1.0) * std::abs(x[i] - y[i]);
    const double n = static_cast<double>(x.size());
    Tensor w = weights ? *weights : Tensor();
    return tape.record(Tensor::scalar(acc / n), {a, b}, [w = std::move(w), n](const BackwardContext& ctx) {
        const Tensor& x = *ctx.inputs[0];
        const Tensor& y = *ctx.inputs[1];
        const double up = ctx.upstream[0] / n;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = up * (w.empty() ? 1.0 : w[i]) * sign(x[i] - y[i]);
            if (ctx.grads[0]) (*ctx.grads[0])[i] += d;
            if (ctx.grads[1]) (*ctx.grads[1])[i] -= d;
        }
    });
}

}  // namespace

Var l1_loss(Var a, Var b) { return l1_impl(a, b, nullptr); }

Var weighted_l1_loss(Var a, Var b, const Tensor& weights) { return l1_impl(a, b, &weights); }

Var masked_linear(Var x, const BinaryMask& mask) {
    Tape& tape = tape_of(x);
    return tape.record(apply_mask(x.value(), mask), {x}, [mask](const BackwardContext& ctx) {
        add_in_place(*ctx.grads[0], apply_mask(ctx.upstream, mask));
    });
}

Var softmax_cross_entropy(Var logits, int label) {
    Tape& tape = tape_of(logits);
    const Tensor& z = logits.value();
    if (z.width() != 1 || z.channels() != 1) throw ShapeError("softmax_cross_entropy: logits must be n x 1 x 1");
    if (label < 0 || label >= z.height()) throw InvalidArgument("softmax_cross_entropy: label out of range");
    const double zmax = *std::max_element(z.values().begin(), z.values().end());
    double denom = 0.0;
    for (double v : z.values()) denom += std::exp(v - zmax);
    const double loss = std::log(denom) - (z[label] - zmax);
    return tape.record(Tensor::scalar(loss), {logits}, [label, zmax, denom](const BackwardContext& ctx) {
        const Tensor& z = *ctx.inputs[0];
        Tensor& g = *ctx.grads[0];
        const double up = ctx.upstream[0];
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double p = std::exp(z[i] - zmax) / denom;
            g[i] += up * (p - (static_cast<int>(i) == label ? 1.0 : 0.0));
        }
    });
}

}  // namespace freqshield::ad
