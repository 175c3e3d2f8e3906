#pragma once

#include <string>
#include <vector>

#include "image_ops.hpp"
#include "rng.hpp"

namespace mdsam {

// Optimizer groups. "frozen" is excluded from updates entirely, "pretrained"
// and "fresh" train with their own learning rates.
enum class ParamGroup { Frozen, Pretrained, Fresh };

inline const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::Frozen: return "frozen";
    case ParamGroup::Pretrained: return "pretrained";
    default: return "new";
  }
}

struct Param {
  std::string name;
  Var var;
  ParamGroup group = ParamGroup::Fresh;

  Param() = default;
  Param(std::string n, Tensor init) : name(std::move(n)), var(leaf(std::move(init), true)) {}

  Tensor& value() { return var->value; }
  const Tensor& value() const { return var->value; }
  long size() const { return var->value.size(); }

  void set_group(ParamGroup g) {
    group = g;
    var->requires_grad = (g != ParamGroup::Frozen);
  }
};

// Non-trainable state that still belongs in checkpoints (BN running stats).
struct BufferState {
  std::string name;
  Tensor value;
};

struct ParamCollector {
  std::vector<Param*> params;
  std::vector<BufferState*> buffers;

  void add(Param& p) { params.push_back(&p); }
  void add(BufferState& b) { buffers.push_back(&b); }
};

namespace init {

// Fan-in scaled uniform, the default for fresh weights.
inline Tensor uniform_fan_in(std::vector<int> shape, long fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(fan_in));
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

inline Tensor normal(std::vector<int> shape, Scalar stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (long i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

}  // namespace init

// ---------------------------------------------------------------------------
// Layers. Each owns named parameters and exposes forward() built from the
// autograd ops; collect() feeds the model-level registry.
// ---------------------------------------------------------------------------

struct Dense {
  Param w, b;

  Dense() = default;
  Dense(const std::string& name, int in, int out, Rng& rng, bool zero_init = false)
      : w(name + ".weight",
          zero_init ? Tensor::zeros({in, out}) : init::uniform_fan_in({in, out}, in, rng)),
        b(name + ".bias",
          zero_init ? Tensor::zeros({out}) : init::uniform_fan_in({out}, in, rng)) {}

  Var forward(const Var& x) const { return linear(x, w.var, b.var); }
  void collect(ParamCollector& c) {
    c.add(w);
    c.add(b);
  }
};

struct Conv1x1 {
  Param w, b;

  Conv1x1() = default;
  Conv1x1(const std::string& name, int cin, int cout, Rng& rng)
      : w(name + ".weight", init::uniform_fan_in({cout, cin}, cin, rng)),
        b(name + ".bias", init::uniform_fan_in({cout}, cin, rng)) {}

  Var forward(const Var& x) const { return conv1x1(x, w.var, b.var); }
  void collect(ParamCollector& c) {
    c.add(w);
    c.add(b);
  }
};

struct Conv3x3 {
  Param w, b;

  Conv3x3() = default;
  Conv3x3(const std::string& name, int cin, int cout, Rng& rng)
      : w(name + ".weight", init::uniform_fan_in({cout, cin, 3, 3}, 9L * cin, rng)),
        b(name + ".bias", init::uniform_fan_in({cout}, 9L * cin, rng)) {}

  Var forward(const Var& x) const { return conv3x3_same(x, w.var, b.var); }
  void collect(ParamCollector& c) {
    c.add(w);
    c.add(b);
  }
};

struct DepthwiseConv3x3 {
  Param w, b;

  DepthwiseConv3x3() = default;
  DepthwiseConv3x3(const std::string& name, int channels, Rng& rng)
      : w(name + ".weight", init::uniform_fan_in({channels, 3, 3}, 9, rng)),
        b(name + ".bias", init::uniform_fan_in({channels}, 9, rng)) {}

  Var forward(const Var& x) const { return depthwise3x3(x, w.var, b.var); }
  void collect(ParamCollector& c) {
    c.add(w);
    c.add(b);
  }
};

struct PatchConv {
  Param w, b;
  int kernel = 0, stride = 0;

  PatchConv() = default;
  PatchConv(const std::string& name, int cin, int cout, int k, Rng& rng)
      : w(name + ".weight", init::uniform_fan_in({cout, cin, k, k}, static_cast<long>(cin) * k * k, rng)),
        b(name + ".bias", init::uniform_fan_in({cout}, static_cast<long>(cin) * k * k, rng)),
        kernel(k),
        stride(k) {}

  Var forward(const Var& x) const { return conv2d_strided(x, w.var, b.var, kernel, stride); }
  void collect(ParamCollector& c) {
    c.add(w);
    c.add(b);
  }
};

struct Deconv2x2 {
  Param w, b;

  Deconv2x2() = default;
  Deconv2x2(const std::string& name, int cin, int cout, Rng& rng)
      : w(name + ".weight", init::uniform_fan_in({cin, cout, 2, 2}, 4L * cin, rng)),
        b(name + ".bias", init::uniform_fan_in({cout}, 4L * cin, rng)) {}

  Var forward(const Var& x) const { return conv_transpose2x2(x, w.var, b.var); }
  void collect(ParamCollector& c) {
    c.add(w);
    c.add(b);
  }
};

struct Norm {
  Param gamma, beta;

  Norm() = default;
  Norm(const std::string& name, int dim)
      : gamma(name + ".weight", Tensor::full({dim}, 1.0)), beta(name + ".bias", Tensor::zeros({dim})) {}

  Var forward(const Var& x) const { return layer_norm(x, gamma.var, beta.var); }

  // LayerNorm over the channel dim of a (C,H,W) grid.
  Var forward_grid(const Var& x) const {
    const int h = x->value.dim(1), w = x->value.dim(2);
    return tokens_to_grid(forward(grid_to_tokens(x)), h, w);
  }

  void collect(ParamCollector& c) {
    c.add(gamma);
    c.add(beta);
  }
};

struct BatchNorm2d {
  Param gamma, beta;
  BufferState running_mean, running_var;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels)
      : gamma(name + ".weight", Tensor::full({channels}, 1.0)),
        beta(name + ".bias", Tensor::zeros({channels})),
        running_mean{name + ".running_mean", Tensor::zeros({channels})},
        running_var{name + ".running_var", Tensor::full({channels}, 1.0)} {}

  Var forward(const Var& x, bool training) {
    return batch_norm2d(x, gamma.var, beta.var, running_mean.value, running_var.value, training);
  }

  void collect(ParamCollector& c) {
    c.add(gamma);
    c.add(beta);
    c.add(running_mean);
    c.add(running_var);
  }
};

// Learned absolute positional embedding stored at a base grid and
// bilinearly resized to the runtime grid.
struct PosEmbed2d {
  Param embed;

  PosEmbed2d() = default;
  PosEmbed2d(const std::string& name, int channels, int base_grid, Rng& rng)
      : embed(name + ".embed", init::normal({channels, base_grid, base_grid}, 0.02, rng)) {}

  Var forward(int h, int w) const { return bilinear_resize(embed.var, h, w); }
  void collect(ParamCollector& c) { c.add(embed); }
};

// conv3x3 + BN + ReLU, the decoder-side upsampling block.
struct ConvBnRelu3x3 {
  Conv3x3 conv;
  BatchNorm2d bn;

  ConvBnRelu3x3() = default;
  ConvBnRelu3x3(const std::string& name, int cin, int cout, Rng& rng)
      : conv(name + ".conv", cin, cout, rng), bn(name + ".bn", cout) {}

  Var forward(const Var& x, bool training) { return relu(bn.forward(conv.forward(x), training)); }
  void collect(ParamCollector& c) {
    conv.collect(c);
    bn.collect(c);
  }
};

// 1x1 conv + BN + sigmoid.
struct ConvBnSigmoid1x1 {
  Conv1x1 conv;
  BatchNorm2d bn;

  ConvBnSigmoid1x1() = default;
  ConvBnSigmoid1x1(const std::string& name, int cin, int cout, Rng& rng)
      : conv(name + ".conv", cin, cout, rng), bn(name + ".bn", cout) {}

  Var forward(const Var& x, bool training) { return sigmoid(bn.forward(conv.forward(x), training)); }
  void collect(ParamCollector& c) {
    conv.collect(c);
    bn.collect(c);
  }
};

// 1x1 conv + GELU.
struct ConvGelu1x1 {
  Conv1x1 conv;

  ConvGelu1x1() = default;
  ConvGelu1x1(const std::string& name, int cin, int cout, Rng& rng) : conv(name, cin, cout, rng) {}

  Var forward(const Var& x) const { return gelu(conv.forward(x)); }
  void collect(ParamCollector& c) { conv.collect(c); }
};

}  // namespace mdsam
