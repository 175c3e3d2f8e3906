#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/layers.hpp"

namespace mdsam {

// ---------------------------------------------------------------------------
// Lightweight Multi-Scale Adapter. Bottleneck residual module inserted before
// each transformer layer: a D -> D/r down projection, four pooled branches at
// configurable output scales (each 1x1-projected to D/(4r) with a depth-wise
// 3x3 on top, upsampled back), a depth-wise pass over the unpooled map, a 1x1
// fusion back to D/r, and a zero-initialized D/r -> D up projection feeding
// the residual.
// ---------------------------------------------------------------------------

struct AdapterConfig {
  int reduction = 3;
  std::vector<int> pool_scales = {3, 6, 9, 12};
  bool zero_init_up = true;
  bool enabled = true;
  bool local_branch = true;  // depth-wise pass over the unpooled map

  int down_channels(int embed_dim) const { return embed_dim / reduction; }
  int branch_channels(int embed_dim) const { return embed_dim / (4 * reduction); }
  int fuse_in_channels(int embed_dim) const {
    return local_branch ? 2 * embed_dim / reduction : embed_dim / reduction;
  }

  void validate(int embed_dim) const {
    if (reduction <= 0 || embed_dim % reduction != 0 || embed_dim % (4 * reduction) != 0) {
      throw std::invalid_argument(
          "AdapterConfig: reduction must divide embed_dim and 4*reduction must divide embed_dim");
    }
    if (pool_scales.size() != 4) {
      throw std::invalid_argument("AdapterConfig: exactly 4 pool scales required");
    }
    for (int s : pool_scales) {
      if (s <= 0) throw std::invalid_argument("AdapterConfig: pool scales must be positive");
    }
  }
};

struct Lmsa {
  struct Branch {
    ConvGelu1x1 proj;       // D/r -> D/(4r)
    DepthwiseConv3x3 dw;    // on D/(4r)
  };

  Dense down;               // D -> D/r
  std::vector<Branch> branches;
  DepthwiseConv3x3 local_dw;  // on the unpooled D/r map (when local_branch)
  ConvGelu1x1 fuse;         // 2D/r (or D/r) -> D/r
  Dense up;                 // D/r -> D, zero-initialized by default
  std::vector<int> scales;
  bool use_local = true;

  Lmsa() = default;
  Lmsa(const std::string& name, int embed_dim, const AdapterConfig& cfg, Rng& rng)
      : down(name + ".down", embed_dim, cfg.down_channels(embed_dim), rng),
        fuse(name + ".fuse", cfg.fuse_in_channels(embed_dim), cfg.down_channels(embed_dim), rng),
        up(name + ".up", cfg.down_channels(embed_dim), embed_dim, rng, cfg.zero_init_up),
        scales(cfg.pool_scales),
        use_local(cfg.local_branch) {
    const int mid = cfg.down_channels(embed_dim);
    const int branch_c = cfg.branch_channels(embed_dim);
    for (int j = 0; j < 4; ++j) {
      const std::string bn = name + ".branches." + std::to_string(j);
      branches.push_back(Branch{ConvGelu1x1(bn + ".proj", mid, branch_c, rng),
                                DepthwiseConv3x3(bn + ".dw", branch_c, rng)});
    }
    if (use_local) local_dw = DepthwiseConv3x3(name + ".local_dw", mid, rng);
  }

  // x is a (D,H,W) grid; returns a grid of the same shape.
  Var forward(const Var& x) const {
    const int h = x->value.dim(1), w = x->value.dim(2);
    for (int s : scales) {
      if (s > h || s > w) {
        throw std::invalid_argument("Lmsa: pool scale " + std::to_string(s) +
                                    " exceeds grid side " + std::to_string(std::min(h, w)));
      }
    }
    Var tokens = grid_to_tokens(x);
    Var squeezed = tokens_to_grid(relu(down.forward(tokens)), h, w);
    std::vector<Var> parts;
    parts.reserve(5);
    for (size_t j = 0; j < branches.size(); ++j) {
      Var p = adaptive_avg_pool(squeezed, scales[j], scales[j]);
      p = branches[j].proj.forward(p);
      p = gelu(branches[j].dw.forward(p));
      parts.push_back(bilinear_resize(p, h, w));
    }
    if (use_local) parts.push_back(gelu(local_dw.forward(squeezed)));
    Var fused = fuse.forward(concat_channels(parts));
    Var up_tokens = up.forward(grid_to_tokens(fused));
    return add(tokens_to_grid(up_tokens, h, w), x);
  }

  void collect(ParamCollector& c) {
    down.collect(c);
    for (auto& b : branches) {
      b.proj.collect(c);
      b.dw.collect(c);
    }
    if (use_local) local_dw.collect(c);
    fuse.collect(c);
    up.collect(c);
  }
};

// ---------------------------------------------------------------------------
// Transformer encoder
// ---------------------------------------------------------------------------

struct MultiHeadAttention {
  Dense qkv;   // D -> 3D
  Dense proj;  // D -> D
  int heads = 0, head_dim = 0, dim = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int embed_dim, int num_heads, Rng& rng)
      : qkv(name + ".qkv", embed_dim, 3 * embed_dim, rng),
        proj(name + ".proj", embed_dim, embed_dim, rng),
        heads(num_heads),
        head_dim(embed_dim / num_heads),
        dim(embed_dim) {
    if (embed_dim % num_heads != 0) {
      throw std::invalid_argument("MultiHeadAttention: heads must divide embed_dim");
    }
  }

  Var forward(const Var& tokens) const {
    Var fused = qkv.forward(tokens);
    const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(head_dim));
    std::vector<Var> head_outs;
    head_outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Var q = slice_cols(fused, h * head_dim, head_dim);
      Var k = slice_cols(fused, dim + h * head_dim, head_dim);
      Var v = slice_cols(fused, 2 * dim + h * head_dim, head_dim);
      Var attn = softmax_rows(mul_scalar(matmul_nt(q, k), scale));
      head_outs.push_back(matmul(attn, v));
    }
    return proj.forward(concat_cols(head_outs));
  }

  void collect(ParamCollector& c) {
    qkv.collect(c);
    proj.collect(c);
  }
};

struct Mlp {
  Dense fc1, fc2;

  Mlp() = default;
  Mlp(const std::string& name, int dim, int hidden, Rng& rng)
      : fc1(name + ".fc1", dim, hidden, rng), fc2(name + ".fc2", hidden, dim, rng) {}

  Var forward(const Var& tokens) const { return fc2.forward(gelu(fc1.forward(tokens))); }
  void collect(ParamCollector& c) {
    fc1.collect(c);
    fc2.collect(c);
  }
};

// Pre-norm ViT block with the adapter applied ahead of the first
// normalization; the adapter output replaces the block input in both the
// attention branch and its residual.
struct TransformerLayer {
  std::optional<Lmsa> lmsa;
  Norm ln1, ln2;
  MultiHeadAttention attn;
  Mlp mlp;

  TransformerLayer() = default;
  TransformerLayer(const std::string& name, int embed_dim, int heads, int mlp_ratio,
                   const AdapterConfig& adapter, Rng& base_rng, Rng& adapter_rng)
      : ln1(name + ".ln1", embed_dim),
        ln2(name + ".ln2", embed_dim),
        attn(name + ".attn", embed_dim, heads, base_rng),
        mlp(name + ".mlp", embed_dim, embed_dim * mlp_ratio, base_rng) {
    if (adapter.enabled) lmsa.emplace(name + ".lmsa", embed_dim, adapter, adapter_rng);
  }

  // x is a (D,H,W) grid.
  Var forward(const Var& x) const {
    const int h = x->value.dim(1), w = x->value.dim(2);
    Var xin = lmsa ? lmsa->forward(x) : x;
    Var tokens = grid_to_tokens(xin);
    Var mid = add(attn.forward(ln1.forward(tokens)), tokens);
    Var out = add(mlp.forward(ln2.forward(mid)), mid);
    return tokens_to_grid(out, h, w);
  }

  void collect(ParamCollector& c) {
    if (lmsa) lmsa->collect(c);
    ln1.collect(c);
    attn.collect(c);
    ln2.collect(c);
    mlp.collect(c);
  }

  // Base (non-adapter) parameters, the ones covered by pretrained weights.
  void collect_base(ParamCollector& c) {
    ln1.collect(c);
    attn.collect(c);
    ln2.collect(c);
    mlp.collect(c);
  }
};

struct EncoderConfig {
  int embed_dim = 768;
  int depth = 12;
  int heads = 12;
  int patch_size = 16;
  int mlp_ratio = 4;
  int pe_grid = 32;
  std::vector<int> taps = {3, 6, 9, 12};

  void validate() const {
    if (embed_dim <= 0 || depth <= 0 || heads <= 0 || patch_size <= 0 || pe_grid <= 0) {
      throw std::invalid_argument("EncoderConfig: dimensions must be positive");
    }
    if (embed_dim % heads != 0) {
      throw std::invalid_argument("EncoderConfig: heads must divide embed_dim");
    }
    if (taps.empty()) throw std::invalid_argument("EncoderConfig: at least one tap required");
    int prev = 0;
    for (int t : taps) {
      if (t <= prev || t > depth) {
        throw std::invalid_argument("EncoderConfig: taps must be ascending and within [1, depth]");
      }
      prev = t;
    }
  }
};

struct EncoderOutput {
  std::vector<Var> taps;  // (D,H,W) grids at the configured layers, ascending
  Var final;              // last layer output
};

struct ImageEncoder {
  EncoderConfig cfg;
  PatchConv patch_embed;
  PosEmbed2d pos_embed;
  std::vector<TransformerLayer> layers;

  ImageEncoder() = default;
  ImageEncoder(const EncoderConfig& config, const AdapterConfig& adapter, Rng& base_rng,
               Rng& adapter_rng)
      : cfg(config),
        patch_embed("encoder.patch_embed", 3, config.embed_dim, config.patch_size, base_rng),
        pos_embed("encoder.pos_embed", config.embed_dim, config.pe_grid, base_rng) {
    cfg.validate();
    if (adapter.enabled) adapter.validate(config.embed_dim);
    layers.reserve(static_cast<size_t>(config.depth));
    for (int i = 0; i < config.depth; ++i) {
      layers.emplace_back("encoder.layers." + std::to_string(i), config.embed_dim, config.heads,
                          config.mlp_ratio, adapter, base_rng, adapter_rng);
    }
  }

  // image: (3, H_in, W_in) with both sides divisible by the patch size.
  EncoderOutput forward(const Var& image) const {
    const int hin = image->value.dim(1), win = image->value.dim(2);
    if (hin % cfg.patch_size != 0 || win % cfg.patch_size != 0) {
      throw std::invalid_argument("ImageEncoder: input size " + std::to_string(hin) + "x" +
                                  std::to_string(win) + " not divisible by patch size " +
                                  std::to_string(cfg.patch_size));
    }
    const int h = hin / cfg.patch_size, w = win / cfg.patch_size;
    Var x = add(patch_embed.forward(image), pos_embed.forward(h, w));
    EncoderOutput out;
    size_t next_tap = 0;
    for (int i = 0; i < cfg.depth; ++i) {
      x = layers[static_cast<size_t>(i)].forward(x);
      if (next_tap < cfg.taps.size() && cfg.taps[next_tap] == i + 1) {
        out.taps.push_back(x);
        ++next_tap;
      }
    }
    out.final = x;
    return out;
  }

  void collect(ParamCollector& c) {
    patch_embed.collect(c);
    pos_embed.collect(c);
    for (auto& l : layers) l.collect(c);
  }
};

}  // namespace mdsam
