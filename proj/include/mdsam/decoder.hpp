#pragma once

#include <string>
#include <vector>

#include "core/layers.hpp"

namespace mdsam {

// ---------------------------------------------------------------------------
// Prompt-free mask decoder in the SAM mold: the image embedding is projected
// to the decoder width, a single learned output token runs a two-way
// transformer against it (token self-attention, token->image cross attention,
// MLP, image->token cross attention per layer), and the attended embedding is
// upscaled 4x with two stride-2 transposed convs. The mask feature F^m is the
// upscaled embedding gated channel-wise by a hypernetwork projection of the
// output token; the side output S^m is a 1x1 conv of F^m.
//
// There are no prompt inputs: the sparse token set is empty and the dense
// prompt is identically zero, so it is dropped from the computation.
// ---------------------------------------------------------------------------

struct DecoderConfig {
  bool enabled = true;
  int transformer_dim = 256;
  int depth = 2;
  int heads = 8;
  int mlp_dim = 2048;
  int downsample_rate = 2;  // cross-attention internal width divisor

  int mask_channels() const { return transformer_dim / 8; }

  void validate() const {
    if (transformer_dim % 8 != 0) {
      throw std::invalid_argument("DecoderConfig: transformer_dim must be divisible by 8");
    }
    if (transformer_dim % heads != 0) {
      throw std::invalid_argument("DecoderConfig: heads must divide transformer_dim");
    }
    if (transformer_dim % (4 * downsample_rate) != 0) {
      throw std::invalid_argument("DecoderConfig: downsample rate incompatible with width");
    }
    if (depth <= 0 || mlp_dim <= 0) {
      throw std::invalid_argument("DecoderConfig: depth and mlp_dim must be positive");
    }
  }
};

struct DecoderFeatures {
  Var f_m;  // (C_dec, 4H, 4W) mask feature
  Var s_m;  // (1, 4H, 4W) saliency logits
};

// Cross attention with separate q/k/v sources and an internal width
// reduction, as used between tokens and image embedding.
struct CrossAttention {
  Dense q_proj, k_proj, v_proj, out_proj;
  int heads = 0, head_dim = 0, inner = 0;

  CrossAttention() = default;
  CrossAttention(const std::string& name, int dim, int num_heads, int downsample, Rng& rng)
      : q_proj(name + ".q", dim, dim / downsample, rng),
        k_proj(name + ".k", dim, dim / downsample, rng),
        v_proj(name + ".v", dim, dim / downsample, rng),
        out_proj(name + ".out", dim / downsample, dim, rng),
        heads(num_heads),
        head_dim(dim / downsample / num_heads),
        inner(dim / downsample) {
    if (inner % num_heads != 0) {
      throw std::invalid_argument("CrossAttention: heads must divide reduced width");
    }
  }

  Var forward(const Var& queries, const Var& keys, const Var& values) const {
    Var q = q_proj.forward(queries);
    Var k = k_proj.forward(keys);
    Var v = v_proj.forward(values);
    const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(head_dim));
    std::vector<Var> outs;
    outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Var qh = slice_cols(q, h * head_dim, head_dim);
      Var kh = slice_cols(k, h * head_dim, head_dim);
      Var vh = slice_cols(v, h * head_dim, head_dim);
      Var attn = softmax_rows(mul_scalar(matmul_nt(qh, kh), scale));
      outs.push_back(matmul(attn, vh));
    }
    return out_proj.forward(concat_cols(outs));
  }

  void collect(ParamCollector& c) {
    q_proj.collect(c);
    k_proj.collect(c);
    v_proj.collect(c);
    out_proj.collect(c);
  }
};

struct TwoWayLayer {
  CrossAttention self_attn;     // over the token set
  Norm norm1, norm2, norm3, norm4;
  CrossAttention token_to_image;
  Dense mlp_fc1, mlp_fc2;
  CrossAttention image_to_token;

  TwoWayLayer() = default;
  TwoWayLayer(const std::string& name, const DecoderConfig& cfg, Rng& rng)
      : self_attn(name + ".self_attn", cfg.transformer_dim, cfg.heads, 1, rng),
        norm1(name + ".norm1", cfg.transformer_dim),
        norm2(name + ".norm2", cfg.transformer_dim),
        norm3(name + ".norm3", cfg.transformer_dim),
        norm4(name + ".norm4", cfg.transformer_dim),
        token_to_image(name + ".t2i", cfg.transformer_dim, cfg.heads, cfg.downsample_rate, rng),
        mlp_fc1(name + ".mlp.fc1", cfg.transformer_dim, cfg.mlp_dim, rng),
        mlp_fc2(name + ".mlp.fc2", cfg.mlp_dim, cfg.transformer_dim, rng),
        image_to_token(name + ".i2t", cfg.transformer_dim, cfg.heads, cfg.downsample_rate, rng) {}

  // tokens (T, D), image (N, D), image_pe (N, D); returns updated pair.
  std::pair<Var, Var> forward(const Var& tokens, const Var& image, const Var& image_pe) const {
    Var t = norm1.forward(add(self_attn.forward(tokens, tokens, tokens), tokens));
    Var keys = add(image, image_pe);
    t = norm2.forward(add(token_to_image.forward(t, keys, image), t));
    Var mlp_out = mlp_fc2.forward(relu(mlp_fc1.forward(t)));
    t = norm3.forward(add(mlp_out, t));
    Var img = norm4.forward(add(image_to_token.forward(keys, t, t), image));
    return {t, img};
  }

  void collect(ParamCollector& c) {
    self_attn.collect(c);
    norm1.collect(c);
    norm2.collect(c);
    norm3.collect(c);
    norm4.collect(c);
    token_to_image.collect(c);
    mlp_fc1.collect(c);
    mlp_fc2.collect(c);
    image_to_token.collect(c);
  }
};

struct MaskDecoder {
  DecoderConfig cfg;
  Conv1x1 input_proj;       // embedding D -> transformer_dim
  PosEmbed2d image_pe;
  Param output_token;
  std::vector<TwoWayLayer> layers;
  CrossAttention final_attn;
  Norm final_norm;
  Deconv2x2 up1, up2;       // T -> T/4 -> T/8
  Norm up_norm;             // channel LayerNorm between the two deconvs
  Dense hyper_fc1, hyper_fc2, hyper_fc3;  // output token -> C_dec gate
  Conv1x1 mask_head;        // C_dec -> 1 logits

  MaskDecoder() = default;
  MaskDecoder(const std::string& name, int embedding_dim, const DecoderConfig& config,
              int pe_grid, Rng& rng)
      : cfg(config),
        input_proj(name + ".input_proj", embedding_dim, config.transformer_dim, rng),
        image_pe(name + ".image_pe", config.transformer_dim, pe_grid, rng),
        output_token(name + ".output_token",
                     init::normal({1, config.transformer_dim}, 0.02, rng)),
        final_attn(name + ".final_attn", config.transformer_dim, config.heads,
                   config.downsample_rate, rng),
        final_norm(name + ".final_norm", config.transformer_dim),
        up1(name + ".up1", config.transformer_dim, config.transformer_dim / 4, rng),
        up2(name + ".up2", config.transformer_dim / 4, config.transformer_dim / 8, rng),
        up_norm(name + ".up_norm", config.transformer_dim / 4),
        hyper_fc1(name + ".hyper.fc1", config.transformer_dim, config.transformer_dim, rng),
        hyper_fc2(name + ".hyper.fc2", config.transformer_dim, config.transformer_dim, rng),
        hyper_fc3(name + ".hyper.fc3", config.transformer_dim, config.mask_channels(), rng),
        mask_head(name + ".mask_head", config.mask_channels(), 1, rng) {
    cfg.validate();
    layers.reserve(static_cast<size_t>(config.depth));
    for (int i = 0; i < config.depth; ++i) {
      layers.emplace_back(name + ".layers." + std::to_string(i), config, rng);
    }
  }

  DecoderFeatures decode(const Var& embedding) const {
    if (embedding->value.dim(0) != input_proj.w.value().dim(1)) {
      throw std::invalid_argument("MaskDecoder: embedding has " +
                                  std::to_string(embedding->value.dim(0)) + " channels, expected " +
                                  std::to_string(input_proj.w.value().dim(1)));
    }
    const int h = embedding->value.dim(1), w = embedding->value.dim(2);
    Var grid = input_proj.forward(embedding);
    Var image = grid_to_tokens(grid);
    Var pe = grid_to_tokens(image_pe.forward(h, w));
    Var tokens = output_token.var;
    for (const auto& layer : layers) {
      auto [t, img] = layer.forward(tokens, image, pe);
      tokens = t;
      image = img;
    }
    Var keys = add(image, pe);
    tokens = final_norm.forward(add(final_attn.forward(tokens, keys, image), tokens));

    Var up = gelu(up_norm.forward_grid(up1.forward(tokens_to_grid(image, h, w))));
    up = gelu(up2.forward(up));  // (C_dec, 4H, 4W)

    Var gate = hyper_fc3.forward(relu(hyper_fc2.forward(relu(hyper_fc1.forward(tokens)))));
    Var gate_vec = reshape(gate, {cfg.mask_channels()});
    DecoderFeatures out;
    out.f_m = channel_scale(up, gate_vec);
    out.s_m = mask_head.forward(out.f_m);
    return out;
  }

  void collect(ParamCollector& c) {
    input_proj.collect(c);
    image_pe.collect(c);
    c.add(output_token);
    for (auto& l : layers) l.collect(c);
    final_attn.collect(c);
    final_norm.collect(c);
    up1.collect(c);
    up2.collect(c);
    up_norm.collect(c);
    hyper_fc1.collect(c);
    hyper_fc2.collect(c);
    hyper_fc3.collect(c);
    mask_head.collect(c);
  }
};

}  // namespace mdsam
