#pragma once

#include <string>
#include <vector>

#include "core/layers.hpp"

namespace mdsam {

enum class DemMode { Off, NoMeem, Full };

inline const char* dem_mode_name(DemMode m) {
  switch (m) {
    case DemMode::Off: return "off";
    case DemMode::NoMeem: return "no_meem";
    default: return "full";
  }
}

struct DemConfig {
  DemMode mode = DemMode::Full;
  int channels = 32;     // width of F^local and the MEEM pyramid
  int re_channels = 64;  // width of F^re
  int up_channels = 32;  // width of F^up and of the head's hidden convs

  void validate() const {
    if (channels <= 0 || re_channels <= 0 || up_channels <= 0) {
      throw std::invalid_argument("DemConfig: widths must be positive");
    }
  }
};

// Highlights local high-frequency content: subtracts the 3x3 neighborhood
// mean, transforms the residual (1x1 conv + BN + sigmoid) and adds it back.
// On a spatially constant map the residual is exactly zero because the
// pooling excludes padded cells.
struct EdgeEnhancer {
  ConvBnSigmoid1x1 proj;

  EdgeEnhancer() = default;
  EdgeEnhancer(const std::string& name, int channels, Rng& rng)
      : proj(name + ".proj", channels, channels, rng) {}

  Var forward(const Var& f, bool training) {
    Var edge = sub(f, avg_pool3x3_same(f));
    return add(proj.forward(edge, training), f);
  }

  void collect(ParamCollector& c) { proj.collect(c); }
};

// Multi-scale Edge Enhancement Module. Builds a same-resolution pyramid by
// repeated (1x1 conv + BN + sigmoid) -> 3x3 stride-1 average pooling, runs an
// edge enhancer over each pooled level, and fuses everything back to C
// channels with a 1x1 conv.
struct Meem {
  ConvGelu1x1 entry;                       // F^e_0
  std::vector<ConvBnSigmoid1x1> pyramid;   // before each pooling step
  std::vector<EdgeEnhancer> enhancers;     // levels 1..3
  ConvGelu1x1 fuse;                        // 4C -> C

  static constexpr int kLevels = 3;

  Meem() = default;
  Meem(const std::string& name, int channels, Rng& rng)
      : entry(name + ".entry", channels, channels, rng),
        fuse(name + ".fuse", 4 * channels, channels, rng) {
    for (int t = 0; t < kLevels; ++t) {
      pyramid.emplace_back(name + ".pyramid." + std::to_string(t), channels, channels, rng);
      enhancers.emplace_back(name + ".ee." + std::to_string(t), channels, rng);
    }
  }

  Var forward(const Var& f_local, bool training) {
    Var level = entry.forward(f_local);
    std::vector<Var> parts;
    parts.reserve(kLevels + 1);
    parts.push_back(level);
    for (int t = 0; t < kLevels; ++t) {
      level = avg_pool3x3_same(pyramid[static_cast<size_t>(t)].forward(level, training));
      parts.push_back(enhancers[static_cast<size_t>(t)].forward(level, training));
    }
    return fuse.forward(concat_channels(parts));
  }

  void collect(ParamCollector& c) {
    entry.collect(c);
    for (auto& p : pyramid) p.collect(c);
    for (auto& e : enhancers) e.collect(c);
    fuse.collect(c);
  }
};

struct DemOutput {
  Var s_f;      // (1, H_in, W_in) final saliency logits
  Var f_re, f_up, f_local, f_me, f_de;  // intermediates (f_me null in NoMeem mode)
};

// Detail Enhancement Module. The primary branch fuses the decoder's mask
// feature with a projection of the final encoder feature and upsamples to
// input resolution; the auxiliary branch injects image-derived multi-scale
// edge detail. Both meet in a small convolutional head emitting the final
// saliency logits.
struct Dem {
  DemConfig cfg;
  Conv1x1 fd_proj;        // encoder D -> mask-feature width
  Conv1x1 re_conv;        // concat(f_d, f_m) -> re_channels
  ConvBnRelu3x3 up_conv1; // after first 2x upsample
  ConvBnRelu3x3 up_conv2; // after second 2x upsample
  ConvBnRelu3x3 local_conv;  // image -> C
  Meem meem;              // only constructed in Full mode
  ConvBnRelu3x3 head1, head2;
  Conv1x1 head_out;       // -> 1 logit channel

  Dem() = default;
  Dem(const std::string& name, int encoder_dim, int mask_channels, const DemConfig& config,
      Rng& rng)
      : cfg(config),
        fd_proj(name + ".fd_proj", encoder_dim, mask_channels, rng),
        re_conv(name + ".re_conv", 2 * mask_channels, config.re_channels, rng),
        up_conv1(name + ".up_conv1", config.re_channels, config.up_channels, rng),
        up_conv2(name + ".up_conv2", config.up_channels, config.up_channels, rng),
        local_conv(name + ".local_conv", 3, config.channels, rng),
        head1(name + ".head1", config.up_channels + config.channels, config.up_channels, rng),
        head2(name + ".head2", config.up_channels, config.up_channels, rng),
        head_out(name + ".head_out", config.up_channels, 1, rng) {
    cfg.validate();
    if (cfg.mode == DemMode::Full) meem = Meem(name + ".meem", config.channels, rng);
  }

  // F^d: final encoder grid bilinearly upsampled to the decoder resolution,
  // then 1x1-projected to the mask-feature width.
  Var make_fd(const Var& encoder_final, int dec_h, int dec_w) const {
    return fd_proj.forward(bilinear_resize(encoder_final, dec_h, dec_w));
  }

  // F^re = conv1x1([F^d, F^m]); F^up via two (2x upsample -> conv/BN/ReLU)
  // stages, landing exactly at (out_h, out_w).
  std::pair<Var, Var> primary_branch(const Var& f_m, const Var& f_d, bool training) {
    if (f_m->value.dim(1) != f_d->value.dim(1) || f_m->value.dim(2) != f_d->value.dim(2)) {
      throw std::invalid_argument("Dem::primary_branch: f_m/f_d resolution mismatch " +
                                  f_m->value.shape_str() + " vs " + f_d->value.shape_str());
    }
    Var f_re = re_conv.forward(concat_channels({f_d, f_m}));
    const int h = f_re->value.dim(1), w = f_re->value.dim(2);
    Var x = up_conv1.forward(bilinear_resize(f_re, 2 * h, 2 * w), training);
    Var f_up = up_conv2.forward(bilinear_resize(x, 4 * h, 4 * w), training);
    return {f_re, f_up};
  }

  Var local_extract(const Var& image, bool training) { return local_conv.forward(image, training); }

  DemOutput forward(const Var& image, const Var& f_m, const Var& encoder_final, bool training) {
    if (cfg.mode == DemMode::Off) {
      throw std::logic_error("Dem::forward called with mode=off");
    }
    const int in_h = image->value.dim(1), in_w = image->value.dim(2);
    const int dec_h = f_m->value.dim(1), dec_w = f_m->value.dim(2);
    if (dec_h * 4 != in_h || dec_w * 4 != in_w) {
      throw std::invalid_argument("Dem::forward: mask feature is not at input/4 resolution");
    }
    DemOutput out;
    Var f_d = make_fd(encoder_final, dec_h, dec_w);
    auto [f_re, f_up] = primary_branch(f_m, f_d, training);
    out.f_re = f_re;
    out.f_up = f_up;
    out.f_local = local_extract(image, training);
    Var detail = out.f_local;
    if (cfg.mode == DemMode::Full) {
      out.f_me = meem.forward(out.f_local, training);
      detail = add(out.f_me, out.f_local);
    }
    out.f_de = concat_channels({out.f_up, detail});
    out.s_f = head_out.forward(head2.forward(head1.forward(out.f_de, training), training));
    return out;
  }

  void collect(ParamCollector& c) {
    fd_proj.collect(c);
    re_conv.collect(c);
    up_conv1.collect(c);
    up_conv2.collect(c);
    local_conv.collect(c);
    if (cfg.mode == DemMode::Full) meem.collect(c);
    head1.collect(c);
    head2.collect(c);
    head_out.collect(c);
  }
};

}  // namespace mdsam
