#pragma once

#include <optional>
#include <string>
#include <vector>

#include "decoder.hpp"
#include "dem.hpp"
#include "encoder.hpp"
#include "mlfm.hpp"

namespace mdsam {

struct ModelConfig {
  EncoderConfig encoder;
  AdapterConfig adapter;
  DecoderConfig decoder;
  DemConfig dem;
  MlfmMode mlfm = MlfmMode::Full;
  bool full_finetune = false;  // trains the base encoder (no freezing)
  int resolution = 512;
  std::uint64_t seed = 0;

  void validate() const {
    encoder.validate();
    if (adapter.enabled) adapter.validate(encoder.embed_dim);
    if (resolution <= 0 || resolution % encoder.patch_size != 0) {
      throw std::invalid_argument("ModelConfig: resolution must be a positive multiple of " +
                                  std::to_string(encoder.patch_size));
    }
    if (!decoder.enabled) {
      if (dem.mode != DemMode::Off) {
        throw std::invalid_argument(
            "ModelConfig: DEM requires the mask decoder (dem on, decoder off)");
      }
      throw std::invalid_argument("ModelConfig: the mask decoder cannot be disabled; the model "
                                  "has no other output path");
    }
    decoder.validate();
    dem.validate();
  }

  // Common small configuration for tests and toy runs.
  static ModelConfig toy(int embed_dim = 32, int depth = 4, int resolution = 64,
                         std::uint64_t seed = 0) {
    ModelConfig cfg;
    cfg.encoder.embed_dim = embed_dim;
    cfg.encoder.depth = depth;
    cfg.encoder.heads = embed_dim >= 16 ? 4 : 2;
    cfg.encoder.taps.clear();
    if (depth >= 4) {
      for (int q = 1; q <= 4; ++q) cfg.encoder.taps.push_back(depth * q / 4);
    } else {
      for (int i = 1; i <= depth; ++i) cfg.encoder.taps.push_back(i);
    }
    cfg.encoder.pe_grid = std::max(1, resolution / cfg.encoder.patch_size);
    cfg.adapter.reduction = embed_dim >= 32 ? 4 : 2;
    cfg.adapter.pool_scales = {1, 2, 2, 2};
    cfg.decoder.transformer_dim = 32;
    cfg.decoder.heads = 2;
    cfg.decoder.mlp_dim = 64;
    cfg.dem.channels = 8;
    cfg.dem.re_channels = 16;
    cfg.dem.up_channels = 8;
    cfg.resolution = resolution;
    cfg.seed = seed;
    return cfg;
  }

  // SAM-B shaped configuration (the parameter-accounting reference).
  static ModelConfig sam_b(int resolution = 512) {
    ModelConfig cfg;
    cfg.resolution = resolution;
    cfg.encoder.pe_grid = resolution / cfg.encoder.patch_size;
    return cfg;
  }
};

struct ModelOutput {
  Var s_f;            // (1, H_in, W_in) final saliency logits
  Var s_m;            // (1, H_in/4, W_in/4) decoder side logits
  Var embedding;      // fused image embedding fed to the decoder
  EncoderOutput enc;
  std::optional<DemOutput> dem;
  bool dem_active = false;
};

// Full model: adapter-equipped encoder -> multi-level fusion -> prompt-free
// mask decoder -> detail enhancement. The ablation toggles reduce it to any
// of the published variants.
class SodModel {
 public:
  explicit SodModel(const ModelConfig& config) : cfg(config) {
    cfg.validate();
    Rng master(cfg.seed);
    Rng rng_base = master.fork(0x656e63);      // encoder base stream
    Rng rng_adapter = master.fork(0x6c6d7361); // adapter stream
    Rng rng_mlfm = master.fork(0x6d6c666d);
    Rng rng_decoder = master.fork(0x646563);
    Rng rng_dem = master.fork(0x64656d);

    encoder = ImageEncoder(cfg.encoder, cfg.adapter, rng_base, rng_adapter);
    if (cfg.mlfm != MlfmMode::Off) {
      mlfm.emplace("mlfm", cfg.encoder.embed_dim, static_cast<int>(cfg.encoder.taps.size()),
                   cfg.mlfm == MlfmMode::Full, rng_mlfm);
    }
    decoder.emplace("decoder", cfg.encoder.embed_dim, cfg.decoder, cfg.encoder.pe_grid,
                    rng_decoder);
    if (cfg.dem.mode != DemMode::Off) {
      dem.emplace("dem", cfg.encoder.embed_dim, cfg.decoder.mask_channels(), cfg.dem, rng_dem);
    }

    encoder.collect(registry_);
    if (mlfm) mlfm->collect(registry_);
    decoder->collect(registry_);
    if (dem) dem->collect(registry_);
    assign_groups();
  }

  ModelOutput forward(const Var& image, bool training) {
    check_input(image->value);
    ModelOutput out;
    out.enc = encoder.forward(image);
    switch (cfg.mlfm) {
      case MlfmMode::Full: out.embedding = mlfm->forward(out.enc.taps); break;
      case MlfmMode::Concat: out.embedding = mlfm->forward_concat(out.enc.taps); break;
      case MlfmMode::Off: out.embedding = out.enc.final; break;
    }
    DecoderFeatures dec = decoder->decode(out.embedding);
    out.s_m = dec.s_m;
    if (dem) {
      out.dem = dem->forward(image, dec.f_m, out.enc.final, training);
      out.s_f = out.dem->s_f;
      out.dem_active = true;
    } else {
      out.s_f = bilinear_resize(dec.s_m, image->value.dim(1), image->value.dim(2));
    }
    return out;
  }

  ModelOutput forward(const Tensor& image, bool training) {
    return forward(constant(image), training);
  }

  // Deterministic eval-mode saliency probabilities for one image.
  Tensor infer(const Tensor& image) {
    ModelOutput out = forward(image, false);
    Tensor probs = out.s_f->value;
    for (long i = 0; i < probs.size(); ++i) probs[i] = 1.0 / (1.0 + std::exp(-probs[i]));
    return probs;
  }

  std::vector<Param*>& params() { return registry_.params; }
  std::vector<BufferState*>& buffers() { return registry_.buffers; }

  long params_count() const {
    long n = 0;
    for (const Param* p : registry_.params) n += p->size();
    return n;
  }

  long params_count(ParamGroup g) const {
    long n = 0;
    for (const Param* p : registry_.params) {
      if (p->group == g) n += p->size();
    }
    return n;
  }

  Param* find_param(const std::string& name) {
    for (Param* p : registry_.params) {
      if (p->name == name) return p;
    }
    return nullptr;
  }

  void zero_grad() {
    for (Param* p : registry_.params) p->var->zero_grad();
  }

  ModelConfig cfg;
  ImageEncoder encoder;
  std::optional<Mlfm> mlfm;
  std::optional<MaskDecoder> decoder;
  std::optional<Dem> dem;

 private:
  void check_input(const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != 3) {
      throw std::invalid_argument("SodModel: input must be (3,H,W), got " + image.shape_str());
    }
    if (image.dim(1) % cfg.encoder.patch_size != 0 || image.dim(2) % cfg.encoder.patch_size != 0) {
      throw std::invalid_argument("SodModel: input size must be divisible by " +
                                  std::to_string(cfg.encoder.patch_size));
    }
  }

  void assign_groups() {
    for (Param* p : registry_.params) {
      if (p->name.rfind("encoder.", 0) == 0) {
        if (p->name.find(".lmsa.") != std::string::npos) {
          p->set_group(ParamGroup::Fresh);
        } else {
          p->set_group(cfg.full_finetune ? ParamGroup::Pretrained : ParamGroup::Frozen);
        }
      } else if (p->name.rfind("decoder.", 0) == 0) {
        p->set_group(ParamGroup::Pretrained);
      } else {
        p->set_group(ParamGroup::Fresh);  // mlfm.*, dem.*
      }
    }
  }

  ParamCollector registry_;
};

}  // namespace mdsam
