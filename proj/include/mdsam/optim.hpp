#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "core/layers.hpp"

namespace mdsam {

struct TrainConfig {
  Scalar lr_pretrained = 5e-5;
  Scalar lr_new = 5e-4;
  Scalar weight_decay = 1e-4;
  int warmup_epochs = 5;
  int max_epochs = 80;
  int batch_size = 16;
  Scalar clip_norm = 1.0;  // global-norm gradient clipping; <= 0 disables
  std::string optimizer = "adamw";

  void validate() const {
    if (lr_pretrained <= 0 || lr_new <= 0 || weight_decay < 0) {
      throw std::invalid_argument("TrainConfig: learning rates must be positive");
    }
    if (warmup_epochs < 0 || max_epochs <= 0 || warmup_epochs > max_epochs) {
      throw std::invalid_argument("TrainConfig: need 0 <= warmup_epochs <= max_epochs");
    }
    if (batch_size <= 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (optimizer != "adamw") {
      throw std::invalid_argument("TrainConfig: unsupported optimizer '" + optimizer + "'");
    }
  }
};

// Linear warmup multiplier; steps count from 1. During warmup the effective
// lr is exactly target * step / warmup_steps, constant afterwards.
inline Scalar warmup_scale(long step, long warmup_steps) {
  if (warmup_steps <= 0 || step >= warmup_steps) return 1.0;
  return static_cast<Scalar>(step) / static_cast<Scalar>(warmup_steps);
}

// AdamW with decoupled weight decay and per-group learning rates. Frozen
// parameters are excluded entirely: no state, no updates.
class AdamW {
 public:
  struct Slot {
    Param* param;
    Tensor m, v;
  };

  AdamW() = default;

  AdamW(const std::vector<Param*>& params, const TrainConfig& cfg)
      : lr_pretrained_(cfg.lr_pretrained), lr_new_(cfg.lr_new), weight_decay_(cfg.weight_decay) {
    for (Param* p : params) {
      if (p->group == ParamGroup::Frozen) continue;
      slots_.push_back(Slot{p, Tensor(p->value().shape()), Tensor(p->value().shape())});
    }
  }

  Scalar global_grad_norm() const {
    Scalar acc = 0;
    for (const Slot& s : slots_) {
      if (!s.param->var->grad_allocated) continue;
      const Tensor& g = s.param->var->grad;
      for (long i = 0; i < g.size(); ++i) acc += g[i] * g[i];
    }
    return std::sqrt(acc);
  }

  void clip_gradients(Scalar max_norm) {
    if (max_norm <= 0) return;
    const Scalar norm = global_grad_norm();
    if (norm <= max_norm || norm == 0) return;
    const Scalar scale = max_norm / norm;
    for (Slot& s : slots_) {
      if (!s.param->var->grad_allocated) continue;
      Tensor& g = s.param->var->grad;
      for (long i = 0; i < g.size(); ++i) g[i] *= scale;
    }
  }

  void step(Scalar lr_scale) {
    ++t_;
    const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
    const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
    for (Slot& s : slots_) {
      const Scalar lr = lr_scale * (s.param->group == ParamGroup::Pretrained ? lr_pretrained_ : lr_new_);
      Tensor& p = s.param->value();
      const bool has_grad = s.param->var->grad_allocated;
      for (long i = 0; i < p.size(); ++i) {
        const Scalar g = has_grad ? s.param->var->grad[i] : 0.0;
        s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g;
        s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g * g;
        const Scalar mhat = s.m[i] / bc1;
        const Scalar vhat = s.v[i] / bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * p[i]);
      }
    }
  }

  void zero_grad() {
    for (Slot& s : slots_) s.param->var->zero_grad();
  }

  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  std::vector<Slot>& slots() { return slots_; }

 private:
  std::vector<Slot> slots_;
  long t_ = 0;
  Scalar beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  Scalar lr_pretrained_ = 5e-5, lr_new_ = 5e-4, weight_decay_ = 1e-4;
};

}  // namespace mdsam
