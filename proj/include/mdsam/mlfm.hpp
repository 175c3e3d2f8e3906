#pragma once

#include <string>
#include <vector>

#include "core/layers.hpp"

namespace mdsam {

enum class MlfmMode { Off, Concat, Full };

inline const char* mlfm_mode_name(MlfmMode m) {
  switch (m) {
    case MlfmMode::Off: return "off";
    case MlfmMode::Concat: return "concat";
    default: return "full";
  }
}

// Multi-Level Fusion Module. Aggregates the four encoder taps with a 1x1
// conv, derives per-layer channel gates through one Weight Distributor per
// tap (1x1 conv -> GAP -> sigmoid), and sums the gated residual taps:
//   F = sum_g (P_g * X_g + X_g).
struct Mlfm {
  Conv1x1 aggregate_conv;              // 4D -> D
  std::vector<Conv1x1> wd_convs;       // one D -> D conv per tap
  int embed_dim = 0;

  Mlfm() = default;
  // with_distributors=false builds the concat-only ablation (the weight
  // distributors are bypassed there, so they are not constructed at all).
  Mlfm(const std::string& name, int d, int num_taps, bool with_distributors, Rng& rng)
      : aggregate_conv(name + ".aggregate", num_taps * d, d, rng), embed_dim(d) {
    if (with_distributors) {
      wd_convs.reserve(static_cast<size_t>(num_taps));
      for (int g = 0; g < num_taps; ++g) {
        wd_convs.emplace_back(name + ".wd." + std::to_string(g), d, d, rng);
      }
    }
  }

  static void check_taps(const std::vector<Var>& taps) {
    if (taps.empty()) throw std::invalid_argument("Mlfm: empty tap set");
    for (const auto& t : taps) {
      if (t->value.shape() != taps[0]->value.shape()) {
        throw std::invalid_argument("Mlfm: tap shape mismatch " + t->value.shape_str() + " vs " +
                                    taps[0]->value.shape_str());
      }
    }
  }

  // X^c = conv1x1(concat(taps)), D channels.
  Var aggregate(const std::vector<Var>& taps) const {
    check_taps(taps);
    if (static_cast<int>(taps.size()) * taps[0]->value.dim(0) != aggregate_conv.w.value().dim(1)) {
      throw std::invalid_argument("Mlfm: tap count/width does not match module");
    }
    return aggregate_conv.forward(concat_channels(taps));
  }

  // P_g = sigmoid(GAP(conv1x1_g(X^c))): a D-vector in (0,1) per tap.
  std::vector<Var> distribute_weights(const Var& xc) const {
    if (wd_convs.empty()) {
      throw std::logic_error("Mlfm: weight distributors not constructed (concat-only module)");
    }
    std::vector<Var> out;
    out.reserve(wd_convs.size());
    for (const auto& conv : wd_convs) {
      out.push_back(sigmoid(global_avg_pool(conv.forward(xc))));
    }
    return out;
  }

  // F = sum_g (P_g (.) X_g + X_g) with the gates broadcast over space.
  static Var fuse(const std::vector<Var>& taps, const std::vector<Var>& weights) {
    check_taps(taps);
    if (taps.size() != weights.size()) {
      throw std::invalid_argument("Mlfm::fuse: tap/weight count mismatch");
    }
    Var acc;
    for (size_t g = 0; g < taps.size(); ++g) {
      Var term = add(channel_scale(taps[g], weights[g]), taps[g]);
      acc = g == 0 ? term : add(acc, term);
    }
    return acc;
  }

  Var forward(const std::vector<Var>& taps) const {
    Var xc = aggregate(taps);
    return fuse(taps, distribute_weights(xc));
  }

  // Ablation that short-circuits the module to the aggregated feature.
  Var forward_concat(const std::vector<Var>& taps) const { return aggregate(taps); }

  void collect(ParamCollector& c) {
    aggregate_conv.collect(c);
    for (auto& conv : wd_convs) conv.collect(c);
  }
};

}  // namespace mdsam
