#pragma once

#include <iomanip>
#include <sstream>

#include "metrics.hpp"
#include "train.hpp"

namespace mdsam {

struct AblationVariant {
  std::string label;
  ModelConfig cfg;
};

// The six architecture variants of the module ablation, from plain full
// fine-tuning up to the complete model. Labels are stable strings used in the
// emitted CSV.
inline std::vector<AblationVariant> table4_variants(const ModelConfig& base) {
  std::vector<AblationVariant> out;
  {
    ModelConfig c = base;
    c.full_finetune = true;
    c.adapter.enabled = false;
    c.mlfm = MlfmMode::Off;
    c.dem.mode = DemMode::Off;
    out.push_back({"(a) Full fine-tuning", c});
  }
  {
    ModelConfig c = base;
    c.full_finetune = false;
    c.adapter.enabled = true;
    c.mlfm = MlfmMode::Off;
    c.dem.mode = DemMode::Off;
    out.push_back({"(b) SAM+LMSA", c});
  }
  {
    ModelConfig c = base;
    c.full_finetune = false;
    c.adapter.enabled = true;
    c.mlfm = MlfmMode::Concat;
    c.dem.mode = DemMode::Off;
    out.push_back({"(c) SAM+LMSA+MLFM*", c});
  }
  {
    ModelConfig c = base;
    c.full_finetune = false;
    c.adapter.enabled = true;
    c.mlfm = MlfmMode::Full;
    c.dem.mode = DemMode::Off;
    out.push_back({"(d) SAM+LMSA+MLFM", c});
  }
  {
    ModelConfig c = base;
    c.full_finetune = false;
    c.adapter.enabled = true;
    c.mlfm = MlfmMode::Full;
    c.dem.mode = DemMode::NoMeem;
    out.push_back({"(e) SAM+LMSA+MLFM+DEM*", c});
  }
  {
    ModelConfig c = base;
    c.full_finetune = false;
    c.adapter.enabled = true;
    c.mlfm = MlfmMode::Full;
    c.dem.mode = DemMode::Full;
    out.push_back({"(f) SAM+LMSA+MLFM+DEM", c});
  }
  return out;
}

// Pool-scale / local-branch sweep on the full architecture. Scales are
// clamped to the encoder grid so the defaults stay valid at toy resolutions.
inline std::vector<AblationVariant> scale_variants(const ModelConfig& base) {
  struct Row {
    const char* label;
    std::vector<int> scales;
    bool local;
  };
  const std::vector<Row> rows = {
      {"(a) scales 1,2,3,6 local off", {1, 2, 3, 6}, false},
      {"(b) scales 3,6,9,12 local off", {3, 6, 9, 12}, false},
      {"(c) scales 9,9,9,9 local on", {9, 9, 9, 9}, true},
      {"(d) scales 3,5,7,9 local on", {3, 5, 7, 9}, true},
      {"(e) scales 3,6,9,12 local on", {3, 6, 9, 12}, true},
  };
  const int grid = base.resolution / base.encoder.patch_size;
  std::vector<AblationVariant> out;
  for (const Row& r : rows) {
    ModelConfig c = base;
    c.full_finetune = false;
    c.adapter.enabled = true;
    c.mlfm = MlfmMode::Full;
    c.dem.mode = DemMode::Full;
    c.adapter.local_branch = r.local;
    c.adapter.pool_scales.clear();
    for (int s : r.scales) c.adapter.pool_scales.push_back(std::min(s, grid));
    out.push_back({r.label, c});
  }
  return out;
}

struct AblationRow {
  std::string label;
  bool ok = false;
  std::string error;
  Scalar final_loss = 0;
  Scalar mae = 0, f_max = 0, s = 0, e = 0;
  long trainable_params = 0;
};

// Trains each variant under the shared recipe and scores it on the given
// dataset (the training set, at desk scale). A variant failure is recorded
// and the remaining variants still run.
inline std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& variants,
                                             const Dataset& data, const TrainConfig& tcfg) {
  std::vector<AblationRow> rows;
  for (const auto& variant : variants) {
    AblationRow row;
    row.label = variant.label;
    try {
      SodModel model(variant.cfg);
      row.trainable_params = model.params_count(ParamGroup::Pretrained) +
                             model.params_count(ParamGroup::Fresh);
      Trainer trainer(model, tcfg);
      TrainResult tr = trainer.run(data);
      row.final_loss = tr.log.empty() ? 0.0 : tr.log.back().total;

      int scored = 0, total = 0;
      for (const Sample& s : data.samples) {
        Tensor probs = model.infer(s.image);
        row.mae += mae(probs, s.mask);
        ++total;
        long fg = 0;
        for (long i = 0; i < s.mask.size(); ++i) fg += s.mask[i] > 0.5 ? 1 : 0;
        row.e += e_measure(probs, s.mask);
        if (fg == 0) continue;
        row.f_max += f_measure_curve(probs, s.mask).f_max;
        row.s += s_measure(probs, s.mask);
        ++scored;
      }
      if (total > 0) {
        row.mae /= total;
        row.e /= total;
      }
      if (scored > 0) {
        row.f_max /= scored;
        row.s /= scored;
      }
      row.ok = true;
    } catch (const std::exception& ex) {
      row.ok = false;
      row.error = ex.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path,
                               std::uint64_t cfg_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ablation table: " + path);
  out << "# config_hash=" << hash_hex(cfg_hash) << "\n";
  out << "variant,status,trainable_params,final_loss,mae,f_max,s_measure,e_measure,error\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    std::string err = r.error;
    for (auto& ch : err) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    out << "\"" << r.label << "\"," << (r.ok ? "ok" : "failed") << "," << r.trainable_params << ","
        << r.final_loss << "," << r.mae << "," << r.f_max << "," << r.s << "," << r.e << "," << err
        << "\n";
  }
}

}  // namespace mdsam
