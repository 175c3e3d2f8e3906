#pragma once

#include <filesystem>
#include <functional>
#include <iomanip>
#include <sstream>

#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "losses.hpp"

namespace mdsam {

struct LossLogRow {
  long step = 0;
  int epoch = 0;
  Scalar lr_pretrained = 0, lr_new = 0;
  Scalar bce_f = 0, iou_f = 0, l1_f = 0;
  Scalar bce_m = 0, iou_m = 0, l1_m = 0;
  Scalar total = 0;
};

// Raised when the loss goes non-finite; carries the step diagnostics.
struct TrainAbort : std::runtime_error {
  long step;
  int epoch;
  Scalar lr_pretrained, lr_new, grad_norm;

  TrainAbort(long step_, int epoch_, Scalar lrp, Scalar lrn, Scalar gn)
      : std::runtime_error("non-finite loss at step " + std::to_string(step_) + " (epoch " +
                           std::to_string(epoch_) + ", lr_pretrained " + std::to_string(lrp) +
                           ", lr_new " + std::to_string(lrn) + ", grad_norm " +
                           std::to_string(gn) + ")"),
        step(step_),
        epoch(epoch_),
        lr_pretrained(lrp),
        lr_new(lrn),
        grad_norm(gn) {}
};

struct TrainOptions {
  std::string out_dir;  // when set: rolling checkpoint + loss CSV live here
  std::function<void(const LossLogRow&)> on_step;
};

struct TrainResult {
  std::vector<LossLogRow> log;
  int epochs_completed = 0;
  long global_step = 0;
};

inline void write_loss_log(const std::vector<LossLogRow>& rows, const std::string& path,
                           std::uint64_t cfg_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss log: " + path);
  out << "# config_hash=" << hash_hex(cfg_hash) << "\n";
  out << "step,epoch,lr_pretrained,lr_new,bce_f,iou_f,l1_f,bce_m,iou_m,l1_m,total\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.step << "," << r.epoch << "," << r.lr_pretrained << "," << r.lr_new << "," << r.bce_f
        << "," << r.iou_f << "," << r.l1_f << "," << r.bce_m << "," << r.iou_m << "," << r.l1_m
        << "," << r.total << "\n";
  }
}

// Owns the optimizer and epoch/step counters so training can be paused,
// checkpointed and resumed. One Trainer drives one model.
class Trainer {
 public:
  Trainer(SodModel& model, const TrainConfig& tcfg)
      : model_(model), tcfg_(tcfg), opt_(model.params(), tcfg) {
    tcfg_.validate();
  }

  // Runs from the current epoch up to max_epochs.
  TrainResult run(const Dataset& data, const TrainOptions& options = {}) {
    if (data.samples.empty()) throw std::invalid_argument("train: dataset is empty");
    TrainResult result;
    const int steps_per_epoch =
        (static_cast<int>(data.samples.size()) + tcfg_.batch_size - 1) / tcfg_.batch_size;
    const long warmup_steps = static_cast<long>(tcfg_.warmup_epochs) * steps_per_epoch;

    for (int epoch = epoch_ + 1; epoch <= tcfg_.max_epochs; ++epoch) {
      Rng epoch_rng = Rng(model_.cfg.seed).fork(0xe90c + static_cast<std::uint64_t>(epoch));
      const auto batches =
          make_batches(static_cast<int>(data.samples.size()), tcfg_.batch_size, epoch_rng);
      for (const auto& batch : batches) {
        ++global_step_;
        const Scalar scale = warmup_scale(global_step_, warmup_steps);
        LossLogRow row;
        row.step = global_step_;
        row.epoch = epoch;
        row.lr_pretrained = scale * tcfg_.lr_pretrained;
        row.lr_new = scale * tcfg_.lr_new;

        opt_.zero_grad();
        const Scalar inv_bs = 1.0 / static_cast<Scalar>(batch.size());
        for (int idx : batch) {
          const Sample& s = data.samples[static_cast<size_t>(idx)];
          Tensor image = s.image;
          Tensor mask = s.mask;
          if (data.augment && epoch_rng.bernoulli(0.5)) {
            image = hflip_tensor(image);
            mask = hflip_tensor(mask);
          }
          ModelOutput out = model_.forward(constant(image), true);
          LossBreakdown lb =
              total_loss(out.s_f, out.dem_active ? out.s_m : Var{}, constant(mask));
          if (!std::isfinite(lb.total)) {
            throw TrainAbort(global_step_, epoch, row.lr_pretrained, row.lr_new,
                             opt_.global_grad_norm());
          }
          backward(lb.value, inv_bs);
          row.bce_f += lb.bce_f * inv_bs;
          row.iou_f += lb.iou_f * inv_bs;
          row.l1_f += lb.l1_f * inv_bs;
          row.bce_m += lb.bce_m * inv_bs;
          row.iou_m += lb.iou_m * inv_bs;
          row.l1_m += lb.l1_m * inv_bs;
          row.total += lb.total * inv_bs;
        }
        opt_.clip_gradients(tcfg_.clip_norm);
        opt_.step(scale);
        if (options.on_step) options.on_step(row);
        result.log.push_back(row);
      }
      epoch_ = epoch;
      ++result.epochs_completed;
      if (!options.out_dir.empty()) {
        save_checkpoint(options.out_dir + "/checkpoint.mdsam");
      }
    }
    result.global_step = global_step_;
    return result;
  }

  // Full training state: parameters, BN buffers, optimizer moments, counters,
  // RNG state and a config snapshot.
  void save_checkpoint(const std::string& path) {
    Archive ar;
    ar.add_words("meta.format", {1});
    RunConfig rc{model_.cfg, tcfg_};
    const std::string cfg_json = run_config_dump(rc);
    ar.add_words("meta.config_hash", {fnv1a64(cfg_json)});
    ar.add_bytes("meta.config_json", cfg_json);
    ar.add_words("meta.epoch", {static_cast<std::uint64_t>(epoch_)});
    ar.add_words("meta.global_step", {static_cast<std::uint64_t>(global_step_)});
    const auto rng_state =
        Rng(model_.cfg.seed).fork(0xe90c + static_cast<std::uint64_t>(epoch_ + 1)).state();
    ar.add_words("rng.state", {rng_state[0], rng_state[1], rng_state[2], rng_state[3]});
    for (const Param* p : model_.params()) {
      ar.add_tensor("param." + p->name, p->value());
    }
    for (const BufferState* b : model_.buffers()) {
      ar.add_tensor("buffer." + b->name, b->value);
    }
    ar.add_words("opt.step", {static_cast<std::uint64_t>(opt_.step_count())});
    for (const auto& slot : opt_.slots()) {
      ar.add_tensor("opt.m." + slot.param->name, slot.m);
      ar.add_tensor("opt.v." + slot.param->name, slot.v);
    }
    ar.save(path);
  }

  void load_checkpoint(const std::string& path) {
    const Archive ar = Archive::load(path);
    restore_model(model_, ar);
    // adopt the stored model config (seed included) so the resumed run
    // continues the original data-order streams and re-saves byte-identically
    model_.cfg = run_config_from_json(
        nlohmann::json::parse(ar.at("meta.config_json").bytes)).model;
    epoch_ = static_cast<int>(ar.word("meta.epoch"));
    global_step_ = static_cast<long>(ar.word("meta.global_step"));
    opt_.set_step_count(static_cast<long>(ar.word("opt.step")));
    for (auto& slot : opt_.slots()) {
      slot.m = ar.tensor("opt.m." + slot.param->name);
      slot.v = ar.tensor("opt.v." + slot.param->name);
    }
  }

  // Parameters and buffers only; enough to reproduce forward passes.
  static void restore_model(SodModel& model, const Archive& ar) {
    for (Param* p : model.params()) {
      const Tensor& t = ar.tensor("param." + p->name);
      if (t.shape() != p->value().shape()) {
        throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
      }
      p->value() = t;
    }
    for (BufferState* b : model.buffers()) {
      b->value = ar.tensor("buffer." + b->name);
    }
  }

  AdamW& optimizer() { return opt_; }
  int epoch() const { return epoch_; }
  long global_step() const { return global_step_; }
  const TrainConfig& config() const { return tcfg_; }

 private:
  SodModel& model_;
  TrainConfig tcfg_;
  AdamW opt_;
  int epoch_ = 0;
  long global_step_ = 0;
};

// Eval-mode inference over a directory of images; one 8-bit mask per input.
struct InferStats {
  int written = 0;
  int skipped = 0;
  std::vector<std::string> outputs;
};

inline InferStats infer_directory(SodModel& model, const std::string& image_dir,
                                  const std::string& out_dir, int resolution,
                                  const NormalizeStats& stats = {}) {
  namespace fs = std::filesystem;
  if (resolution % model.cfg.encoder.patch_size != 0) {
    throw std::invalid_argument("infer: resolution must be divisible by " +
                                std::to_string(model.cfg.encoder.patch_size));
  }
  fs::create_directories(out_dir);
  InferStats st;
  for (const auto& [stem, path] : list_by_stem(image_dir)) {
    Tensor image;
    try {
      image = load_image_tensor(path, resolution, stats);
    } catch (const std::exception&) {
      ++st.skipped;
      continue;
    }
    Tensor probs = model.infer(image);
    const std::string out_path = out_dir + "/" + stem + ".pgm";
    save_saliency(probs, out_path);
    st.outputs.push_back(out_path);
    ++st.written;
  }
  return st;
}

}  // namespace mdsam
