#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "model.hpp"
#include "optim.hpp"

namespace mdsam {

// JSON <-> config mapping. nlohmann::json orders keys lexicographically, so
// dump() is canonical and hashable for provenance stamps.

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["encoder"] = {{"embed_dim", cfg.encoder.embed_dim}, {"depth", cfg.encoder.depth},
                  {"heads", cfg.encoder.heads},         {"patch_size", cfg.encoder.patch_size},
                  {"mlp_ratio", cfg.encoder.mlp_ratio}, {"pe_grid", cfg.encoder.pe_grid},
                  {"taps", cfg.encoder.taps}};
  j["adapter"] = {{"reduction", cfg.adapter.reduction},
                  {"pool_scales", cfg.adapter.pool_scales},
                  {"zero_init_up", cfg.adapter.zero_init_up},
                  {"enabled", cfg.adapter.enabled},
                  {"local_branch", cfg.adapter.local_branch}};
  j["decoder"] = {{"enabled", cfg.decoder.enabled},
                  {"transformer_dim", cfg.decoder.transformer_dim},
                  {"depth", cfg.decoder.depth},
                  {"heads", cfg.decoder.heads},
                  {"mlp_dim", cfg.decoder.mlp_dim},
                  {"downsample_rate", cfg.decoder.downsample_rate}};
  j["dem"] = {{"mode", dem_mode_name(cfg.dem.mode)},
              {"channels", cfg.dem.channels},
              {"re_channels", cfg.dem.re_channels},
              {"up_channels", cfg.dem.up_channels}};
  j["mlfm"] = mlfm_mode_name(cfg.mlfm);
  j["full_finetune"] = cfg.full_finetune;
  j["resolution"] = cfg.resolution;
  j["seed"] = cfg.seed;
  return j;
}

inline MlfmMode mlfm_mode_from_name(const std::string& s) {
  if (s == "off") return MlfmMode::Off;
  if (s == "concat") return MlfmMode::Concat;
  if (s == "full") return MlfmMode::Full;
  throw std::invalid_argument("config: unknown mlfm mode '" + s + "' (off|concat|full)");
}

inline DemMode dem_mode_from_name(const std::string& s) {
  if (s == "off") return DemMode::Off;
  if (s == "no_meem") return DemMode::NoMeem;
  if (s == "full") return DemMode::Full;
  throw std::invalid_argument("config: unknown dem mode '" + s + "' (off|no_meem|full)");
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    cfg.encoder.embed_dim = e.value("embed_dim", cfg.encoder.embed_dim);
    cfg.encoder.depth = e.value("depth", cfg.encoder.depth);
    cfg.encoder.heads = e.value("heads", cfg.encoder.heads);
    cfg.encoder.patch_size = e.value("patch_size", cfg.encoder.patch_size);
    cfg.encoder.mlp_ratio = e.value("mlp_ratio", cfg.encoder.mlp_ratio);
    cfg.encoder.pe_grid = e.value("pe_grid", cfg.encoder.pe_grid);
    cfg.encoder.taps = e.value("taps", cfg.encoder.taps);
  }
  if (j.contains("adapter")) {
    const auto& a = j.at("adapter");
    cfg.adapter.reduction = a.value("reduction", cfg.adapter.reduction);
    cfg.adapter.pool_scales = a.value("pool_scales", cfg.adapter.pool_scales);
    cfg.adapter.zero_init_up = a.value("zero_init_up", cfg.adapter.zero_init_up);
    cfg.adapter.enabled = a.value("enabled", cfg.adapter.enabled);
    cfg.adapter.local_branch = a.value("local_branch", cfg.adapter.local_branch);
  }
  if (j.contains("decoder")) {
    const auto& d = j.at("decoder");
    cfg.decoder.enabled = d.value("enabled", cfg.decoder.enabled);
    cfg.decoder.transformer_dim = d.value("transformer_dim", cfg.decoder.transformer_dim);
    cfg.decoder.depth = d.value("depth", cfg.decoder.depth);
    cfg.decoder.heads = d.value("heads", cfg.decoder.heads);
    cfg.decoder.mlp_dim = d.value("mlp_dim", cfg.decoder.mlp_dim);
    cfg.decoder.downsample_rate = d.value("downsample_rate", cfg.decoder.downsample_rate);
  }
  if (j.contains("dem")) {
    const auto& d = j.at("dem");
    cfg.dem.mode = dem_mode_from_name(d.value("mode", std::string("full")));
    cfg.dem.channels = d.value("channels", cfg.dem.channels);
    cfg.dem.re_channels = d.value("re_channels", cfg.dem.re_channels);
    cfg.dem.up_channels = d.value("up_channels", cfg.dem.up_channels);
  }
  if (j.contains("mlfm")) cfg.mlfm = mlfm_mode_from_name(j.at("mlfm").get<std::string>());
  cfg.full_finetune = j.value("full_finetune", cfg.full_finetune);
  cfg.resolution = j.value("resolution", cfg.resolution);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {{"lr_pretrained", cfg.lr_pretrained}, {"lr_new", cfg.lr_new},
          {"weight_decay", cfg.weight_decay},   {"warmup_epochs", cfg.warmup_epochs},
          {"max_epochs", cfg.max_epochs},       {"batch_size", cfg.batch_size},
          {"clip_norm", cfg.clip_norm},         {"optimizer", cfg.optimizer}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.lr_pretrained = j.value("lr_pretrained", cfg.lr_pretrained);
  cfg.lr_new = j.value("lr_new", cfg.lr_new);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.warmup_epochs = j.value("warmup_epochs", cfg.warmup_epochs);
  cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
  cfg.optimizer = j.value("optimizer", cfg.optimizer);
  return cfg;
}

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig rc;
  if (j.contains("model")) rc.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) rc.train = train_config_from_json(j.at("train"));
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline std::string run_config_dump(const RunConfig& rc) {
  nlohmann::json j;
  j["model"] = model_config_to_json(rc.model);
  j["train"] = train_config_to_json(rc.train);
  return j.dump();
}

inline std::uint64_t config_hash(const RunConfig& rc) { return fnv1a64(run_config_dump(rc)); }

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace mdsam
