#pragma once

#include <nlohmann/json.hpp>

#include "data.hpp"

namespace mdsam {

// Synthetic toy data: one colored shape (rectangle or ellipse) on a darker
// noisy background; the mask is the shape. Used by toy training runs, the
// test suites, and the `synth` CLI command.

struct SynthSpec {
  int count = 8;
  int size = 64;
  std::uint64_t seed = 0;
};

struct SynthSample {
  std::vector<std::uint8_t> rgb;   // interleaved (size*size*3)
  std::vector<std::uint8_t> mask;  // (size*size), 0 or 255
  int size = 0;
  std::string id;
};

inline SynthSample synth_sample(int size, int index, Rng& rng) {
  SynthSample s;
  s.size = size;
  char name[32];
  std::snprintf(name, sizeof name, "sample_%03d", index);
  s.id = name;
  s.rgb.resize(static_cast<size_t>(size) * size * 3);
  s.mask.assign(static_cast<size_t>(size) * size, 0);
  const std::uint8_t bg[3] = {static_cast<std::uint8_t>(rng.below(80)),
                              static_cast<std::uint8_t>(rng.below(80)),
                              static_cast<std::uint8_t>(rng.below(80))};
  const std::uint8_t fg[3] = {static_cast<std::uint8_t>(150 + rng.below(105)),
                              static_cast<std::uint8_t>(150 + rng.below(105)),
                              static_cast<std::uint8_t>(150 + rng.below(105))};
  const bool ellipse = rng.bernoulli(0.5);
  const int cx = size / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 2)));
  const int cy = size / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 2)));
  const int rx = size / 8 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 6)));
  const int ry = size / 8 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 6)));
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      bool inside;
      if (ellipse) {
        const double dx = static_cast<double>(x - cx) / rx;
        const double dy = static_cast<double>(y - cy) / ry;
        inside = dx * dx + dy * dy <= 1.0;
      } else {
        inside = std::abs(x - cx) <= rx && std::abs(y - cy) <= ry;
      }
      const size_t pi = (static_cast<size_t>(y) * size + x) * 3;
      for (int c = 0; c < 3; ++c) {
        const int noisy = (inside ? fg[c] : bg[c]) + static_cast<int>(rng.below(21)) - 10;
        s.rgb[pi + static_cast<size_t>(c)] =
            static_cast<std::uint8_t>(std::min(255, std::max(0, noisy)));
      }
      if (inside) s.mask[static_cast<size_t>(y) * size + x] = 255;
    }
  }
  return s;
}

// In-memory dataset at the generation resolution (normalized like the file
// loading path).
inline Dataset make_synth_dataset(const SynthSpec& spec, const NormalizeStats& stats = {}) {
  Rng rng(spec.seed);
  Dataset ds;
  ds.target_size = spec.size;
  for (int i = 0; i < spec.count; ++i) {
    const SynthSample raw = synth_sample(spec.size, i, rng);
    Sample sample;
    sample.id = raw.id;
    sample.image = Tensor({3, spec.size, spec.size});
    sample.mask = Tensor({1, spec.size, spec.size});
    for (int y = 0; y < spec.size; ++y) {
      for (int x = 0; x < spec.size; ++x) {
        const size_t pi = (static_cast<size_t>(y) * spec.size + x) * 3;
        for (int c = 0; c < 3; ++c) {
          const Scalar unit = static_cast<Scalar>(raw.rgb[pi + static_cast<size_t>(c)]) / 255.0;
          sample.image.at(c, y, x) = (unit - stats.mean[c]) / stats.stddev[c];
        }
        sample.mask.at(0, y, x) =
            raw.mask[static_cast<size_t>(y) * spec.size + x] > 127 ? 1.0 : 0.0;
      }
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

// On-disk dataset plus manifest.json, rooted at out_dir.
inline void write_synth_dataset(const std::string& out_dir, const SynthSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir + "/images");
  fs::create_directories(out_dir + "/masks");
  Rng rng(spec.seed);
  for (int i = 0; i < spec.count; ++i) {
    const SynthSample s = synth_sample(spec.size, i, rng);
    write_ppm(out_dir + "/images/" + s.id + ".ppm", spec.size, spec.size, s.rgb.data());
    write_pgm(out_dir + "/masks/" + s.id + ".pgm", spec.size, spec.size, s.mask.data());
  }
  nlohmann::json manifest = {{"split", "toy"},
                             {"image_dir", out_dir + "/images"},
                             {"mask_dir", out_dir + "/masks"}};
  std::ofstream mf(out_dir + "/manifest.json");
  mf << manifest.dump(2) << "\n";
}

}  // namespace mdsam
