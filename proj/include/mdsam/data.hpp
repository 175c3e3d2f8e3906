#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/image_ops.hpp"
#include "core/rng.hpp"

namespace mdsam {

// ---------------------------------------------------------------------------
// Raster I/O: binary netpbm (P5 grayscale / P6 color), 8-bit.
// ---------------------------------------------------------------------------

struct RawImage {
  int width = 0, height = 0, channels = 0;  // channels 1 or 3, interleaved rows
  std::vector<std::uint8_t> pixels;
};

inline RawImage read_netpbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image file: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") {
    throw std::runtime_error("unsupported image format (expect binary P5/P6): " + path);
  }
  auto next_int = [&in, &path]() {
    // skips whitespace and '#' comment lines
    while (true) {
      const int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long v = -1;
    in >> v;
    if (!in || v < 0) throw std::runtime_error("malformed netpbm header: " + path);
    return v;
  };
  RawImage img;
  img.width = static_cast<int>(next_int());
  img.height = static_cast<int>(next_int());
  const long maxval = next_int();
  if (maxval <= 0 || maxval > 255) throw std::runtime_error("unsupported maxval in " + path);
  in.get();  // single whitespace before raster
  img.channels = (magic == "P6") ? 3 : 1;
  const size_t n = static_cast<size_t>(img.width) * img.height * img.channels;
  img.pixels.resize(n);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) {
    throw std::runtime_error("truncated image data: " + path);
  }
  return img;
}

inline void write_pgm(const std::string& path, int width, int height, const std::uint8_t* data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image file: " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(width) * height);
}

inline void write_ppm(const std::string& path, int width, int height, const std::uint8_t* data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image file: " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(width) * height * 3);
}

// ---------------------------------------------------------------------------
// Plain-tensor resampling (no autograd).
// ---------------------------------------------------------------------------

inline Tensor bilinear_resize_tensor(const Tensor& src, int oh, int ow) {
  const int c = src.dim(0), h = src.dim(1), w = src.dim(2);
  if (oh == h && ow == w) return src;
  const detail::ResampleAxis ay = detail::bilinear_axis(h, oh);
  const detail::ResampleAxis ax = detail::bilinear_axis(w, ow);
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const int y0 = ay.i0[y], y1 = ay.i1[y];
        const int x0 = ax.i0[x], x1 = ax.i1[x];
        const Scalar ty = ay.t[y], tx = ax.t[x];
        out.at(ch, y, x) = (1 - ty) * ((1 - tx) * src.at(ch, y0, x0) + tx * src.at(ch, y0, x1)) +
                           ty * ((1 - tx) * src.at(ch, y1, x0) + tx * src.at(ch, y1, x1));
      }
    }
  }
  return out;
}

// Center-aligned nearest neighbor, used for masks.
inline Tensor nearest_resize_tensor(const Tensor& src, int oh, int ow) {
  const int c = src.dim(0), h = src.dim(1), w = src.dim(2);
  if (oh == h && ow == w) return src;
  Tensor out({c, oh, ow});
  for (int y = 0; y < oh; ++y) {
    const int sy = std::min(h - 1, static_cast<int>((y + 0.5) * h / oh));
    for (int x = 0; x < ow; ++x) {
      const int sx = std::min(w - 1, static_cast<int>((x + 0.5) * w / ow));
      for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) = src.at(ch, sy, sx);
    }
  }
  return out;
}

inline Tensor hflip_tensor(const Tensor& src) {
  const int c = src.dim(0), h = src.dim(1), w = src.dim(2);
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(ch, y, x) = src.at(ch, y, w - 1 - x);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Samples and datasets
// ---------------------------------------------------------------------------

struct NormalizeStats {
  std::array<Scalar, 3> mean = {0.485, 0.456, 0.406};
  std::array<Scalar, 3> stddev = {0.229, 0.224, 0.225};
};

struct Sample {
  Tensor image;  // (3,S,S), normalized
  Tensor mask;   // (1,S,S), strictly binary
  std::string id;
};

struct DatasetManifest {
  std::string split;
  std::string image_dir;
  std::string mask_dir;

  static DatasetManifest from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    nlohmann::json j;
    in >> j;
    DatasetManifest m;
    m.split = j.value("split", "unnamed");
    m.image_dir = j.at("image_dir").get<std::string>();
    m.mask_dir = j.at("mask_dir").get<std::string>();
    return m;
  }
};

inline Tensor raw_to_unit_tensor(const RawImage& img) {
  Tensor t({3, img.height, img.width});
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const size_t base = (static_cast<size_t>(y) * img.width + x) * img.channels;
      for (int c = 0; c < 3; ++c) {
        const std::uint8_t v = img.pixels[base + (img.channels == 3 ? c : 0)];
        t.at(c, y, x) = static_cast<Scalar>(v) / 255.0;
      }
    }
  }
  return t;
}

inline Tensor load_image_tensor(const std::string& path, int target, const NormalizeStats& stats) {
  Tensor t = bilinear_resize_tensor(raw_to_unit_tensor(read_netpbm(path)), target, target);
  for (int c = 0; c < 3; ++c) {
    const long hw = static_cast<long>(target) * target;
    Scalar* p = t.data() + c * hw;
    for (long i = 0; i < hw; ++i) p[i] = (p[i] - stats.mean[c]) / stats.stddev[c];
  }
  return t;
}

inline Tensor load_mask_tensor(const std::string& path, int target) {
  const RawImage img = read_netpbm(path);
  Tensor gray({1, img.height, img.width});
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const size_t base = (static_cast<size_t>(y) * img.width + x) * img.channels;
      // luminance of color masks, identity for grayscale
      Scalar v = 0;
      for (int c = 0; c < img.channels; ++c) v += img.pixels[base + c];
      gray.at(0, y, x) = v / (255.0 * img.channels);
    }
  }
  Tensor resized = target > 0 ? nearest_resize_tensor(gray, target, target) : gray;
  for (long i = 0; i < resized.size(); ++i) resized[i] = resized[i] > 0.5 ? 1.0 : 0.0;
  return resized;
}

inline std::map<std::string, std::string> list_by_stem(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());  // directory order is unspecified
  std::map<std::string, std::string> out;
  for (const auto& p : files) out[p.stem().string()] = p.string();
  return out;
}

struct Dataset {
  std::vector<Sample> samples;
  bool augment = false;  // horizontal flip with p=0.5, applied by the trainer
  int target_size = 0;
};

inline Dataset load_dataset(const DatasetManifest& manifest, int target_size, bool augment,
                            const NormalizeStats& stats = {}) {
  if (target_size <= 0 || target_size % 16 != 0) {
    throw std::invalid_argument("load_dataset: target size must be a positive multiple of 16");
  }
  const auto images = list_by_stem(manifest.image_dir);
  const auto masks = list_by_stem(manifest.mask_dir);
  if (images.empty()) throw std::runtime_error("no images found in " + manifest.image_dir);
  Dataset ds;
  ds.augment = augment;
  ds.target_size = target_size;
  for (const auto& [stem, img_path] : images) {
    const auto it = masks.find(stem);
    if (it == masks.end()) {
      throw std::runtime_error("manifest error: no mask for image '" + stem + "' in " +
                               manifest.mask_dir);
    }
    Sample s;
    s.id = stem;
    try {
      s.image = load_image_tensor(img_path, target_size, stats);
      s.mask = load_mask_tensor(it->second, target_size);
    } catch (const std::exception& e) {
      throw std::runtime_error("failed to load sample '" + stem + "': " + e.what());
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Seeded shuffled index batches; the last partial batch is kept.
inline std::vector<std::vector<int>> make_batches(int num_samples, int batch_size, Rng& rng) {
  if (batch_size <= 0) throw std::invalid_argument("make_batches: batch size must be positive");
  std::vector<int> idx(static_cast<size_t>(num_samples));
  for (int i = 0; i < num_samples; ++i) idx[static_cast<size_t>(i)] = i;
  rng.shuffle(idx);
  std::vector<std::vector<int>> out;
  for (int start = 0; start < num_samples; start += batch_size) {
    const int end = std::min(num_samples, start + batch_size);
    out.emplace_back(idx.begin() + start, idx.begin() + end);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Saliency map persistence: 8-bit grayscale, clamped to [0,1] then rounded.
// ---------------------------------------------------------------------------

inline void save_saliency(const Tensor& map, const std::string& path) {
  int h = 0, w = 0;
  if (map.rank() == 2) {
    h = map.dim(0);
    w = map.dim(1);
  } else if (map.rank() == 3 && map.dim(0) == 1) {
    h = map.dim(1);
    w = map.dim(2);
  } else {
    throw std::invalid_argument("save_saliency: expected (H,W) or (1,H,W), got " + map.shape_str());
  }
  std::vector<std::uint8_t> bytes(static_cast<size_t>(h) * w);
  for (long i = 0; i < map.size(); ++i) {
    const Scalar v = std::min(1.0, std::max(0.0, map[i]));
    bytes[static_cast<size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  write_pgm(path, w, h, bytes.data());
}

inline Tensor load_saliency(const std::string& path) {
  const RawImage img = read_netpbm(path);
  if (img.channels != 1) throw std::runtime_error("saliency maps must be grayscale: " + path);
  Tensor t({1, img.height, img.width});
  for (long i = 0; i < t.size(); ++i) {
    t[i] = static_cast<Scalar>(img.pixels[static_cast<size_t>(i)]) / 255.0;
  }
  return t;
}

}  // namespace mdsam
