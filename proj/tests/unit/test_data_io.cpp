#include <gtest/gtest.h>

#include <filesystem>

#include "mdsam/data.hpp"
#include "mdsam/synth.hpp"
#include "test_util.hpp"

using namespace mdsam;
using testutil::random_tensor;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST(Netpbm, RoundTripsPixels) {
  TempDir dir("mdsam_netpbm");
  std::vector<std::uint8_t> rgb(6 * 4 * 3);
  for (size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<std::uint8_t>(i * 7 % 256);
  write_ppm((dir.path / "img.ppm").string(), 6, 4, rgb.data());
  RawImage img = read_netpbm((dir.path / "img.ppm").string());
  EXPECT_EQ(img.width, 6);
  EXPECT_EQ(img.height, 4);
  EXPECT_EQ(img.channels, 3);
  EXPECT_EQ(img.pixels, rgb);

  std::vector<std::uint8_t> gray(5 * 3);
  for (size_t i = 0; i < gray.size(); ++i) gray[i] = static_cast<std::uint8_t>(i * 17 % 256);
  write_pgm((dir.path / "img.pgm").string(), 5, 3, gray.data());
  RawImage g = read_netpbm((dir.path / "img.pgm").string());
  EXPECT_EQ(g.channels, 1);
  EXPECT_EQ(g.pixels, gray);

  EXPECT_THROW(read_netpbm((dir.path / "missing.ppm").string()), std::runtime_error);
}

TEST(Saliency, QuantizationContract) {
  TempDir dir("mdsam_saliency");
  const std::string path = (dir.path / "map.pgm").string();

  save_saliency(Tensor::full({1, 4, 4}, 0.5), path);
  Tensor half = load_saliency(path);
  const double q = half[0];
  EXPECT_TRUE(std::abs(q - 127.0 / 255.0) < 1e-12 || std::abs(q - 128.0 / 255.0) < 1e-12);

  save_saliency(Tensor::zeros({1, 4, 4}), path);
  Tensor zeros = load_saliency(path);
  for (long i = 0; i < zeros.size(); ++i) EXPECT_DOUBLE_EQ(zeros[i], 0.0);

  Rng rng(1);
  Tensor random = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  save_saliency(random, path);
  Tensor back = load_saliency(path);
  for (long i = 0; i < random.size(); ++i) {
    EXPECT_LE(std::abs(back[i] - random[i]), 0.5 / 255.0 + 1e-12);
  }

  // out-of-range values clamp before quantization
  Tensor wild({1, 1, 2});
  wild[0] = -3.0;
  wild[1] = 4.0;
  save_saliency(wild, path);
  Tensor clamped = load_saliency(path);
  EXPECT_DOUBLE_EQ(clamped[0], 0.0);
  EXPECT_DOUBLE_EQ(clamped[1], 1.0);
}

TEST(Masks, BinarizationAfterResize) {
  TempDir dir("mdsam_masks");
  std::vector<std::uint8_t> gray(16 * 16);
  for (size_t i = 0; i < gray.size(); ++i) gray[i] = static_cast<std::uint8_t>(i);
  write_pgm((dir.path / "m.pgm").string(), 16, 16, gray.data());
  Tensor mask = load_mask_tensor((dir.path / "m.pgm").string(), 32);
  for (long i = 0; i < mask.size(); ++i) {
    EXPECT_TRUE(mask[i] == 0.0 || mask[i] == 1.0);
  }
}

TEST(Dataset, LoadsToyManifestDeterministically) {
  TempDir dir("mdsam_dataset");
  write_synth_dataset(dir.path.string(), SynthSpec{3, 32, 7});
  DatasetManifest manifest = DatasetManifest::from_json_file((dir.path / "manifest.json").string());
  EXPECT_EQ(manifest.split, "toy");
  Dataset a = load_dataset(manifest, 32, false);
  Dataset b = load_dataset(manifest, 32, false);
  ASSERT_EQ(a.samples.size(), 3u);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].id, b.samples[i].id);
    EXPECT_TRUE(testutil::tensors_equal(a.samples[i].image, b.samples[i].image));
    EXPECT_TRUE(testutil::tensors_equal(a.samples[i].mask, b.samples[i].mask));
    EXPECT_EQ(a.samples[i].image.shape(), (std::vector<int>{3, 32, 32}));
    for (long j = 0; j < a.samples[i].mask.size(); ++j) {
      const double v = a.samples[i].mask[j];
      EXPECT_TRUE(v == 0.0 || v == 1.0);
    }
  }
}

TEST(Dataset, MissingMaskIsManifestError) {
  TempDir dir("mdsam_dataset_missing");
  write_synth_dataset(dir.path.string(), SynthSpec{2, 32, 3});
  fs::remove(dir.path / "masks" / "sample_001.pgm");
  DatasetManifest manifest = DatasetManifest::from_json_file((dir.path / "manifest.json").string());
  EXPECT_THROW(load_dataset(manifest, 32, false), std::runtime_error);
}

TEST(Dataset, UnreadableFileErrorCarriesSampleId) {
  TempDir dir("mdsam_dataset_corrupt");
  write_synth_dataset(dir.path.string(), SynthSpec{2, 32, 3});
  std::ofstream corrupt(dir.path / "images" / "sample_001.ppm", std::ios::trunc);
  corrupt << "garbage";
  corrupt.close();
  DatasetManifest manifest = DatasetManifest::from_json_file((dir.path / "manifest.json").string());
  try {
    load_dataset(manifest, 32, false);
    FAIL() << "expected a load error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("sample_001"), std::string::npos) << e.what();
  }
}

TEST(Dataset, RejectsBadTargetSize) {
  DatasetManifest manifest{"toy", "/nonexistent", "/nonexistent"};
  EXPECT_THROW(load_dataset(manifest, 30, false), std::invalid_argument);
}

TEST(Batcher, ShapesAndDeterminism) {
  Rng rng1(5), rng2(5), rng3(6);
  auto b1 = make_batches(10, 4, rng1);
  ASSERT_EQ(b1.size(), 3u);
  EXPECT_EQ(b1[0].size(), 4u);
  EXPECT_EQ(b1[1].size(), 4u);
  EXPECT_EQ(b1[2].size(), 2u);
  auto b2 = make_batches(10, 4, rng2);
  EXPECT_EQ(b1, b2);
  auto b3 = make_batches(10, 4, rng3);
  EXPECT_NE(b1, b3);
  // every index appears exactly once
  std::vector<int> seen;
  for (const auto& b : b1) seen.insert(seen.end(), b.begin(), b.end());
  std::sort(seen.begin(), seen.end());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(seen[static_cast<size_t>(i)], i);
}

TEST(Augment, HorizontalFlipIsInvolutive) {
  Rng rng(8);
  Tensor x = random_tensor({3, 6, 5}, rng);
  EXPECT_TRUE(testutil::tensors_equal(hflip_tensor(hflip_tensor(x)), x));
  Tensor f = hflip_tensor(x);
  EXPECT_DOUBLE_EQ(f.at(1, 2, 0), x.at(1, 2, 4));
}

TEST(Resize, NearestKeepsBinaryValues) {
  Rng rng(9);
  Tensor m = testutil::random_binary_mask({1, 10, 10}, rng);
  Tensor up = nearest_resize_tensor(m, 17, 13);
  for (long i = 0; i < up.size(); ++i) EXPECT_TRUE(up[i] == 0.0 || up[i] == 1.0);
}

}  // namespace
