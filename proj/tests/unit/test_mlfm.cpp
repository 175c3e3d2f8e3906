#include <gtest/gtest.h>

#include "mdsam/mlfm.hpp"
#include "test_util.hpp"

using namespace mdsam;
using testutil::grad_check;
using testutil::random_tensor;

namespace {

std::vector<Var> random_taps(int count, int d, int h, int w, Rng& rng, bool with_grad = false) {
  std::vector<Var> taps;
  for (int i = 0; i < count; ++i) taps.push_back(leaf(random_tensor({d, h, w}, rng), with_grad));
  return taps;
}

TEST(Mlfm, AggregateShapeContract) {
  Rng rng(1);
  Mlfm m("mlfm", 8, 4, true, rng);
  auto taps = random_taps(4, 8, 4, 4, rng);
  Var xc = m.aggregate(taps);
  EXPECT_EQ(xc->value.shape(), (std::vector<int>{8, 4, 4}));
}

TEST(Mlfm, AggregateZeroInputsZeroBiasGiveZeros) {
  Rng rng(2);
  Mlfm m("mlfm", 8, 4, true, rng);
  m.aggregate_conv.b.value().fill(0.0);
  std::vector<Var> taps;
  for (int i = 0; i < 4; ++i) taps.push_back(leaf(Tensor::zeros({8, 4, 4})));
  Var xc = m.aggregate(taps);
  for (long i = 0; i < xc->value.size(); ++i) EXPECT_DOUBLE_EQ(xc->value[i], 0.0);
}

TEST(Mlfm, IdentitySelectorConvReturnsFirstTap) {
  Rng rng(3);
  Mlfm m("mlfm", 6, 4, true, rng);
  m.aggregate_conv.w.value().fill(0.0);
  m.aggregate_conv.b.value().fill(0.0);
  for (int c = 0; c < 6; ++c) m.aggregate_conv.w.value().at(c, c) = 1.0;  // picks tap 0 channels
  auto taps = random_taps(4, 6, 3, 3, rng);
  Var xc = m.aggregate(taps);
  EXPECT_TRUE(testutil::tensors_equal(xc->value, taps[0]->value));
}

TEST(Mlfm, MismatchedTapShapesRejected) {
  Rng rng(4);
  Mlfm m("mlfm", 6, 4, true, rng);
  auto taps = random_taps(4, 6, 3, 3, rng);
  taps[2] = leaf(random_tensor({6, 2, 3}, rng));
  EXPECT_THROW(m.aggregate(taps), std::invalid_argument);
  EXPECT_THROW(Mlfm::fuse({taps[0]}, {}), std::invalid_argument);
}

TEST(WeightDistributor, ZeroConvGivesExactlyHalf) {
  Rng rng(5);
  Mlfm m("mlfm", 8, 4, true, rng);
  for (auto& conv : m.wd_convs) {
    conv.w.value().fill(0.0);
    conv.b.value().fill(0.0);
  }
  auto taps = random_taps(4, 8, 4, 4, rng);
  auto weights = m.distribute_weights(m.aggregate(taps));
  ASSERT_EQ(weights.size(), 4u);
  for (const auto& wv : weights) {
    for (long i = 0; i < wv->value.size(); ++i) EXPECT_DOUBLE_EQ(wv->value[i], 0.5);
  }
}

TEST(WeightDistributor, SaturatingBiasStaysInsideOpenInterval) {
  Rng rng(6);
  Mlfm m("mlfm", 8, 4, true, rng);
  for (auto& conv : m.wd_convs) {
    conv.w.value().fill(0.0);
    conv.b.value().fill(10.0);
  }
  auto taps = random_taps(4, 8, 4, 4, rng);
  for (const auto& wv : m.distribute_weights(m.aggregate(taps))) {
    for (long i = 0; i < wv->value.size(); ++i) {
      EXPECT_GT(wv->value[i], 0.9999);
      EXPECT_LT(wv->value[i], 1.0);
    }
  }
}

TEST(WeightDistributor, RandomInputsStayInOpenUnitInterval) {
  Rng rng(7);
  Mlfm m("mlfm", 8, 4, true, rng);
  auto taps = random_taps(4, 8, 5, 5, rng);
  auto weights = m.distribute_weights(m.aggregate(taps));
  ASSERT_EQ(weights.size(), 4u);
  for (const auto& wv : weights) {
    ASSERT_EQ(wv->value.shape(), (std::vector<int>{8}));
    for (long i = 0; i < wv->value.size(); ++i) {
      EXPECT_GT(wv->value[i], 0.0);
      EXPECT_LT(wv->value[i], 1.0);
    }
  }
}

TEST(Fuse, ZeroWeightLimitIsPlainTapSum) {
  Rng rng(8);
  auto taps = random_taps(4, 6, 3, 3, rng);
  std::vector<Var> zero_weights;
  for (int g = 0; g < 4; ++g) zero_weights.push_back(leaf(Tensor::zeros({6})));
  Tensor fused = Mlfm::fuse(taps, zero_weights)->value;
  for (long i = 0; i < fused.size(); ++i) {
    double want = 0;
    for (const auto& t : taps) want += t->value[i];
    EXPECT_NEAR(fused[i], want, 1e-12);
  }
}

TEST(Fuse, IdenticalTapsWithUniformWeightScale) {
  Rng rng(9);
  Tensor x = random_tensor({6, 3, 3}, rng);
  const double p = 0.37;
  std::vector<Var> taps(4, leaf(x));
  std::vector<Var> weights(4, leaf(Tensor::full({6}, p)));
  Tensor fused = Mlfm::fuse(taps, weights)->value;
  for (long i = 0; i < fused.size(); ++i) {
    EXPECT_NEAR(fused[i], 4.0 * (1.0 + p) * x[i], 1e-12);
  }
}

TEST(Fuse, MatchesElementwiseLoopOracle) {
  Rng rng(10);
  auto taps = random_taps(4, 5, 4, 3, rng);
  std::vector<Var> weights;
  for (int g = 0; g < 4; ++g) weights.push_back(leaf(random_tensor({5}, rng, 0.01, 0.99)));
  Tensor fused = Mlfm::fuse(taps, weights)->value;
  for (int c = 0; c < 5; ++c) {
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 3; ++x) {
        double want = 0;
        for (int g = 0; g < 4; ++g) {
          const double tap = taps[static_cast<size_t>(g)]->value.at(c, y, x);
          want += weights[static_cast<size_t>(g)]->value[c] * tap + tap;
        }
        EXPECT_NEAR(fused.at(c, y, x), want, 1e-12);
      }
    }
  }
}

TEST(Mlfm, AllZeroConvsMakeFuseExactlyOneAndAHalfTapSums) {
  Rng rng(11);
  Mlfm m("mlfm", 6, 4, true, rng);
  m.aggregate_conv.w.value().fill(0.0);
  m.aggregate_conv.b.value().fill(0.0);
  for (auto& conv : m.wd_convs) {
    conv.w.value().fill(0.0);
    conv.b.value().fill(0.0);
  }
  auto taps = random_taps(4, 6, 3, 3, rng);
  Tensor fused = m.forward(taps)->value;
  for (long i = 0; i < fused.size(); ++i) {
    double sum = 0;
    for (const auto& t : taps) sum += t->value[i];
    EXPECT_NEAR(fused[i], 1.5 * sum, 1e-12);
  }
}

TEST(Mlfm, PermutingTwoIdenticalTapsWithSharedDistributorsIsInvariant) {
  Rng rng(12);
  Mlfm m("mlfm", 6, 4, true, rng);
  // taps 1 and 2 are identical and their WD branches share weights
  m.wd_convs[2].w.value() = m.wd_convs[1].w.value();
  m.wd_convs[2].b.value() = m.wd_convs[1].b.value();
  Tensor x = random_tensor({6, 3, 3}, rng);
  Tensor y = random_tensor({6, 3, 3}, rng);
  Tensor z = random_tensor({6, 3, 3}, rng);
  std::vector<Var> taps_a = {leaf(x), leaf(y), leaf(y), leaf(z)};
  std::vector<Var> taps_b = {leaf(x), leaf(y), leaf(y), leaf(z)};
  std::swap(taps_b[1], taps_b[2]);
  EXPECT_TRUE(testutil::tensors_equal(m.forward(taps_a)->value, m.forward(taps_b)->value));
}

TEST(Mlfm, ConcatVariantEqualsAggregateBitExactly) {
  Rng rng(13);
  Mlfm m("mlfm", 8, 4, true, rng);
  auto taps = random_taps(4, 8, 4, 4, rng);
  EXPECT_TRUE(testutil::tensors_equal(m.forward_concat(taps)->value, m.aggregate(taps)->value));
}

TEST(Mlfm, ConcatOnlyModuleHasNoDistributors) {
  Rng rng(14);
  Mlfm m("mlfm", 8, 4, false, rng);
  EXPECT_TRUE(m.wd_convs.empty());
  auto taps = random_taps(4, 8, 4, 4, rng);
  EXPECT_NO_THROW(m.forward_concat(taps));
  EXPECT_THROW(m.forward(taps), std::logic_error);
}

TEST(Mlfm, GradientMatchesFiniteDifferences) {
  Rng rng(15);
  Mlfm m("mlfm", 6, 4, true, rng);
  auto taps = random_taps(4, 6, 3, 3, rng, true);
  std::vector<Var> leaves = taps;
  leaves.push_back(m.aggregate_conv.w.var);
  leaves.push_back(m.wd_convs[1].w.var);
  leaves.push_back(m.wd_convs[1].b.var);
  auto res = grad_check([&]() { return m.forward(taps); }, leaves);
  EXPECT_LT(res.max_rel_err, 1e-4);
}

}  // namespace
