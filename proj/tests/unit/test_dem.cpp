#include <gtest/gtest.h>

#include "mdsam/dem.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mdsam;
using testutil::grad_check;
using testutil::random_tensor;

namespace {

DemConfig toy_dem() {
  DemConfig d;
  d.channels = 4;
  d.re_channels = 8;
  d.up_channels = 4;
  return d;
}

// Straight-line loop reimplementation of the edge enhancer, reading the
// module's weights.
Tensor edge_enhance_oracle(EdgeEnhancer& ee, const Tensor& f) {
  Tensor pooled = oracle::avg_pool3x3(f);
  Tensor edge = f;
  for (long i = 0; i < edge.size(); ++i) edge[i] -= pooled[i];
  Tensor projected = oracle::conv1x1(edge, ee.proj.conv.w.value(), ee.proj.conv.b.value());
  Tensor activated = oracle::bn_sigmoid(projected, ee.proj.bn.gamma.value(), ee.proj.bn.beta.value());
  return oracle::add(activated, f);
}

// Straight-line loop reimplementation of the full multi-scale edge module.
Tensor meem_oracle(Meem& m, const Tensor& f_local) {
  Tensor level = oracle::gelu(
      oracle::conv1x1(f_local, m.entry.conv.w.value(), m.entry.conv.b.value()));
  std::vector<Tensor> parts = {level};
  for (int t = 0; t < Meem::kLevels; ++t) {
    Tensor pre = oracle::bn_sigmoid(
        oracle::conv1x1(level, m.pyramid[t].conv.w.value(), m.pyramid[t].conv.b.value()),
        m.pyramid[t].bn.gamma.value(), m.pyramid[t].bn.beta.value());
    level = oracle::avg_pool3x3(pre);
    parts.push_back(edge_enhance_oracle(m.enhancers[t], level));
  }
  return oracle::gelu(
      oracle::conv1x1(oracle::concat(parts), m.fuse.conv.w.value(), m.fuse.conv.b.value()));
}

TEST(EdgeEnhancer, ConstantInputHasZeroEdgeResponse) {
  // pad-exclusive averaging: for a dyadic constant the window means are
  // exact in floating point, so the residual is exactly zero everywhere
  Tensor f = Tensor::full({3, 6, 6}, 0.5);
  Var edge = sub(leaf(f), avg_pool3x3_same(leaf(f)));
  for (long i = 0; i < edge->value.size(); ++i) EXPECT_DOUBLE_EQ(edge->value[i], 0.0);
  // arbitrary constants are zero up to one rounding ulp
  Tensor g = Tensor::full({2, 5, 7}, 1.7);
  Var edge2 = sub(leaf(g), avg_pool3x3_same(leaf(g)));
  for (long i = 0; i < edge2->value.size(); ++i) EXPECT_NEAR(edge2->value[i], 0.0, 1e-15);
}

TEST(EdgeEnhancer, ImpulseGivesPositiveCenterNegativeRing) {
  Tensor f = Tensor::zeros({1, 7, 7});
  f.at(0, 3, 3) = 1.0;
  Var edge = sub(leaf(f), avg_pool3x3_same(leaf(f)));
  EXPECT_GT(edge->value.at(0, 3, 3), 0.0);  // 1 - 1/9
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dy == 0 && dx == 0) continue;
      EXPECT_LT(edge->value.at(0, 3 + dy, 3 + dx), 0.0);
    }
  }
  // cross-check against the loop oracle
  Tensor want = oracle::avg_pool3x3(f);
  for (long i = 0; i < f.size(); ++i) {
    EXPECT_NEAR(edge->value[i], f[i] - want[i], 1e-12);
  }
}

TEST(EdgeEnhancer, OutputMinusInputStaysInSigmoidRange) {
  Rng rng(1);
  EdgeEnhancer ee("ee", 3, rng);
  Tensor f = random_tensor({3, 6, 6}, rng, -2.0, 2.0);
  Tensor out = ee.forward(leaf(f), true)->value;
  for (long i = 0; i < out.size(); ++i) {
    const double delta = out[i] - f[i];
    EXPECT_GT(delta, 0.0);
    EXPECT_LT(delta, 1.0);
  }
}

TEST(EdgeEnhancer, MatchesLoopOracle) {
  Rng rng(2);
  EdgeEnhancer ee("ee", 3, rng);
  Tensor f = random_tensor({3, 8, 8}, rng);
  Tensor got = ee.forward(leaf(f), true)->value;
  Tensor want = edge_enhance_oracle(ee, f);
  EXPECT_LT(testutil::max_abs_diff(got, want), 1e-6);
}

TEST(EdgeEnhancer, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  EdgeEnhancer ee("ee", 3, rng);
  Var f = leaf(random_tensor({3, 6, 6}, rng), true);
  auto res = grad_check([&]() { return ee.forward(f, true); },
                        {f, ee.proj.conv.w.var, ee.proj.bn.gamma.var, ee.proj.bn.beta.var});
  EXPECT_LT(res.max_rel_err, 1e-4);
}

TEST(Meem, OutputShapeAndResolutionPreserved) {
  Rng rng(4);
  Meem m("meem", 4, rng);
  Tensor f = random_tensor({4, 8, 8}, rng);
  Tensor out = m.forward(leaf(f), true)->value;
  EXPECT_EQ(out.shape(), (std::vector<int>{4, 8, 8}));
  EXPECT_EQ(Meem::kLevels, 3);  // pyramid members: entry level plus three pooled levels
  EXPECT_EQ(m.fuse.conv.w.value().dim(1), 4 * 4);
}

TEST(Meem, MatchesStraightLineLoopOracle) {
  Rng rng(5);
  Meem m("meem", 4, rng);
  Tensor f = random_tensor({4, 8, 8}, rng);
  Tensor got = m.forward(leaf(f), true)->value;
  Tensor want = meem_oracle(m, f);
  EXPECT_LT(testutil::max_abs_diff(got, want), 1e-6);
}

TEST(Meem, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  Meem m("meem", 3, rng);
  Var f = leaf(random_tensor({3, 6, 6}, rng), true);
  auto res = grad_check([&]() { return m.forward(f, true); },
                        {f, m.entry.conv.w.var, m.pyramid[1].conv.w.var,
                         m.enhancers[0].proj.conv.w.var, m.fuse.conv.w.var});
  EXPECT_LT(res.max_rel_err, 1e-4);
}

TEST(Dem, PrimaryBranchShapesAndZeroPropagation) {
  Rng rng(7);
  Dem dem("dem", 8, 4, toy_dem(), rng);
  Var f_m = leaf(random_tensor({4, 8, 8}, rng));
  Var f_d = leaf(random_tensor({4, 8, 8}, rng));
  auto [f_re, f_up] = dem.primary_branch(f_m, f_d, true);
  EXPECT_EQ(f_re->value.shape(), (std::vector<int>{8, 8, 8}));
  EXPECT_EQ(f_up->value.shape(), (std::vector<int>{4, 32, 32}));

  // all-zero inputs, zero conv biases, BN eval with fresh (zero-mean,
  // unit-variance) running stats on an untouched module
  Rng rng_fresh(77);
  Dem fresh("dem", 8, 4, toy_dem(), rng_fresh);
  fresh.re_conv.b.value().fill(0.0);
  fresh.up_conv1.conv.b.value().fill(0.0);
  fresh.up_conv2.conv.b.value().fill(0.0);
  auto [zre, zup] = fresh.primary_branch(leaf(Tensor::zeros({4, 8, 8})),
                                         leaf(Tensor::zeros({4, 8, 8})), false);
  for (long i = 0; i < zup->value.size(); ++i) EXPECT_DOUBLE_EQ(zup->value[i], 0.0);
  EXPECT_THROW(dem.primary_branch(f_m, leaf(Tensor::zeros({4, 4, 8})), true),
               std::invalid_argument);
}

TEST(Dem, LocalExtractContract) {
  Rng rng(8);
  Dem dem("dem", 8, 4, toy_dem(), rng);
  Var img = leaf(random_tensor({3, 16, 16}, rng), true);
  Var local = dem.local_extract(img, true);
  EXPECT_EQ(local->value.shape(), (std::vector<int>{4, 16, 16}));
  backward(mean_all(local));
  double g = 0;
  for (long i = 0; i < img->grad.size(); ++i) g += std::abs(img->grad[i]);
  EXPECT_GT(g, 0.0);
}

TEST(Dem, ForwardShapesAtInputResolution) {
  Rng rng(9);
  for (int size : {32, 48, 64}) {
    Dem dem("dem", 8, 4, toy_dem(), rng);
    Var img = leaf(random_tensor({3, size, size}, rng));
    Var f_m = leaf(random_tensor({4, size / 4, size / 4}, rng));
    Var enc = leaf(random_tensor({8, size / 16, size / 16}, rng));
    DemOutput out = dem.forward(img, f_m, enc, true);
    EXPECT_EQ(out.s_f->value.shape(), (std::vector<int>{1, size, size}));
    EXPECT_TRUE(out.s_f->value.all_finite());
    EXPECT_EQ(out.f_de->value.dim(0), dem.cfg.up_channels + dem.cfg.channels);
  }
}

TEST(Dem, NoMeemVariantEqualsFullWithZeroedMeem) {
  Rng rng(10);
  DemConfig full_cfg = toy_dem();
  Dem full("dem", 8, 4, full_cfg, rng);
  DemConfig no_cfg = toy_dem();
  no_cfg.mode = DemMode::NoMeem;
  Rng rng2(11);
  Dem stripped("dem", 8, 4, no_cfg, rng2);
  // align every shared (non-meem) parameter, then zero the meem stack
  ParamCollector pf, ps;
  full.collect(pf);
  stripped.collect(ps);
  for (Param* dst : ps.params) {
    for (Param* src : pf.params) {
      if (src->name == dst->name) dst->value() = src->value();
    }
  }
  for (BufferState* dst : ps.buffers) {
    for (BufferState* src : pf.buffers) {
      if (src->name == dst->name) dst->value = src->value;
    }
  }
  for (Param* p : pf.params) {
    if (p->name.find(".meem.") != std::string::npos) p->value().fill(0.0);
  }
  Rng rng3(12);
  Tensor img = random_tensor({3, 32, 32}, rng3);
  Tensor f_m = random_tensor({4, 8, 8}, rng3);
  Tensor enc = random_tensor({8, 2, 2}, rng3);
  // eval mode so zeroed BN running stats do not re-normalize the zeros away
  Tensor a = full.forward(leaf(img), leaf(f_m), leaf(enc), false).s_f->value;
  Tensor b = stripped.forward(leaf(img), leaf(f_m), leaf(enc), false).s_f->value;
  EXPECT_LT(testutil::max_abs_diff(a, b), 1e-12);
}

TEST(Dem, OffModeIsRejectedByForward) {
  Rng rng(13);
  DemConfig cfg = toy_dem();
  Dem dem("dem", 8, 4, cfg, rng);
  dem.cfg.mode = DemMode::Off;
  EXPECT_THROW(dem.forward(leaf(Tensor::zeros({3, 32, 32})), leaf(Tensor::zeros({4, 8, 8})),
                           leaf(Tensor::zeros({8, 2, 2})), true),
               std::logic_error);
}

TEST(Dem, GradientThroughBothBranchesMatchesFiniteDifferences) {
  Rng rng(14);
  DemConfig cfg;
  cfg.channels = 3;
  cfg.re_channels = 4;
  cfg.up_channels = 3;
  Dem dem("dem", 4, 2, cfg, rng);
  Var img = leaf(random_tensor({3, 16, 16}, rng), true);
  Var f_m = leaf(random_tensor({2, 4, 4}, rng), true);
  Var enc = leaf(random_tensor({4, 1, 1}, rng), true);
  auto res = grad_check([&]() { return dem.forward(img, f_m, enc, true).s_f; }, {img, f_m, enc});
  EXPECT_LT(res.max_rel_err, 1e-4);
  // nonzero gradient reaches the image through both branches
  img->zero_grad();
  backward(mean_all(dem.forward(img, f_m, enc, true).s_f));
  double g = 0;
  for (long i = 0; i < img->grad.size(); ++i) g += std::abs(img->grad[i]);
  EXPECT_GT(g, 0.0);
}

TEST(Dem, MismatchedMaskFeatureResolutionRejected) {
  Rng rng(15);
  Dem dem("dem", 8, 4, toy_dem(), rng);
  EXPECT_THROW(dem.forward(leaf(Tensor::zeros({3, 32, 32})), leaf(Tensor::zeros({4, 4, 4})),
                           leaf(Tensor::zeros({8, 2, 2})), true),
               std::invalid_argument);
}

}  // namespace
