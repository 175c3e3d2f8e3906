#include <gtest/gtest.h>

#include <filesystem>

#include "mdsam/metrics.hpp"
#include "mdsam/report.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mdsam;
using testutil::random_tensor;

namespace fs = std::filesystem;

namespace {

Tensor interior_mask(int h, int w, int margin, Rng& rng, double p = 0.4) {
  Tensor m = Tensor::zeros({1, h, w});
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      m.at(0, y, x) = rng.bernoulli(p) ? 1.0 : 0.0;
    }
  }
  return m;
}

Tensor nonempty_mask(int h, int w, Rng& rng, double p = 0.5) {
  while (true) {
    Tensor m = testutil::random_binary_mask({1, h, w}, rng, p);
    long fg = 0;
    for (long i = 0; i < m.size(); ++i) fg += m[i] > 0.5 ? 1 : 0;
    if (fg > 0 && fg < m.size()) return m;
  }
}

TEST(Mae, KnownValues) {
  Tensor a = Tensor::full({1, 4, 4}, 1.0);
  Tensor z = Tensor::zeros({1, 4, 4});
  EXPECT_DOUBLE_EQ(mae(a, a), 0.0);
  EXPECT_DOUBLE_EQ(mae(a, z), 1.0);
  Tensor pred = Tensor::zeros({1, 2, 2});
  pred.at(0, 0, 0) = 1.0;
  Tensor gt = Tensor::zeros({1, 2, 2});
  gt.at(0, 0, 0) = 1.0;
  gt.at(0, 0, 1) = 1.0;
  EXPECT_DOUBLE_EQ(mae(pred, gt), 0.25);
}

TEST(Mae, ComplementSymmetry) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor p = random_tensor({1, 9, 7}, rng, 0.0, 1.0);
    Tensor g = testutil::random_binary_mask({1, 9, 7}, rng);
    Tensor pc = p, gc = g;
    for (long i = 0; i < p.size(); ++i) {
      pc[i] = 1.0 - pc[i];
      gc[i] = 1.0 - gc[i];
    }
    EXPECT_NEAR(mae(p, g), mae(pc, gc), 1e-12);
  }
}

TEST(FCurve, PerfectBinaryPredictionHitsOne) {
  Rng rng(2);
  Tensor gt = nonempty_mask(16, 16, rng);
  FCurve c = f_measure_curve(gt, gt);
  EXPECT_DOUBLE_EQ(c.f_max, 1.0);
}

TEST(FCurve, UniformHalfAgainstHalfPositives) {
  Tensor pred = Tensor::full({1, 16, 16}, 0.5);
  Tensor gt = Tensor::zeros({1, 16, 16});
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 8; ++x) gt.at(0, y, x) = 1.0;  // half the pixels positive
  }
  FCurve c = f_measure_curve(pred, gt);
  // P=0.5, R=1 below the quantized value; F = 1.3*0.5/(0.3*0.5+1)
  EXPECT_NEAR(c.f_max, 0.5652, 2e-4);
  EXPECT_NEAR(c.f_max, 1.3 * 0.5 / 1.15, 1e-12);
}

TEST(FCurve, MaxDominatesMeanAndBothNonNegative) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor p = random_tensor({1, 12, 12}, rng, 0.0, 1.0);
    Tensor g = nonempty_mask(12, 12, rng);
    FCurve c = f_measure_curve(p, g);
    EXPECT_GE(c.f_max, c.f_mean);
    EXPECT_GE(c.f_mean, 0.0);
  }
}

TEST(FCurve, EmptyGroundTruthRejected) {
  Rng rng(4);
  EXPECT_THROW(f_measure_curve(random_tensor({1, 8, 8}, rng, 0.0, 1.0), Tensor::zeros({1, 8, 8})),
               std::invalid_argument);
}

TEST(SMeasure, KnownCases) {
  Rng rng(5);
  Tensor gt = nonempty_mask(16, 16, rng);
  EXPECT_NEAR(s_measure(gt, gt), 1.0, 1e-9);
  // uniform prediction at the gt mean against structured gt scores below 1
  double mean = 0;
  for (long i = 0; i < gt.size(); ++i) mean += gt[i];
  mean /= gt.size();
  Tensor uniform = Tensor::full({1, 16, 16}, mean);
  EXPECT_LT(s_measure(uniform, gt), 1.0);
  // degenerate gt conventions
  EXPECT_NEAR(s_measure(Tensor::full({1, 4, 4}, 0.3), Tensor::zeros({1, 4, 4})), 0.7, 1e-12);
  EXPECT_NEAR(s_measure(Tensor::full({1, 4, 4}, 0.3), Tensor::full({1, 4, 4}, 1.0)), 0.3, 1e-12);
}

TEST(EMeasure, KnownCases) {
  Rng rng(6);
  Tensor gt = nonempty_mask(16, 16, rng);
  EXPECT_NEAR(e_measure(gt, gt), 1.0, 1e-9);
  Tensor complement = gt;
  for (long i = 0; i < gt.size(); ++i) complement[i] = 1.0 - complement[i];
  EXPECT_LT(e_measure(complement, gt), 0.25);
}

TEST(WeightedF, KnownCases) {
  Rng rng(7);
  Tensor gt = interior_mask(16, 16, 4, rng);
  long fg = 0;
  for (long i = 0; i < gt.size(); ++i) fg += gt[i] > 0.5 ? 1 : 0;
  ASSERT_GT(fg, 0);
  EXPECT_NEAR(weighted_f(gt, gt), 1.0, 1e-9);
  // all-zero prediction with a fully interior object scores exactly zero
  EXPECT_DOUBLE_EQ(weighted_f(Tensor::zeros({1, 16, 16}), gt), 0.0);
  EXPECT_THROW(weighted_f(Tensor::zeros({1, 8, 8}), Tensor::zeros({1, 8, 8})),
               std::invalid_argument);
}

TEST(WeightedF, DistanceTransformTieBreaksMatchOracle) {
  // pixel (0,0) is equidistant (d^2 = 25) from foreground at (y=3,x=4) and
  // (y=5,x=0); both sides must copy the error of the same site
  Tensor gt = Tensor::zeros({1, 8, 8});
  gt.at(0, 3, 4) = 1.0;
  gt.at(0, 5, 0) = 1.0;
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor pred = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
    pred.at(0, 3, 4) = 0.9;  // very different errors at the two tied sites
    pred.at(0, 5, 0) = 0.1;
    EXPECT_NEAR(weighted_f(pred, gt), oracle::weighted_f(pred, gt), 1e-12);
  }
}

TEST(Oracles, AllMetricsMatchIndependentReferences) {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor pred = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
    Tensor gt = nonempty_mask(16, 16, rng);

    EXPECT_NEAR(mae(pred, gt), oracle::mae(pred, gt), 1e-6);
    FCurve mine = f_measure_curve(pred, gt);
    oracle::FSweep want = oracle::f_sweep(pred, gt);
    EXPECT_NEAR(mine.f_max, want.f_max, 1e-6);
    EXPECT_NEAR(mine.f_mean, want.f_mean, 1e-6);
    for (int t = 0; t < 256; t += 17) {
      EXPECT_NEAR(mine.precision[static_cast<size_t>(t)], want.precision[static_cast<size_t>(t)],
                  1e-6);
      EXPECT_NEAR(mine.recall[static_cast<size_t>(t)], want.recall[static_cast<size_t>(t)], 1e-6);
      EXPECT_NEAR(mine.f[static_cast<size_t>(t)], want.f[static_cast<size_t>(t)], 1e-6);
    }
    EXPECT_NEAR(s_measure(pred, gt), oracle::s_measure(pred, gt), 1e-6);
    EXPECT_NEAR(e_measure(pred, gt), oracle::e_measure(pred, gt), 1e-6);
    EXPECT_NEAR(weighted_f(pred, gt), oracle::weighted_f(pred, gt), 1e-6);
  }
}

TEST(EvaluateDataset, PerfectPredictionsToyDirectory) {
  Rng rng(9);
  const fs::path dir = fs::temp_directory_path() / "mdsam_eval_perfect";
  fs::remove_all(dir);
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  for (int i = 0; i < 3; ++i) {
    Tensor gt = nonempty_mask(16, 16, rng);
    save_saliency(gt, (dir / "gt" / ("img" + std::to_string(i) + ".pgm")).string());
    save_saliency(gt, (dir / "pred" / ("img" + std::to_string(i) + ".pgm")).string());
  }
  MetricReport report = evaluate_dataset((dir / "pred").string(), (dir / "gt").string());
  EXPECT_EQ(report.evaluated, 3);
  EXPECT_NEAR(report.mae, 0.0, 1e-12);
  EXPECT_NEAR(report.f_max, 1.0, 1e-12);
  EXPECT_NEAR(report.s, 1.0, 1e-9);
  EXPECT_NEAR(report.e, 1.0, 1e-9);
  fs::remove_all(dir);
}

TEST(EvaluateDataset, AggregateIsMeanOfPerImageValues) {
  Rng rng(10);
  const fs::path dir = fs::temp_directory_path() / "mdsam_eval_mean";
  fs::remove_all(dir);
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  std::vector<Tensor> preds, gts;
  for (int i = 0; i < 3; ++i) {
    Tensor gt = nonempty_mask(16, 16, rng);
    Tensor pred = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
    save_saliency(gt, (dir / "gt" / ("img" + std::to_string(i) + ".pgm")).string());
    save_saliency(pred, (dir / "pred" / ("img" + std::to_string(i) + ".pgm")).string());
    // quantized values are what the evaluator will see
    preds.push_back(load_saliency((dir / "pred" / ("img" + std::to_string(i) + ".pgm")).string()));
    gts.push_back(load_mask_tensor((dir / "gt" / ("img" + std::to_string(i) + ".pgm")).string(), 0));
  }
  MetricReport report = evaluate_dataset((dir / "pred").string(), (dir / "gt").string());
  double want_mae = 0, want_fmax = 0;
  for (int i = 0; i < 3; ++i) {
    want_mae += mae(preds[static_cast<size_t>(i)], gts[static_cast<size_t>(i)]);
    want_fmax += f_measure_curve(preds[static_cast<size_t>(i)], gts[static_cast<size_t>(i)]).f_max;
  }
  EXPECT_NEAR(report.mae, want_mae / 3.0, 1e-9);
  EXPECT_NEAR(report.f_max, want_fmax / 3.0, 1e-9);
  fs::remove_all(dir);
}

TEST(EvaluateDataset, UnmatchedStemsWarnAndEmptyIntersectionThrows) {
  Rng rng(11);
  const fs::path dir = fs::temp_directory_path() / "mdsam_eval_unmatched";
  fs::remove_all(dir);
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  Tensor gt = nonempty_mask(16, 16, rng);
  save_saliency(gt, (dir / "gt" / "a.pgm").string());
  save_saliency(gt, (dir / "pred" / "a.pgm").string());
  save_saliency(gt, (dir / "pred" / "only_pred.pgm").string());
  save_saliency(gt, (dir / "gt" / "only_gt.pgm").string());
  MetricReport report = evaluate_dataset((dir / "pred").string(), (dir / "gt").string());
  EXPECT_EQ(report.evaluated, 1);
  EXPECT_EQ(report.unmatched.size(), 2u);

  fs::remove_all(dir / "gt");
  fs::create_directories(dir / "gt");
  save_saliency(gt, (dir / "gt" / "zzz.pgm").string());
  EXPECT_THROW(evaluate_dataset((dir / "pred").string(), (dir / "gt").string()),
               std::runtime_error);
  fs::remove_all(dir);
}

TEST(EvaluateDataset, EmptyGtExcludedFromFAndSAggregation) {
  Rng rng(12);
  const fs::path dir = fs::temp_directory_path() / "mdsam_eval_emptygt";
  fs::remove_all(dir);
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  Tensor gt = nonempty_mask(16, 16, rng);
  save_saliency(gt, (dir / "gt" / "a.pgm").string());
  save_saliency(gt, (dir / "pred" / "a.pgm").string());
  save_saliency(Tensor::zeros({1, 16, 16}), (dir / "gt" / "empty.pgm").string());
  save_saliency(Tensor::zeros({1, 16, 16}), (dir / "pred" / "empty.pgm").string());
  MetricReport report = evaluate_dataset((dir / "pred").string(), (dir / "gt").string());
  EXPECT_EQ(report.evaluated, 2);
  EXPECT_EQ(report.empty_gt_count, 1);
  EXPECT_NEAR(report.f_max, 1.0, 1e-12);  // only the non-empty image contributes
  fs::remove_all(dir);
}

TEST(ReportCsv, RoundTripsThroughDisk) {
  Rng rng(13);
  const fs::path dir = fs::temp_directory_path() / "mdsam_report_csv";
  fs::remove_all(dir);
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  for (int i = 0; i < 2; ++i) {
    Tensor gt = nonempty_mask(16, 16, rng);
    save_saliency(gt, (dir / "gt" / ("x" + std::to_string(i) + ".pgm")).string());
    save_saliency(random_tensor({1, 16, 16}, rng, 0.0, 1.0),
                  (dir / "pred" / ("x" + std::to_string(i) + ".pgm")).string());
  }
  MetricReport report = evaluate_dataset((dir / "pred").string(), (dir / "gt").string());
  write_metric_report_csv(report, (dir / "report.csv").string(), 0xabcdef);
  write_curves_csv(report, (dir / "curves.csv").string(), 0xabcdef);
  MetricReport loaded = read_metric_report_csv((dir / "report.csv").string());
  EXPECT_EQ(loaded.evaluated, report.evaluated);
  EXPECT_NEAR(loaded.mae, report.mae, 1e-9);
  EXPECT_NEAR(loaded.f_max, report.f_max, 1e-9);
  CurveTable curves = read_curves_csv((dir / "curves.csv").string());
  EXPECT_EQ(curves.threshold.size(), 256u);
  EXPECT_NEAR(curves.f[10], report.f[10], 1e-9);
  fs::remove_all(dir);
}

}  // namespace
