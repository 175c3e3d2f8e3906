#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>

#include "data.hpp"

namespace mdsam {

// Saliency evaluation. Conventions (matching the dominant benchmark
// toolchain): ground truth binarized at 0.5; predictions min-max normalized
// per image before the 256-threshold F/E sweeps; MAE, S-measure and weighted
// F use the raw [0,1] map; beta^2 = 0.3 for the F family; images with empty
// ground truth are excluded from F/S/weighted-F aggregation and counted.

constexpr Scalar kMatlabEps = 2.220446049250313e-16;
constexpr int kThresholds = 256;

namespace metric_detail {

struct MapView {
  const Scalar* data;
  int h, w;
  long size() const { return static_cast<long>(h) * w; }
  Scalar operator[](long i) const { return data[i]; }
  Scalar at(int y, int x) const { return data[static_cast<long>(y) * w + x]; }
};

inline MapView as_map(const Tensor& t, const char* what) {
  if (t.rank() == 2) return {t.data(), t.dim(0), t.dim(1)};
  if (t.rank() == 3 && t.dim(0) == 1) return {t.data(), t.dim(1), t.dim(2)};
  throw std::invalid_argument(std::string(what) + ": expected (H,W) or (1,H,W), got " +
                              t.shape_str());
}

inline void check_pair(const MapView& p, const MapView& g, const char* what) {
  if (p.h != g.h || p.w != g.w) {
    throw std::invalid_argument(std::string(what) + ": prediction/ground-truth size mismatch");
  }
}

inline std::vector<bool> binarize(const MapView& g) {
  std::vector<bool> out(static_cast<size_t>(g.size()));
  for (long i = 0; i < g.size(); ++i) out[static_cast<size_t>(i)] = g[i] > 0.5;
  return out;
}

// Min-max normalization; untouched when the map is constant.
inline std::vector<Scalar> minmax_normalize(const MapView& p) {
  Scalar lo = p[0], hi = p[0];
  for (long i = 1; i < p.size(); ++i) {
    lo = std::min(lo, p[i]);
    hi = std::max(hi, p[i]);
  }
  std::vector<Scalar> out(static_cast<size_t>(p.size()));
  if (hi > lo) {
    for (long i = 0; i < p.size(); ++i) out[static_cast<size_t>(i)] = (p[i] - lo) / (hi - lo);
  } else {
    for (long i = 0; i < p.size(); ++i) out[static_cast<size_t>(i)] = p[i];
  }
  return out;
}

// 8-bit threshold histograms of (quantized value, gt) pairs; the basis for
// both the F sweep and the mean E-measure.
struct SweepCounts {
  std::array<long, kThresholds> pos{};  // quantized==v and gt==1
  std::array<long, kThresholds> all{};  // quantized==v
  long gt_count = 0;
  long total = 0;
};

inline SweepCounts sweep_counts(const MapView& pred, const std::vector<bool>& gt) {
  SweepCounts c;
  const std::vector<Scalar> norm = minmax_normalize(pred);
  c.total = pred.size();
  for (long i = 0; i < pred.size(); ++i) {
    int q = static_cast<int>(std::lround(norm[static_cast<size_t>(i)] * 255.0));
    q = std::min(255, std::max(0, q));
    ++c.all[static_cast<size_t>(q)];
    if (gt[static_cast<size_t>(i)]) {
      ++c.pos[static_cast<size_t>(q)];
      ++c.gt_count;
    }
  }
  return c;
}

}  // namespace metric_detail

// ---------------------------------------------------------------------------
// MAE
// ---------------------------------------------------------------------------

inline Scalar mae(const Tensor& pred, const Tensor& gt) {
  const auto p = metric_detail::as_map(pred, "mae");
  const auto g = metric_detail::as_map(gt, "mae");
  metric_detail::check_pair(p, g, "mae");
  Scalar acc = 0;
  for (long i = 0; i < p.size(); ++i) acc += std::abs(p[i] - g[i]);
  return acc / static_cast<Scalar>(p.size());
}

// ---------------------------------------------------------------------------
// F-measure threshold sweep (beta^2 = 0.3)
// ---------------------------------------------------------------------------

struct FCurve {
  std::array<Scalar, kThresholds> precision{};
  std::array<Scalar, kThresholds> recall{};
  std::array<Scalar, kThresholds> f{};
  Scalar f_max = 0;
  Scalar f_mean = 0;
};

inline FCurve f_measure_curve(const Tensor& pred, const Tensor& gt) {
  const auto p = metric_detail::as_map(pred, "f_measure_curve");
  const auto g = metric_detail::as_map(gt, "f_measure_curve");
  metric_detail::check_pair(p, g, "f_measure_curve");
  const auto gbin = metric_detail::binarize(g);
  const auto counts = metric_detail::sweep_counts(p, gbin);
  if (counts.gt_count == 0) {
    throw std::invalid_argument("f_measure_curve: ground truth has no positive pixels");
  }
  constexpr Scalar beta2 = 0.3;
  FCurve out;
  long tp = 0, predicted = 0;  // counts for quantized value > t, built from t=255 down
  for (int t = kThresholds - 1; t >= 0; --t) {
    if (t < kThresholds - 1) {
      tp += counts.pos[static_cast<size_t>(t + 1)];
      predicted += counts.all[static_cast<size_t>(t + 1)];
    }
    // t = 255 predicts nothing positive
    const Scalar prec = predicted == 0 ? 1.0 : static_cast<Scalar>(tp) / static_cast<Scalar>(predicted);
    const Scalar rec = static_cast<Scalar>(tp) / static_cast<Scalar>(counts.gt_count);
    const Scalar denom = beta2 * prec + rec;
    const Scalar f = denom > 0 ? (1 + beta2) * prec * rec / denom : 0.0;
    out.precision[static_cast<size_t>(t)] = prec;
    out.recall[static_cast<size_t>(t)] = rec;
    out.f[static_cast<size_t>(t)] = f;
  }
  Scalar sum = 0;
  for (int t = 0; t < kThresholds; ++t) {
    out.f_max = std::max(out.f_max, out.f[static_cast<size_t>(t)]);
    sum += out.f[static_cast<size_t>(t)];
  }
  out.f_mean = sum / kThresholds;
  return out;
}

// ---------------------------------------------------------------------------
// S-measure (structure measure, alpha = 0.5): object-aware similarity of
// foreground/background means plus a four-quadrant region SSIM around the
// ground-truth centroid.
// ---------------------------------------------------------------------------

namespace metric_detail {

inline Scalar object_score(const MapView& pred, const std::vector<bool>& region, bool complement) {
  long n = 0;
  Scalar sum = 0;
  for (long i = 0; i < pred.size(); ++i) {
    if (region[static_cast<size_t>(i)]) {
      sum += complement ? 1.0 - pred[i] : pred[i];
      ++n;
    }
  }
  if (n == 0) return 0;
  const Scalar x = sum / static_cast<Scalar>(n);
  Scalar ss = 0;
  if (n > 1) {
    for (long i = 0; i < pred.size(); ++i) {
      if (region[static_cast<size_t>(i)]) {
        const Scalar v = (complement ? 1.0 - pred[i] : pred[i]) - x;
        ss += v * v;
      }
    }
    ss = std::sqrt(ss / static_cast<Scalar>(n - 1));
  }
  return 2.0 * x / (x * x + 1.0 + ss + kMatlabEps);
}

// Fan's region SSIM over one quadrant [y0,y1) x [x0,x1).
inline Scalar region_ssim(const MapView& pred, const MapView& gt, int y0, int y1, int x0, int x1) {
  const long n = static_cast<long>(y1 - y0) * (x1 - x0);
  if (n <= 0) return 0;
  Scalar mx = 0, my = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      mx += pred.at(y, x);
      my += gt.at(y, x) > 0.5 ? 1.0 : 0.0;
    }
  }
  mx /= static_cast<Scalar>(n);
  my /= static_cast<Scalar>(n);
  Scalar sx = 0, sy = 0, sxy = 0;
  if (n > 1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const Scalar dp = pred.at(y, x) - mx;
        const Scalar dg = (gt.at(y, x) > 0.5 ? 1.0 : 0.0) - my;
        sx += dp * dp;
        sy += dg * dg;
        sxy += dp * dg;
      }
    }
    sx /= static_cast<Scalar>(n - 1);
    sy /= static_cast<Scalar>(n - 1);
    sxy /= static_cast<Scalar>(n - 1);
  }
  const Scalar alpha = 4.0 * mx * my * sxy;
  const Scalar beta = (mx * mx + my * my) * (sx + sy);
  if (alpha != 0) return alpha / (beta + kMatlabEps);
  return beta == 0 ? 1.0 : 0.0;
}

}  // namespace metric_detail

inline Scalar s_measure(const Tensor& pred, const Tensor& gt) {
  const auto p = metric_detail::as_map(pred, "s_measure");
  const auto g = metric_detail::as_map(gt, "s_measure");
  metric_detail::check_pair(p, g, "s_measure");
  const long n = p.size();
  long gt_count = 0;
  for (long i = 0; i < n; ++i) gt_count += g[i] > 0.5 ? 1 : 0;
  Scalar pred_mean = 0;
  for (long i = 0; i < n; ++i) pred_mean += p[i];
  pred_mean /= static_cast<Scalar>(n);
  if (gt_count == 0) return 1.0 - pred_mean;
  if (gt_count == n) return pred_mean;

  const auto region = metric_detail::binarize(g);
  std::vector<bool> background(region.size());
  for (size_t i = 0; i < region.size(); ++i) background[i] = !region[i];
  const Scalar y_frac = static_cast<Scalar>(gt_count) / static_cast<Scalar>(n);
  const Scalar s_object = y_frac * metric_detail::object_score(p, region, false) +
                          (1.0 - y_frac) * metric_detail::object_score(p, background, true);

  // 1-based centroid of the ground truth, rounded half away from zero.
  Scalar cx_acc = 0, cy_acc = 0;
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      if (g.at(y, x) > 0.5) {
        cx_acc += x + 1;
        cy_acc += y + 1;
      }
    }
  }
  const int cx = static_cast<int>(std::round(cx_acc / static_cast<Scalar>(gt_count)));
  const int cy = static_cast<int>(std::round(cy_acc / static_cast<Scalar>(gt_count)));
  const Scalar area = static_cast<Scalar>(n);
  const Scalar w1 = static_cast<Scalar>(cx) * cy / area;
  const Scalar w2 = static_cast<Scalar>(g.w - cx) * cy / area;
  const Scalar w3 = static_cast<Scalar>(cx) * (g.h - cy) / area;
  const Scalar w4 = 1.0 - w1 - w2 - w3;
  const Scalar s_region = w1 * metric_detail::region_ssim(p, g, 0, cy, 0, cx) +
                          w2 * metric_detail::region_ssim(p, g, 0, cy, cx, g.w) +
                          w3 * metric_detail::region_ssim(p, g, cy, g.h, 0, cx) +
                          w4 * metric_detail::region_ssim(p, g, cy, g.h, cx, g.w);
  return std::max(0.0, 0.5 * s_object + 0.5 * s_region);
}

// ---------------------------------------------------------------------------
// Mean E-measure: the enhanced-alignment score averaged over the benchmark
// threshold sweep (binarize at q >= t for t = 1..255, i.e. thresholds
// 1/255..1), which keeps a perfect binary prediction at exactly 1. Since both
// maps are binary at each threshold, the per-pixel enhanced matrix takes at
// most four values, so the sweep reduces to confusion counts.
// ---------------------------------------------------------------------------

inline Scalar e_measure(const Tensor& pred, const Tensor& gt) {
  const auto p = metric_detail::as_map(pred, "e_measure");
  const auto g = metric_detail::as_map(gt, "e_measure");
  metric_detail::check_pair(p, g, "e_measure");
  const auto gbin = metric_detail::binarize(g);
  const auto counts = metric_detail::sweep_counts(p, gbin);
  const Scalar n = static_cast<Scalar>(counts.total);
  const Scalar gt_pos = static_cast<Scalar>(counts.gt_count);

  Scalar total_score = 0;
  long tp = 0, predicted = 0;
  for (int t = kThresholds - 1; t >= 1; --t) {
    tp += counts.pos[static_cast<size_t>(t)];
    predicted += counts.all[static_cast<size_t>(t)];
    Scalar enhanced_sum;
    if (counts.gt_count == 0) {
      enhanced_sum = n - static_cast<Scalar>(predicted);  // 1 - FM
    } else if (counts.gt_count == counts.total) {
      enhanced_sum = static_cast<Scalar>(predicted);  // FM
    } else {
      const Scalar mu_fm = static_cast<Scalar>(predicted) / n;
      const Scalar mu_gt = gt_pos / n;
      auto enhanced = [&](Scalar fm, Scalar gv) {
        const Scalar a = fm - mu_fm, b = gv - mu_gt;
        const Scalar align = 2.0 * a * b / (a * a + b * b + kMatlabEps);
        return (align + 1.0) * (align + 1.0) / 4.0;
      };
      const Scalar n_tp = static_cast<Scalar>(tp);
      const Scalar n_fp = static_cast<Scalar>(predicted - tp);
      const Scalar n_fn = gt_pos - n_tp;
      const Scalar n_tn = n - n_tp - n_fp - n_fn;
      enhanced_sum = n_tp * enhanced(1, 1) + n_fp * enhanced(1, 0) + n_fn * enhanced(0, 1) +
                     n_tn * enhanced(0, 0);
    }
    total_score += enhanced_sum / n;  // mean over pixels
  }
  return total_score / (kThresholds - 1);
}

// ---------------------------------------------------------------------------
// Weighted F-measure (Margolin et al.): errors propagated from foreground
// through an exact Euclidean distance transform, smoothed with a 7x7
// Gaussian (sigma 5), and weighted by pixel importance decaying with the
// distance from the foreground. beta = 1.
// ---------------------------------------------------------------------------

namespace metric_detail {

// Exact EDT with nearest-site retrieval. Ties resolve to the smallest
// (x, then y) site so that independent implementations can agree.
struct EdtResult {
  std::vector<Scalar> dist;   // Euclidean distance to nearest foreground pixel
  std::vector<int> nearest;   // linear index (y*w + x) of that pixel
};

inline EdtResult edt_nearest(const std::vector<bool>& fg, int h, int w) {
  const long n = static_cast<long>(h) * w;
  constexpr Scalar kInf = 1e30;
  // Column pass: nearest foreground row within each column (ties -> smaller row).
  std::vector<Scalar> col_d2(static_cast<size_t>(n), kInf);
  std::vector<int> col_row(static_cast<size_t>(n), -1);
  for (int x = 0; x < w; ++x) {
    int last = -1;
    for (int y = 0; y < h; ++y) {  // downward: nearest fg at or above
      if (fg[static_cast<size_t>(y) * w + x]) last = y;
      if (last >= 0) {
        const Scalar d = static_cast<Scalar>(y - last);
        col_d2[static_cast<size_t>(y) * w + x] = d * d;
        col_row[static_cast<size_t>(y) * w + x] = last;
      }
    }
    last = -1;
    for (int y = h - 1; y >= 0; --y) {  // upward: nearest fg at or below
      if (fg[static_cast<size_t>(y) * w + x]) last = y;
      if (last >= 0) {
        const Scalar d = static_cast<Scalar>(last - y);
        // strict improvement keeps the smaller row on ties
        if (d * d < col_d2[static_cast<size_t>(y) * w + x]) {
          col_d2[static_cast<size_t>(y) * w + x] = d * d;
          col_row[static_cast<size_t>(y) * w + x] = last;
        }
      }
    }
  }
  // Row pass: minimize (x-x')^2 + col_d2(y,x') scanning x' ascending.
  EdtResult out;
  out.dist.assign(static_cast<size_t>(n), kInf);
  out.nearest.assign(static_cast<size_t>(n), -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Scalar best = kInf;
      int best_col = -1;
      for (int xs = 0; xs < w; ++xs) {
        const Scalar base = col_d2[static_cast<size_t>(y) * w + xs];
        if (base >= kInf) continue;
        const Scalar dx = static_cast<Scalar>(x - xs);
        const Scalar d2 = dx * dx + base;
        if (d2 < best) {
          best = d2;
          best_col = xs;
        }
      }
      if (best_col >= 0) {
        out.dist[static_cast<size_t>(y) * w + x] = std::sqrt(best);
        out.nearest[static_cast<size_t>(y) * w + x] =
            col_row[static_cast<size_t>(y) * w + best_col] * w + best_col;
      }
    }
  }
  return out;
}

inline std::vector<Scalar> gaussian7x7(const std::vector<Scalar>& src, int h, int w) {
  constexpr int kR = 3;
  constexpr Scalar sigma = 5.0;
  std::array<Scalar, 49> kernel{};
  Scalar ksum = 0;
  for (int dy = -kR; dy <= kR; ++dy) {
    for (int dx = -kR; dx <= kR; ++dx) {
      const Scalar v = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
      kernel[static_cast<size_t>((dy + kR) * 7 + dx + kR)] = v;
      ksum += v;
    }
  }
  for (auto& v : kernel) v /= ksum;
  std::vector<Scalar> out(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Scalar acc = 0;
      for (int dy = -kR; dy <= kR; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;  // zero padding
        for (int dx = -kR; dx <= kR; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          acc += kernel[static_cast<size_t>((dy + kR) * 7 + dx + kR)] *
                 src[static_cast<size_t>(yy) * w + xx];
        }
      }
      out[static_cast<size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

}  // namespace metric_detail

inline Scalar weighted_f(const Tensor& pred, const Tensor& gt) {
  const auto p = metric_detail::as_map(pred, "weighted_f");
  const auto g = metric_detail::as_map(gt, "weighted_f");
  metric_detail::check_pair(p, g, "weighted_f");
  const auto fg = metric_detail::binarize(g);
  const long n = p.size();
  long fg_count = 0;
  for (bool b : fg) fg_count += b ? 1 : 0;
  if (fg_count == 0) {
    throw std::invalid_argument("weighted_f: ground truth has no positive pixels");
  }

  std::vector<Scalar> err(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    err[static_cast<size_t>(i)] = std::abs(p[i] - (fg[static_cast<size_t>(i)] ? 1.0 : 0.0));
  }
  const auto edt = metric_detail::edt_nearest(fg, p.h, p.w);
  std::vector<Scalar> err_t = err;
  for (long i = 0; i < n; ++i) {
    if (!fg[static_cast<size_t>(i)]) {
      err_t[static_cast<size_t>(i)] = err[static_cast<size_t>(edt.nearest[static_cast<size_t>(i)])];
    }
  }
  const std::vector<Scalar> ea = metric_detail::gaussian7x7(err_t, p.h, p.w);
  Scalar ew_fg_sum = 0, ew_bg_sum = 0;
  for (long i = 0; i < n; ++i) {
    const size_t s = static_cast<size_t>(i);
    Scalar min_e = err[s];
    if (fg[s] && ea[s] < err[s]) min_e = ea[s];
    const Scalar b = fg[s] ? 1.0 : 2.0 - std::exp(std::log(0.5) / 5.0 * edt.dist[s]);
    const Scalar ew = min_e * b;
    if (fg[s]) ew_fg_sum += ew;
    else ew_bg_sum += ew;
  }
  const Scalar tpw = static_cast<Scalar>(fg_count) - ew_fg_sum;
  const Scalar fpw = ew_bg_sum;
  const Scalar recall = 1.0 - ew_fg_sum / static_cast<Scalar>(fg_count);
  const Scalar precision = tpw / (kMatlabEps + tpw + fpw);
  return 2.0 * recall * precision / (kMatlabEps + recall + precision);
}

// ---------------------------------------------------------------------------
// Dataset evaluation
// ---------------------------------------------------------------------------

struct PerImageMetrics {
  std::string id;
  Scalar mae = 0, f_max = 0, f_mean = 0, s = 0, e = 0, wf = 0;
  bool empty_gt = false;
  FCurve curve;
};

struct MetricReport {
  std::vector<PerImageMetrics> per_image;
  Scalar mae = 0, f_max = 0, f_mean = 0, s = 0, e = 0, wf = 0;  // dataset means
  std::array<Scalar, kThresholds> precision{}, recall{}, f{};   // mean curves
  int evaluated = 0;
  int empty_gt_count = 0;
  std::vector<std::string> unmatched;  // stems present on only one side
};

inline PerImageMetrics evaluate_pair(const Tensor& pred, const Tensor& gt, const std::string& id) {
  PerImageMetrics m;
  m.id = id;
  m.mae = mae(pred, gt);
  m.e = e_measure(pred, gt);
  const auto g = metric_detail::as_map(gt, "evaluate_pair");
  long fg = 0;
  for (long i = 0; i < g.size(); ++i) fg += g[i] > 0.5 ? 1 : 0;
  if (fg == 0) {
    m.empty_gt = true;
    return m;
  }
  m.curve = f_measure_curve(pred, gt);
  m.f_max = m.curve.f_max;
  m.f_mean = m.curve.f_mean;
  m.s = s_measure(pred, gt);
  m.wf = weighted_f(pred, gt);
  return m;
}

// Pairs prediction and ground-truth files by stem, evaluates every matched
// pair (prediction bilinearly resized to the mask resolution when they
// differ), and aggregates dataset means plus mean P/R/F curves.
inline MetricReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir) {
  const auto preds = list_by_stem(pred_dir);
  const auto gts = list_by_stem(gt_dir);
  MetricReport report;
  std::vector<std::pair<std::string, std::pair<std::string, std::string>>> matched;
  for (const auto& [stem, path] : preds) {
    const auto it = gts.find(stem);
    if (it == gts.end()) report.unmatched.push_back(stem + " (prediction only)");
    else matched.push_back({stem, {path, it->second}});
  }
  for (const auto& [stem, path] : gts) {
    if (!preds.count(stem)) report.unmatched.push_back(stem + " (ground truth only)");
  }
  if (matched.empty()) {
    throw std::runtime_error("evaluate_dataset: no matching prediction/ground-truth stems");
  }

  report.per_image.resize(matched.size());
  const unsigned workers =
      std::max(1u, std::min(std::thread::hardware_concurrency(),
                            static_cast<unsigned>(matched.size())));
  std::vector<std::thread> pool;
  std::atomic<size_t> cursor{0};
  std::vector<std::string> failures(matched.size());
  for (unsigned wi = 0; wi < workers; ++wi) {
    pool.emplace_back([&]() {
      while (true) {
        const size_t i = cursor.fetch_add(1);
        if (i >= matched.size()) break;
        try {
          Tensor gt = load_mask_tensor(matched[i].second.second, 0);
          Tensor pred = load_saliency(matched[i].second.first);
          if (pred.dim(1) != gt.dim(1) || pred.dim(2) != gt.dim(2)) {
            pred = bilinear_resize_tensor(pred, gt.dim(1), gt.dim(2));
          }
          report.per_image[i] = evaluate_pair(pred, gt, matched[i].first);
        } catch (const std::exception& e) {
          failures[i] = e.what();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) {
      throw std::runtime_error("evaluate_dataset: " + matched[i].first + ": " + failures[i]);
    }
  }

  int scored = 0;
  for (const auto& m : report.per_image) {
    ++report.evaluated;
    report.mae += m.mae;
    report.e += m.e;
    if (m.empty_gt) {
      ++report.empty_gt_count;
      continue;
    }
    ++scored;
    report.f_max += m.f_max;
    report.f_mean += m.f_mean;
    report.s += m.s;
    report.wf += m.wf;
    for (int t = 0; t < kThresholds; ++t) {
      report.precision[static_cast<size_t>(t)] += m.curve.precision[static_cast<size_t>(t)];
      report.recall[static_cast<size_t>(t)] += m.curve.recall[static_cast<size_t>(t)];
      report.f[static_cast<size_t>(t)] += m.curve.f[static_cast<size_t>(t)];
    }
  }
  if (report.evaluated > 0) {
    report.mae /= report.evaluated;
    report.e /= report.evaluated;
  }
  if (scored > 0) {
    report.f_max /= scored;
    report.f_mean /= scored;
    report.s /= scored;
    report.wf /= scored;
    for (int t = 0; t < kThresholds; ++t) {
      report.precision[static_cast<size_t>(t)] /= scored;
      report.recall[static_cast<size_t>(t)] /= scored;
      report.f[static_cast<size_t>(t)] /= scored;
    }
  }
  return report;
}

}  // namespace mdsam
