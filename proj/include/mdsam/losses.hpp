#pragma once

#include "core/image_ops.hpp"

namespace mdsam {

// Training objective: BCE + soft IoU + L1, applied in probability space.
// The model emits logits; sigmoid is applied at the loss boundary.

namespace detail {

inline void check_pair(const Var& pred, const Var& gt, const char* what) {
  check_same_shape(pred->value, gt->value, what);
  for (long i = 0; i < gt->value.size(); ++i) {
    const Scalar g = gt->value[i];
    if (g != 0.0 && g != 1.0) {
      throw std::invalid_argument(std::string(what) + ": ground truth must be binary");
    }
  }
}

}  // namespace detail

constexpr Scalar kBceEps = 1e-7;

// Mean of -[g log p + (1-g) log(1-p)] with p clamped to [eps, 1-eps].
inline Var bce_loss(const Var& pred, const Var& gt) {
  detail::check_pair(pred, gt, "bce_loss");
  Var p = clamp(pred, kBceEps, 1.0 - kBceEps);
  Var one = constant(Tensor::full(pred->value.shape(), 1.0));
  Var pos = mul(gt, log_op(p));
  Var neg = mul(sub(one, gt), log_op(sub(one, p)));
  return mul_scalar(mean_all(add(pos, neg)), -1.0);
}

// Soft IoU with +1 smoothing: 1 - (sum(p*g)+1) / (sum(p)+sum(g)-sum(p*g)+1),
// computed per image; batch averaging is the caller's job.
inline Var iou_loss(const Var& pred, const Var& gt) {
  detail::check_pair(pred, gt, "iou_loss");
  Var inter = sum_all(mul(pred, gt));
  Var uni = sub(add(sum_all(pred), sum_all(gt)), inter);
  Var ratio = divide(add_scalar(inter, 1.0), add_scalar(uni, 1.0));
  return add_scalar(mul_scalar(ratio, -1.0), 1.0);
}

// Mean absolute error.
inline Var l1_loss(const Var& pred, const Var& gt) {
  detail::check_pair(pred, gt, "l1_loss");
  return mean_all(abs_op(sub(pred, gt)));
}

// Unweighted sum of the three terms.
inline Var composite_loss(const Var& pred, const Var& gt) {
  return add(add(bce_loss(pred, gt), iou_loss(pred, gt)), l1_loss(pred, gt));
}

struct LossBreakdown {
  Var value;  // differentiable total
  Scalar bce_f = 0, iou_f = 0, l1_f = 0;
  Scalar bce_m = 0, iou_m = 0, l1_m = 0;
  Scalar total = 0;
};

// Dual-output objective: composite(sigmoid(s_f)) + composite(sigmoid(up(s_m))).
// s_m logits are bilinearly upsampled to the ground-truth resolution first.
// Passing a null s_m (single-output ablations) reduces to the s_f term.
inline LossBreakdown total_loss(const Var& s_f_logits, const Var& s_m_logits, const Var& gt) {
  const int gh = gt->value.dim(1), gw = gt->value.dim(2);
  if (s_f_logits->value.dim(1) != gh || s_f_logits->value.dim(2) != gw) {
    throw std::invalid_argument("total_loss: s_f resolution " + s_f_logits->value.shape_str() +
                                " does not match ground truth " + gt->value.shape_str());
  }
  LossBreakdown out;
  Var pf = sigmoid(s_f_logits);
  Var bce_f = bce_loss(pf, gt);
  Var iou_f = iou_loss(pf, gt);
  Var l1_f = l1_loss(pf, gt);
  out.bce_f = bce_f->value.item();
  out.iou_f = iou_f->value.item();
  out.l1_f = l1_f->value.item();
  out.value = add(add(bce_f, iou_f), l1_f);
  if (s_m_logits) {
    Var pm = sigmoid(bilinear_resize(s_m_logits, gh, gw));
    Var bce_m = bce_loss(pm, gt);
    Var iou_m = iou_loss(pm, gt);
    Var l1_m = l1_loss(pm, gt);
    out.bce_m = bce_m->value.item();
    out.iou_m = iou_m->value.item();
    out.l1_m = l1_m->value.item();
    out.value = add(out.value, add(add(bce_m, iou_m), l1_m));
  }
  out.total = out.value->value.item();
  return out;
}

}  // namespace mdsam
