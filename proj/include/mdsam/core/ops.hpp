#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "autograd.hpp"

namespace mdsam {

namespace detail {

using EigenRowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<EigenRowMat>;
using ConstMatMap = Eigen::Map<const EigenRowMat>;

// C(n,m) = [+]= op(A) * op(B) with logical dims n x k x m after transposes.
inline void gemm(bool trans_a, bool trans_b, int n, int k, int m, const Scalar* a,
                 const Scalar* b, Scalar* c, bool accumulate) {
  ConstMatMap A(a, trans_a ? k : n, trans_a ? n : k);
  ConstMatMap B(b, trans_b ? m : k, trans_b ? k : m);
  MatMap C(c, n, m);
  if (!trans_a && !trans_b) {
    if (accumulate) C.noalias() += A * B; else C.noalias() = A * B;
  } else if (trans_a && !trans_b) {
    if (accumulate) C.noalias() += A.transpose() * B; else C.noalias() = A.transpose() * B;
  } else if (!trans_a && trans_b) {
    if (accumulate) C.noalias() += A * B.transpose(); else C.noalias() = A * B.transpose();
  } else {
    if (accumulate) C.noalias() += A.transpose() * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      Node& parent = *self.parents[p];
      if (!parent.requires_grad) continue;
      Tensor& g = parent.ensure_grad();
      for (long i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "sub");
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (long i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (long i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "mul");
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (long i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (long i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

inline Var divide(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "divide");
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] /= b->value[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (long i = 0; i < g.size(); ++i) g[i] += self.grad[i] / bv[i];
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (long i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * av[i] / (bv[i] * bv[i]);
    }
  });
}

inline Var mul_scalar(const Var& a, Scalar s) {
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] *= s;
  return make_op(std::move(out), {a}, [s](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

inline Var add_scalar(const Var& a, Scalar s) {
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] += s;
  return make_op(std::move(out), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

inline Var relu(const Var& a) {
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] = out[i] > 0 ? out[i] : 0;
  return make_op(std::move(out), {a}, [](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < g.size(); ++i) {
      if (x[i] > 0) g[i] += self.grad[i];
    }
  });
}

// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
inline Var gelu(const Var& a) {
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * out[i] * (1.0 + std::erf(out[i] * 0.70710678118654752440));
  }
  return make_op(std::move(out), {a}, [](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    constexpr Scalar inv_sqrt2 = 0.70710678118654752440;
    constexpr Scalar inv_sqrt2pi = 0.39894228040143267794;
    for (long i = 0; i < g.size(); ++i) {
      const Scalar v = x[i];
      const Scalar cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const Scalar pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return make_op(std::move(out), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < g.size(); ++i) {
      const Scalar y = self.value[i];
      g[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

inline Var log_op(const Var& a) {
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  return make_op(std::move(out), {a}, [](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < g.size(); ++i) g[i] += self.grad[i] / x[i];
  });
}

inline Var abs_op(const Var& a) {
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] = std::abs(out[i]);
  return make_op(std::move(out), {a}, [](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < g.size(); ++i) {
      if (x[i] > 0) g[i] += self.grad[i];
      else if (x[i] < 0) g[i] -= self.grad[i];
    }
  });
}

// Gradient is zero on clamped elements.
inline Var clamp(const Var& a, Scalar lo, Scalar hi) {
  Tensor out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, out[i]));
  return make_op(std::move(out), {a}, [lo, hi](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < g.size(); ++i) {
      if (x[i] > lo && x[i] < hi) g[i] += self.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Var sum_all(const Var& a) {
  Scalar s = 0;
  for (long i = 0; i < a->value.size(); ++i) s += a->value[i];
  return make_op(Tensor::scalar(s), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    const Scalar d = self.grad[0];
    for (long i = 0; i < g.size(); ++i) g[i] += d;
  });
}

inline Var mean_all(const Var& a) {
  const Scalar inv_n = 1.0 / static_cast<Scalar>(a->value.size());
  Scalar s = 0;
  for (long i = 0; i < a->value.size(); ++i) s += a->value[i];
  return make_op(Tensor::scalar(s * inv_n), {a}, [inv_n](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    const Scalar d = self.grad[0] * inv_n;
    for (long i = 0; i < g.size(); ++i) g[i] += d;
  });
}

// Mean over spatial positions of a (C,H,W) grid -> (C). This is the GAP used
// by the weight distributors.
inline Var global_avg_pool(const Var& a) {
  const int c = a->value.dim(0), h = a->value.dim(1), w = a->value.dim(2);
  const long hw = static_cast<long>(h) * w;
  Tensor out({c});
  for (int ch = 0; ch < c; ++ch) {
    Scalar s = 0;
    const Scalar* p = a->value.data() + static_cast<long>(ch) * hw;
    for (long i = 0; i < hw; ++i) s += p[i];
    out[ch] = s / static_cast<Scalar>(hw);
  }
  return make_op(std::move(out), {a}, [c, hw](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const Scalar d = self.grad[ch] / static_cast<Scalar>(hw);
      Scalar* p = g.data() + static_cast<long>(ch) * hw;
      for (long i = 0; i < hw; ++i) p[i] += d;
    }
  });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline Var reshape(const Var& a, std::vector<int> shape) {
  Tensor out = a->value.reshaped(std::move(shape));
  return make_op(std::move(out), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// (C,H,W) grid -> (H*W, C) token matrix; token n sits at (y=n/W, x=n%W).
inline Var grid_to_tokens(const Var& a) {
  const int c = a->value.dim(0), h = a->value.dim(1), w = a->value.dim(2);
  const long n = static_cast<long>(h) * w;
  Tensor out({static_cast<int>(n), c});
  for (int ch = 0; ch < c; ++ch) {
    const Scalar* src = a->value.data() + static_cast<long>(ch) * n;
    for (long i = 0; i < n; ++i) out[i * c + ch] = src[i];
  }
  return make_op(std::move(out), {a}, [c, n](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      Scalar* dst = g.data() + static_cast<long>(ch) * n;
      for (long i = 0; i < n; ++i) dst[i] += self.grad[i * c + ch];
    }
  });
}

// (N, C) token matrix -> (C, H, W) grid with N == H*W.
inline Var tokens_to_grid(const Var& a, int h, int w) {
  const int n = a->value.dim(0), c = a->value.dim(1);
  if (n != h * w) {
    throw std::invalid_argument("tokens_to_grid: N != H*W");
  }
  Tensor out({c, h, w});
  const long hw = static_cast<long>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    Scalar* dst = out.data() + static_cast<long>(ch) * hw;
    for (long i = 0; i < hw; ++i) dst[i] = a->value[i * c + ch];
  }
  return make_op(std::move(out), {a}, [c, hw](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const Scalar* src = self.grad.data() + static_cast<long>(ch) * hw;
      for (long i = 0; i < hw; ++i) g[i * c + ch] += src[i];
    }
  });
}

inline Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: empty input");
  const int h = parts[0]->value.dim(1), w = parts[0]->value.dim(2);
  int c_total = 0;
  for (const auto& p : parts) {
    if (p->value.dim(1) != h || p->value.dim(2) != w) {
      throw std::invalid_argument("concat_channels: spatial mismatch");
    }
    c_total += p->value.dim(0);
  }
  Tensor out({c_total, h, w});
  long offset = 0;
  for (const auto& p : parts) {
    const long sz = p->value.size();
    std::copy(p->value.data(), p->value.data() + sz, out.data() + offset);
    offset += sz;
  }
  return make_op(std::move(out), parts, [](Node& self) {
    long offset = 0;
    for (auto& p : self.parents) {
      const long sz = p->value.size();
      if (p->requires_grad) {
        Tensor& g = p->ensure_grad();
        for (long i = 0; i < sz; ++i) g[i] += self.grad[offset + i];
      }
      offset += sz;
    }
  });
}

inline Var slice_cols(const Var& a, int start, int len) {
  const int n = a->value.dim(0), c = a->value.dim(1);
  if (start < 0 || start + len > c) throw std::out_of_range("slice_cols");
  Tensor out({n, len});
  for (int i = 0; i < n; ++i) {
    const Scalar* src = a->value.data() + static_cast<long>(i) * c + start;
    std::copy(src, src + len, out.data() + static_cast<long>(i) * len);
  }
  return make_op(std::move(out), {a}, [n, c, start, len](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < n; ++i) {
      Scalar* dst = g.data() + static_cast<long>(i) * c + start;
      const Scalar* src = self.grad.data() + static_cast<long>(i) * len;
      for (int j = 0; j < len; ++j) dst[j] += src[j];
    }
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  const int n = parts[0]->value.dim(0);
  int c_total = 0;
  for (const auto& p : parts) {
    if (p->value.dim(0) != n) throw std::invalid_argument("concat_cols: row mismatch");
    c_total += p->value.dim(1);
  }
  Tensor out({n, c_total});
  int offset = 0;
  for (const auto& p : parts) {
    const int c = p->value.dim(1);
    for (int i = 0; i < n; ++i) {
      std::copy(p->value.data() + static_cast<long>(i) * c,
                p->value.data() + static_cast<long>(i) * c + c,
                out.data() + static_cast<long>(i) * c_total + offset);
    }
    offset += c;
  }
  return make_op(std::move(out), parts, [n, c_total](Node& self) {
    int offset = 0;
    for (auto& p : self.parents) {
      const int c = p->value.dim(1);
      if (p->requires_grad) {
        Tensor& g = p->ensure_grad();
        for (int i = 0; i < n; ++i) {
          const Scalar* src = self.grad.data() + static_cast<long>(i) * c_total + offset;
          Scalar* dst = g.data() + static_cast<long>(i) * c;
          for (int j = 0; j < c; ++j) dst[j] += src[j];
        }
      }
      offset += c;
    }
  });
}

// y[c,:,:] = x[c,:,:] * s[c]; broadcasts a per-channel vector over the grid.
inline Var channel_scale(const Var& x, const Var& s) {
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  check_shape(s->value, {c}, "channel_scale weights");
  const long hw = static_cast<long>(h) * w;
  Tensor out = x->value;
  for (int ch = 0; ch < c; ++ch) {
    Scalar* p = out.data() + static_cast<long>(ch) * hw;
    const Scalar sv = s->value[ch];
    for (long i = 0; i < hw; ++i) p[i] *= sv;
  }
  return make_op(std::move(out), {x, s}, [c, hw](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& sv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        const Scalar s0 = sv[ch];
        const long base = static_cast<long>(ch) * hw;
        for (long i = 0; i < hw; ++i) g[base + i] += self.grad[base + i] * s0;
      }
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        const long base = static_cast<long>(ch) * hw;
        Scalar acc = 0;
        for (long i = 0; i < hw; ++i) acc += self.grad[base + i] * xv[base + i];
        g[ch] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  const int n = a->value.dim(0), k = a->value.dim(1);
  const int k2 = b->value.dim(0), m = b->value.dim(1);
  if (k != k2) {
    throw std::invalid_argument("matmul: inner dims " + a->value.shape_str() + " x " +
                                b->value.shape_str());
  }
  Tensor out({n, m});
  detail::gemm(false, false, n, k, m, a->value.data(), b->value.data(), out.data(), false);
  return make_op(std::move(out), {a, b}, [n, k, m](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->ensure_grad();
      detail::gemm(false, true, n, m, k, self.grad.data(), bv.data(), g.data(), true);
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      detail::gemm(true, false, k, n, m, av.data(), self.grad.data(), g.data(), true);
    }
  });
}

// out (n,m) = a (n,k) * b (m,k)^T
inline Var matmul_nt(const Var& a, const Var& b) {
  const int n = a->value.dim(0), k = a->value.dim(1);
  const int m = b->value.dim(0), k2 = b->value.dim(1);
  if (k != k2) {
    throw std::invalid_argument("matmul_nt: inner dims " + a->value.shape_str() + " x " +
                                b->value.shape_str());
  }
  Tensor out({n, m});
  detail::gemm(false, true, n, k, m, a->value.data(), b->value.data(), out.data(), false);
  return make_op(std::move(out), {a, b}, [n, k, m](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->ensure_grad();
      detail::gemm(false, false, n, m, k, self.grad.data(), bv.data(), g.data(), true);
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      detail::gemm(true, false, m, n, k, self.grad.data(), av.data(), g.data(), true);
    }
  });
}

// y (N,O) = x (N,I) * w (I,O) + b (O)
inline Var linear(const Var& x, const Var& w, const Var& b) {
  const int n = x->value.dim(0), in = x->value.dim(1);
  const int in2 = w->value.dim(0), out_dim = w->value.dim(1);
  if (in != in2) {
    throw std::invalid_argument("linear: input dim " + x->value.shape_str() + " vs weight " +
                                w->value.shape_str());
  }
  check_shape(b->value, {out_dim}, "linear bias");
  Tensor out({n, out_dim});
  detail::gemm(false, false, n, in, out_dim, x->value.data(), w->value.data(), out.data(), false);
  for (int i = 0; i < n; ++i) {
    Scalar* row = out.data() + static_cast<long>(i) * out_dim;
    for (int j = 0; j < out_dim; ++j) row[j] += b->value[j];
  }
  return make_op(std::move(out), {x, w, b}, [n, in, out_dim](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->ensure_grad();
      detail::gemm(false, true, n, out_dim, in, self.grad.data(), wv.data(), g.data(), true);
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      detail::gemm(true, false, in, n, out_dim, xv.data(), self.grad.data(), g.data(), true);
    }
    if (self.parents[2]->requires_grad) {
      Tensor& g = self.parents[2]->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const Scalar* row = self.grad.data() + static_cast<long>(i) * out_dim;
        for (int j = 0; j < out_dim; ++j) g[j] += row[j];
      }
    }
  });
}

inline Var softmax_rows(const Var& a) {
  const int n = a->value.dim(0), m = a->value.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    const Scalar* row = a->value.data() + static_cast<long>(i) * m;
    Scalar* orow = out.data() + static_cast<long>(i) * m;
    Scalar mx = row[0];
    for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
    Scalar sum = 0;
    for (int j = 0; j < m; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    const Scalar inv = 1.0 / sum;
    for (int j = 0; j < m; ++j) orow[j] *= inv;
  }
  return make_op(std::move(out), {a}, [n, m](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < n; ++i) {
      const Scalar* y = self.value.data() + static_cast<long>(i) * m;
      const Scalar* dy = self.grad.data() + static_cast<long>(i) * m;
      Scalar dot = 0;
      for (int j = 0; j < m; ++j) dot += dy[j] * y[j];
      Scalar* gr = g.data() + static_cast<long>(i) * m;
      for (int j = 0; j < m; ++j) gr[j] += (dy[j] - dot) * y[j];
    }
  });
}

// LayerNorm over the last dim of (N,D) with elementwise affine.
inline Var layer_norm(const Var& x, const Var& gamma, const Var& beta, Scalar eps = 1e-6) {
  const int n = x->value.dim(0), d = x->value.dim(1);
  check_shape(gamma->value, {d}, "layer_norm gamma");
  check_shape(beta->value, {d}, "layer_norm beta");
  Tensor out({n, d});
  Tensor xhat({n, d});
  Tensor inv_std({n});
  for (int i = 0; i < n; ++i) {
    const Scalar* row = x->value.data() + static_cast<long>(i) * d;
    Scalar mu = 0;
    for (int j = 0; j < d; ++j) mu += row[j];
    mu /= d;
    Scalar var = 0;
    for (int j = 0; j < d; ++j) {
      const Scalar c = row[j] - mu;
      var += c * c;
    }
    var /= d;
    const Scalar is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    Scalar* xh = xhat.data() + static_cast<long>(i) * d;
    Scalar* o = out.data() + static_cast<long>(i) * d;
    for (int j = 0; j < d; ++j) {
      xh[j] = (row[j] - mu) * is;
      o[j] = xh[j] * gamma->value[j] + beta->value[j];
    }
  }
  return make_op(std::move(out), {x, gamma, beta},
                 [n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
    const Tensor& gv = self.parents[1]->value;
    if (self.parents[1]->requires_grad) {
      Tensor& gg = self.parents[1]->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const Scalar* dy = self.grad.data() + static_cast<long>(i) * d;
        const Scalar* xh = xhat.data() + static_cast<long>(i) * d;
        for (int j = 0; j < d; ++j) gg[j] += dy[j] * xh[j];
      }
    }
    if (self.parents[2]->requires_grad) {
      Tensor& gb = self.parents[2]->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const Scalar* dy = self.grad.data() + static_cast<long>(i) * d;
        for (int j = 0; j < d; ++j) gb[j] += dy[j];
      }
    }
    if (self.parents[0]->requires_grad) {
      Tensor& gx = self.parents[0]->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const Scalar* dy = self.grad.data() + static_cast<long>(i) * d;
        const Scalar* xh = xhat.data() + static_cast<long>(i) * d;
        Scalar mean_dxhat = 0, mean_dxhat_xhat = 0;
        for (int j = 0; j < d; ++j) {
          const Scalar dxh = dy[j] * gv[j];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xh[j];
        }
        mean_dxhat /= d;
        mean_dxhat_xhat /= d;
        Scalar* gr = gx.data() + static_cast<long>(i) * d;
        const Scalar is = inv_std[i];
        for (int j = 0; j < d; ++j) {
          const Scalar dxh = dy[j] * gv[j];
          gr[j] += is * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
      }
    }
  });
}

}  // namespace mdsam
