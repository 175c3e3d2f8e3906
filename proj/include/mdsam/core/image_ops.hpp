#pragma once

#include <cmath>
#include <vector>

#include "ops.hpp"

namespace mdsam {

// ---------------------------------------------------------------------------
// Convolutions. Three flavors: 1x1 (pure GEMM), 3x3 same-pad stride-1
// (direct shifted-row kernel, avoids huge im2col buffers at full resolution),
// and a general strided conv via im2col used by the patch embedding.
// ---------------------------------------------------------------------------

// w (Cout, Cin), b (Cout); x (Cin,H,W) -> (Cout,H,W)
inline Var conv1x1(const Var& x, const Var& w, const Var& b) {
  const int cin = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  const int cout = w->value.dim(0);
  check_shape(w->value, {cout, cin}, "conv1x1 weight");
  check_shape(b->value, {cout}, "conv1x1 bias");
  const int hw = h * wd;
  Tensor out({cout, h, wd});
  detail::gemm(false, false, cout, cin, hw, w->value.data(), x->value.data(), out.data(), false);
  for (int co = 0; co < cout; ++co) {
    Scalar* row = out.data() + static_cast<long>(co) * hw;
    const Scalar bv = b->value[co];
    for (int i = 0; i < hw; ++i) row[i] += bv;
  }
  return make_op(std::move(out), {x, w, b}, [cin, cout, hw](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->ensure_grad();
      detail::gemm(true, false, cin, cout, hw, wv.data(), self.grad.data(), g.data(), true);
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      detail::gemm(false, true, cout, hw, cin, self.grad.data(), xv.data(), g.data(), true);
    }
    if (self.parents[2]->requires_grad) {
      Tensor& g = self.parents[2]->ensure_grad();
      for (int co = 0; co < cout; ++co) {
        const Scalar* row = self.grad.data() + static_cast<long>(co) * hw;
        Scalar acc = 0;
        for (int i = 0; i < hw; ++i) acc += row[i];
        g[co] += acc;
      }
    }
  });
}

// w (Cout, Cin, 3, 3), b (Cout); stride 1, zero pad 1, output (Cout,H,W)
inline Var conv3x3_same(const Var& x, const Var& w, const Var& b) {
  const int cin = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  const int cout = w->value.dim(0);
  check_shape(w->value, {cout, cin, 3, 3}, "conv3x3 weight");
  check_shape(b->value, {cout}, "conv3x3 bias");
  const long hw = static_cast<long>(h) * wd;
  Tensor out({cout, h, wd});
  for (int co = 0; co < cout; ++co) {
    Scalar* oc = out.data() + co * hw;
    const Scalar bv = b->value[co];
    for (long i = 0; i < hw; ++i) oc[i] = bv;
    for (int ci = 0; ci < cin; ++ci) {
      const Scalar* xc = x->value.data() + ci * hw;
      const Scalar* wk = w->value.data() + (static_cast<long>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const Scalar w0 = wk[ky * 3 + kx];
          if (w0 == 0) continue;
          const int oy_lo = std::max(0, 1 - ky), oy_hi = std::min(h - 1, h - ky);
          const int ox_lo = std::max(0, 1 - kx), ox_hi = std::min(wd - 1, wd - kx);
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const Scalar* xr = xc + static_cast<long>(oy + ky - 1) * wd + (kx - 1);
            Scalar* orow = oc + static_cast<long>(oy) * wd;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += w0 * xr[ox];
          }
        }
      }
    }
  }
  return make_op(std::move(out), {x, w, b}, [cin, cout, h, wd, hw](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    const bool need_dx = self.parents[0]->requires_grad;
    const bool need_dw = self.parents[1]->requires_grad;
    Tensor* dx = need_dx ? &self.parents[0]->ensure_grad() : nullptr;
    Tensor* dw = need_dw ? &self.parents[1]->ensure_grad() : nullptr;
    for (int co = 0; co < cout; ++co) {
      const Scalar* dyc = self.grad.data() + co * hw;
      for (int ci = 0; ci < cin; ++ci) {
        const Scalar* xc = xv.data() + ci * hw;
        Scalar* dxc = need_dx ? dx->data() + ci * hw : nullptr;
        const long wbase = (static_cast<long>(co) * cin + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const Scalar w0 = wv[wbase + ky * 3 + kx];
            const int oy_lo = std::max(0, 1 - ky), oy_hi = std::min(h - 1, h - ky);
            const int ox_lo = std::max(0, 1 - kx), ox_hi = std::min(wd - 1, wd - kx);
            Scalar wacc = 0;
            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
              const Scalar* dyr = dyc + static_cast<long>(oy) * wd;
              const long xoff = static_cast<long>(oy + ky - 1) * wd + (kx - 1);
              if (need_dx && w0 != 0) {
                Scalar* dxr = dxc + xoff;
                for (int ox = ox_lo; ox <= ox_hi; ++ox) dxr[ox] += w0 * dyr[ox];
              }
              if (need_dw) {
                const Scalar* xr = xc + xoff;
                for (int ox = ox_lo; ox <= ox_hi; ++ox) wacc += xr[ox] * dyr[ox];
              }
            }
            if (need_dw) (*dw)[wbase + ky * 3 + kx] += wacc;
          }
        }
      }
      if (self.parents[2]->requires_grad) {
        Tensor& db = self.parents[2]->ensure_grad();
        Scalar acc = 0;
        for (long i = 0; i < hw; ++i) acc += dyc[i];
        db[co] += acc;
      }
    }
  });
}

// Depth-wise 3x3, stride 1, zero pad 1. w (C,3,3), b (C).
inline Var depthwise3x3(const Var& x, const Var& w, const Var& b) {
  const int c = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  check_shape(w->value, {c, 3, 3}, "depthwise3x3 weight");
  check_shape(b->value, {c}, "depthwise3x3 bias");
  const long hw = static_cast<long>(h) * wd;
  Tensor out({c, h, wd});
  for (int ch = 0; ch < c; ++ch) {
    const Scalar* xc = x->value.data() + ch * hw;
    Scalar* oc = out.data() + ch * hw;
    const Scalar* wk = w->value.data() + static_cast<long>(ch) * 9;
    const Scalar bv = b->value[ch];
    for (int oy = 0; oy < h; ++oy) {
      for (int ox = 0; ox < wd; ++ox) {
        Scalar acc = bv;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox + kx - 1;
            if (ix < 0 || ix >= wd) continue;
            acc += wk[ky * 3 + kx] * xc[static_cast<long>(iy) * wd + ix];
          }
        }
        oc[static_cast<long>(oy) * wd + ox] = acc;
      }
    }
  }
  return make_op(std::move(out), {x, w, b}, [c, h, wd, hw](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    const bool need_dx = self.parents[0]->requires_grad;
    const bool need_dw = self.parents[1]->requires_grad;
    const bool need_db = self.parents[2]->requires_grad;
    for (int ch = 0; ch < c; ++ch) {
      const Scalar* xc = xv.data() + ch * hw;
      const Scalar* dyc = self.grad.data() + ch * hw;
      const Scalar* wk = wv.data() + static_cast<long>(ch) * 9;
      for (int oy = 0; oy < h; ++oy) {
        for (int ox = 0; ox < wd; ++ox) {
          const Scalar dy = dyc[static_cast<long>(oy) * wd + ox];
          if (dy == 0) continue;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = oy + ky - 1;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ox + kx - 1;
              if (ix < 0 || ix >= wd) continue;
              const long xi = static_cast<long>(iy) * wd + ix;
              if (need_dx) self.parents[0]->ensure_grad()[ch * hw + xi] += wk[ky * 3 + kx] * dy;
              if (need_dw) self.parents[1]->ensure_grad()[static_cast<long>(ch) * 9 + ky * 3 + kx] += xc[xi] * dy;
            }
          }
          if (need_db) self.parents[2]->ensure_grad()[ch] += dy;
        }
      }
    }
  });
}

// General strided conv via im2col; used for the patch embedding.
// w (Cout, Cin, K, K), b (Cout), stride s, no padding.
inline Var conv2d_strided(const Var& x, const Var& w, const Var& b, int k, int stride) {
  const int cin = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  const int cout = w->value.dim(0);
  check_shape(w->value, {cout, cin, k, k}, "conv2d_strided weight");
  check_shape(b->value, {cout}, "conv2d_strided bias");
  if ((h - k) % stride != 0 || (wd - k) % stride != 0) {
    throw std::invalid_argument("conv2d_strided: input not divisible by stride");
  }
  const int ho = (h - k) / stride + 1, wo = (wd - k) / stride + 1;
  const int patch = cin * k * k;
  const long ohw = static_cast<long>(ho) * wo;

  auto im2col = [=](const Tensor& src) {
    Tensor col({patch, static_cast<int>(ohw)});
    for (int ci = 0; ci < cin; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          Scalar* crow = col.data() + (static_cast<long>(ci) * k * k + ky * k + kx) * ohw;
          for (int oy = 0; oy < ho; ++oy) {
            const Scalar* xr = src.data() + (static_cast<long>(ci) * h + oy * stride + ky) * wd + kx;
            for (int ox = 0; ox < wo; ++ox) crow[static_cast<long>(oy) * wo + ox] = xr[ox * stride];
          }
        }
      }
    }
    return col;
  };

  Tensor col = im2col(x->value);
  Tensor out({cout, ho, wo});
  detail::gemm(false, false, cout, patch, static_cast<int>(ohw), w->value.data(), col.data(),
               out.data(), false);
  for (int co = 0; co < cout; ++co) {
    Scalar* row = out.data() + co * ohw;
    for (long i = 0; i < ohw; ++i) row[i] += b->value[co];
  }
  return make_op(std::move(out), {x, w, b},
                 [=, im2col = std::move(im2col)](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    Tensor col2 = im2col(xv);
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      detail::gemm(false, true, cout, static_cast<int>(ohw), patch, self.grad.data(), col2.data(),
                   g.data(), true);
    }
    if (self.parents[2]->requires_grad) {
      Tensor& g = self.parents[2]->ensure_grad();
      for (int co = 0; co < cout; ++co) {
        const Scalar* row = self.grad.data() + co * ohw;
        Scalar acc = 0;
        for (long i = 0; i < ohw; ++i) acc += row[i];
        g[co] += acc;
      }
    }
    if (self.parents[0]->requires_grad) {
      Tensor dcol({patch, static_cast<int>(ohw)});
      detail::gemm(true, false, patch, cout, static_cast<int>(ohw), wv.data(), self.grad.data(),
                   dcol.data(), false);
      Tensor& g = self.parents[0]->ensure_grad();
      for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const Scalar* crow = dcol.data() + (static_cast<long>(ci) * k * k + ky * k + kx) * ohw;
            for (int oy = 0; oy < ho; ++oy) {
              Scalar* xr = g.data() + (static_cast<long>(ci) * h + oy * stride + ky) * wd + kx;
              for (int ox = 0; ox < wo; ++ox) xr[ox * stride] += crow[static_cast<long>(oy) * wo + ox];
            }
          }
        }
      }
    }
  });
}

// Transposed conv, kernel 2, stride 2: (Cin,H,W) -> (Cout,2H,2W).
// w (Cin, Cout, 2, 2), b (Cout).
inline Var conv_transpose2x2(const Var& x, const Var& w, const Var& b) {
  const int cin = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  const int cout = w->value.dim(1);
  check_shape(w->value, {cin, cout, 2, 2}, "conv_transpose2x2 weight");
  check_shape(b->value, {cout}, "conv_transpose2x2 bias");
  const int ho = 2 * h, wo = 2 * wd;
  Tensor out({cout, ho, wo});
  for (int co = 0; co < cout; ++co) {
    Scalar* oc = out.data() + static_cast<long>(co) * ho * wo;
    const Scalar bv = b->value[co];
    for (long i = 0; i < static_cast<long>(ho) * wo; ++i) oc[i] = bv;
  }
  for (int ci = 0; ci < cin; ++ci) {
    const Scalar* xc = x->value.data() + static_cast<long>(ci) * h * wd;
    for (int co = 0; co < cout; ++co) {
      Scalar* oc = out.data() + static_cast<long>(co) * ho * wo;
      const Scalar* wk = w->value.data() + (static_cast<long>(ci) * cout + co) * 4;
      for (int y = 0; y < h; ++y) {
        for (int x0 = 0; x0 < wd; ++x0) {
          const Scalar v = xc[static_cast<long>(y) * wd + x0];
          Scalar* o = oc + static_cast<long>(2 * y) * wo + 2 * x0;
          o[0] += v * wk[0];
          o[1] += v * wk[1];
          o[wo] += v * wk[2];
          o[wo + 1] += v * wk[3];
        }
      }
    }
  }
  return make_op(std::move(out), {x, w, b}, [cin, cout, h, wd, ho, wo](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    for (int ci = 0; ci < cin; ++ci) {
      const Scalar* xc = xv.data() + static_cast<long>(ci) * h * wd;
      for (int co = 0; co < cout; ++co) {
        const Scalar* dyc = self.grad.data() + static_cast<long>(co) * ho * wo;
        const Scalar* wk = wv.data() + (static_cast<long>(ci) * cout + co) * 4;
        for (int y = 0; y < h; ++y) {
          for (int x0 = 0; x0 < wd; ++x0) {
            const Scalar* dyo = dyc + static_cast<long>(2 * y) * wo + 2 * x0;
            if (self.parents[0]->requires_grad) {
              self.parents[0]->ensure_grad()[static_cast<long>(ci) * h * wd + y * wd + x0] +=
                  dyo[0] * wk[0] + dyo[1] * wk[1] + dyo[wo] * wk[2] + dyo[wo + 1] * wk[3];
            }
            if (self.parents[1]->requires_grad) {
              Tensor& dw = self.parents[1]->ensure_grad();
              const Scalar v = xc[static_cast<long>(y) * wd + x0];
              const long wb = (static_cast<long>(ci) * cout + co) * 4;
              dw[wb] += v * dyo[0];
              dw[wb + 1] += v * dyo[1];
              dw[wb + 2] += v * dyo[wo];
              dw[wb + 3] += v * dyo[wo + 1];
            }
          }
        }
      }
    }
    if (self.parents[2]->requires_grad) {
      Tensor& db = self.parents[2]->ensure_grad();
      for (int co = 0; co < cout; ++co) {
        const Scalar* dyc = self.grad.data() + static_cast<long>(co) * ho * wo;
        Scalar acc = 0;
        for (long i = 0; i < static_cast<long>(ho) * wo; ++i) acc += dyc[i];
        db[co] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Pooling and resampling
// ---------------------------------------------------------------------------

// 3x3 average pooling, stride 1, same size. Padded cells are excluded from
// the mean, so a spatially constant input is reproduced exactly.
inline Var avg_pool3x3_same(const Var& x) {
  const int c = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  const long hw = static_cast<long>(h) * wd;
  Tensor out({c, h, wd});
  for (int ch = 0; ch < c; ++ch) {
    const Scalar* xc = x->value.data() + ch * hw;
    Scalar* oc = out.data() + ch * hw;
    for (int y = 0; y < h; ++y) {
      const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
      for (int x0 = 0; x0 < wd; ++x0) {
        const int xl = std::max(0, x0 - 1), xr = std::min(wd - 1, x0 + 1);
        Scalar acc = 0;
        for (int iy = y0; iy <= y1; ++iy) {
          for (int ix = xl; ix <= xr; ++ix) acc += xc[static_cast<long>(iy) * wd + ix];
        }
        oc[static_cast<long>(y) * wd + x0] = acc / ((y1 - y0 + 1) * (xr - xl + 1));
      }
    }
  }
  return make_op(std::move(out), {x}, [c, h, wd, hw](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const Scalar* dyc = self.grad.data() + ch * hw;
      Scalar* gc = g.data() + ch * hw;
      for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
        for (int x0 = 0; x0 < wd; ++x0) {
          const int xl = std::max(0, x0 - 1), xr = std::min(wd - 1, x0 + 1);
          const Scalar d = dyc[static_cast<long>(y) * wd + x0] / ((y1 - y0 + 1) * (xr - xl + 1));
          for (int iy = y0; iy <= y1; ++iy) {
            for (int ix = xl; ix <= xr; ++ix) gc[static_cast<long>(iy) * wd + ix] += d;
          }
        }
      }
    }
  });
}

// Adaptive average pooling to (oh, ow); output cell (i,j) averages input rows
// [floor(i*H/oh), ceil((i+1)*H/oh)) and the analogous columns.
inline Var adaptive_avg_pool(const Var& x, int oh, int ow) {
  const int c = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  if (oh <= 0 || ow <= 0 || oh > h || ow > wd) {
    throw std::invalid_argument("adaptive_avg_pool: invalid output size");
  }
  auto lo = [](int i, int in, int out) { return (i * in) / out; };
  auto hi = [](int i, int in, int out) { return ((i + 1) * in + out - 1) / out; };
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    const Scalar* xc = x->value.data() + static_cast<long>(ch) * h * wd;
    for (int i = 0; i < oh; ++i) {
      const int y0 = lo(i, h, oh), y1 = hi(i, h, oh);
      for (int j = 0; j < ow; ++j) {
        const int x0 = lo(j, wd, ow), x1 = hi(j, wd, ow);
        Scalar acc = 0;
        for (int y = y0; y < y1; ++y) {
          for (int xx = x0; xx < x1; ++xx) acc += xc[static_cast<long>(y) * wd + xx];
        }
        out.at(ch, i, j) = acc / ((y1 - y0) * (x1 - x0));
      }
    }
  }
  return make_op(std::move(out), {x}, [c, h, wd, oh, ow, lo, hi](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      Scalar* gc = g.data() + static_cast<long>(ch) * h * wd;
      for (int i = 0; i < oh; ++i) {
        const int y0 = lo(i, h, oh), y1 = hi(i, h, oh);
        for (int j = 0; j < ow; ++j) {
          const int x0 = lo(j, wd, ow), x1 = hi(j, wd, ow);
          const Scalar d = self.grad.at(ch, i, j) / ((y1 - y0) * (x1 - x0));
          for (int y = y0; y < y1; ++y) {
            for (int xx = x0; xx < x1; ++xx) gc[static_cast<long>(y) * wd + xx] += d;
          }
        }
      }
    }
  });
}

namespace detail {

struct ResampleAxis {
  std::vector<int> i0, i1;
  std::vector<Scalar> t;
};

// align_corners = false source mapping, negative coordinates clamped to 0.
inline ResampleAxis bilinear_axis(int in, int out) {
  ResampleAxis ax;
  ax.i0.resize(static_cast<size_t>(out));
  ax.i1.resize(static_cast<size_t>(out));
  ax.t.resize(static_cast<size_t>(out));
  const Scalar scale = static_cast<Scalar>(in) / static_cast<Scalar>(out);
  for (int o = 0; o < out; ++o) {
    Scalar src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(src);
    if (i0 > in - 1) i0 = in - 1;
    ax.i0[static_cast<size_t>(o)] = i0;
    ax.i1[static_cast<size_t>(o)] = std::min(i0 + 1, in - 1);
    ax.t[static_cast<size_t>(o)] = src - i0;
  }
  return ax;
}

}  // namespace detail

// Bilinear resize of a (C,H,W) grid to (C,oh,ow), align_corners=false.
inline Var bilinear_resize(const Var& x, int oh, int ow) {
  const int c = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  if (oh == h && ow == wd) return x;
  const detail::ResampleAxis ay = detail::bilinear_axis(h, oh);
  const detail::ResampleAxis axx = detail::bilinear_axis(wd, ow);
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    const Scalar* xc = x->value.data() + static_cast<long>(ch) * h * wd;
    Scalar* oc = out.data() + static_cast<long>(ch) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const int y0 = ay.i0[y], y1 = ay.i1[y];
      const Scalar ty = ay.t[y];
      for (int xo = 0; xo < ow; ++xo) {
        const int x0 = axx.i0[xo], x1 = axx.i1[xo];
        const Scalar tx = axx.t[xo];
        const Scalar v00 = xc[static_cast<long>(y0) * wd + x0];
        const Scalar v01 = xc[static_cast<long>(y0) * wd + x1];
        const Scalar v10 = xc[static_cast<long>(y1) * wd + x0];
        const Scalar v11 = xc[static_cast<long>(y1) * wd + x1];
        oc[static_cast<long>(y) * ow + xo] =
            (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
      }
    }
  }
  return make_op(std::move(out), {x}, [c, h, wd, oh, ow, ay, axx](Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      Scalar* gc = g.data() + static_cast<long>(ch) * h * wd;
      const Scalar* dyc = self.grad.data() + static_cast<long>(ch) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        const int y0 = ay.i0[y], y1 = ay.i1[y];
        const Scalar ty = ay.t[y];
        for (int xo = 0; xo < ow; ++xo) {
          const int x0 = axx.i0[xo], x1 = axx.i1[xo];
          const Scalar tx = axx.t[xo];
          const Scalar d = dyc[static_cast<long>(y) * ow + xo];
          gc[static_cast<long>(y0) * wd + x0] += d * (1 - ty) * (1 - tx);
          gc[static_cast<long>(y0) * wd + x1] += d * (1 - ty) * tx;
          gc[static_cast<long>(y1) * wd + x0] += d * ty * (1 - tx);
          gc[static_cast<long>(y1) * wd + x1] += d * ty * tx;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Batch normalization over a (C,H,W) grid (statistics per channel).
// Training mode normalizes with the batch statistics of this call and
// updates the running buffers in place; eval mode uses the running buffers.
// ---------------------------------------------------------------------------
inline Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                        Tensor& running_var, bool training, Scalar momentum = 0.1,
                        Scalar eps = 1e-5) {
  const int c = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  check_shape(gamma->value, {c}, "batch_norm2d gamma");
  check_shape(beta->value, {c}, "batch_norm2d beta");
  check_shape(running_mean, {c}, "batch_norm2d running_mean");
  check_shape(running_var, {c}, "batch_norm2d running_var");
  const long m = static_cast<long>(h) * wd;
  Tensor out({c, h, wd});

  if (training) {
    Tensor xhat({c, h, wd});
    Tensor inv_std({c});
    for (int ch = 0; ch < c; ++ch) {
      const Scalar* xc = x->value.data() + ch * m;
      Scalar mu = 0;
      for (long i = 0; i < m; ++i) mu += xc[i];
      mu /= static_cast<Scalar>(m);
      Scalar var = 0;
      for (long i = 0; i < m; ++i) {
        const Scalar d = xc[i] - mu;
        var += d * d;
      }
      var /= static_cast<Scalar>(m);
      const Scalar is = 1.0 / std::sqrt(var + eps);
      inv_std[ch] = is;
      Scalar* xh = xhat.data() + ch * m;
      Scalar* oc = out.data() + ch * m;
      const Scalar g0 = gamma->value[ch], b0 = beta->value[ch];
      for (long i = 0; i < m; ++i) {
        xh[i] = (xc[i] - mu) * is;
        oc[i] = xh[i] * g0 + b0;
      }
      const Scalar unbiased = m > 1 ? var * static_cast<Scalar>(m) / static_cast<Scalar>(m - 1) : var;
      running_mean[ch] = (1 - momentum) * running_mean[ch] + momentum * mu;
      running_var[ch] = (1 - momentum) * running_var[ch] + momentum * unbiased;
    }
    return make_op(std::move(out), {x, gamma, beta},
                   [c, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
      const Tensor& gv = self.parents[1]->value;
      if (self.parents[1]->requires_grad) {
        Tensor& gg = self.parents[1]->ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
          const Scalar* dy = self.grad.data() + ch * m;
          const Scalar* xh = xhat.data() + ch * m;
          Scalar acc = 0;
          for (long i = 0; i < m; ++i) acc += dy[i] * xh[i];
          gg[ch] += acc;
        }
      }
      if (self.parents[2]->requires_grad) {
        Tensor& gb = self.parents[2]->ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
          const Scalar* dy = self.grad.data() + ch * m;
          Scalar acc = 0;
          for (long i = 0; i < m; ++i) acc += dy[i];
          gb[ch] += acc;
        }
      }
      if (self.parents[0]->requires_grad) {
        Tensor& gx = self.parents[0]->ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
          const Scalar* dy = self.grad.data() + ch * m;
          const Scalar* xh = xhat.data() + ch * m;
          const Scalar g0 = gv[ch];
          Scalar mean_d = 0, mean_dx = 0;
          for (long i = 0; i < m; ++i) {
            const Scalar dxh = dy[i] * g0;
            mean_d += dxh;
            mean_dx += dxh * xh[i];
          }
          mean_d /= static_cast<Scalar>(m);
          mean_dx /= static_cast<Scalar>(m);
          Scalar* gr = gx.data() + ch * m;
          const Scalar is = inv_std[ch];
          for (long i = 0; i < m; ++i) {
            const Scalar dxh = dy[i] * g0;
            gr[i] += is * (dxh - mean_d - xh[i] * mean_dx);
          }
        }
      }
    });
  }

  // Eval: affine transform with the running estimates.
  Tensor scale({c}), shift({c});
  for (int ch = 0; ch < c; ++ch) {
    const Scalar is = 1.0 / std::sqrt(running_var[ch] + eps);
    scale[ch] = gamma->value[ch] * is;
    shift[ch] = beta->value[ch] - running_mean[ch] * gamma->value[ch] * is;
  }
  for (int ch = 0; ch < c; ++ch) {
    const Scalar* xc = x->value.data() + ch * m;
    Scalar* oc = out.data() + ch * m;
    for (long i = 0; i < m; ++i) oc[i] = xc[i] * scale[ch] + shift[ch];
  }
  Tensor rm = running_mean, rv = running_var;
  return make_op(std::move(out), {x, gamma, beta},
                 [c, m, eps, rm = std::move(rm), rv = std::move(rv)](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& gv = self.parents[1]->value;
    for (int ch = 0; ch < c; ++ch) {
      const Scalar is = 1.0 / std::sqrt(rv[ch] + eps);
      const Scalar* dy = self.grad.data() + ch * m;
      if (self.parents[0]->requires_grad) {
        Scalar* gx = self.parents[0]->ensure_grad().data() + ch * m;
        const Scalar s0 = gv[ch] * is;
        for (long i = 0; i < m; ++i) gx[i] += dy[i] * s0;
      }
      if (self.parents[1]->requires_grad) {
        const Scalar* xc = xv.data() + ch * m;
        Scalar acc = 0;
        for (long i = 0; i < m; ++i) acc += dy[i] * (xc[i] - rm[ch]) * is;
        self.parents[1]->ensure_grad()[ch] += acc;
      }
      if (self.parents[2]->requires_grad) {
        Scalar acc = 0;
        for (long i = 0; i < m; ++i) acc += dy[i];
        self.parents[2]->ensure_grad()[ch] += acc;
      }
    }
  });
}

}  // namespace mdsam
