// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "lapt/common.hpp"
#include "lapt/tensor.hpp"

namespace lapt {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRM = Eigen::Map<MatRM<S>>;
template <typename S>
using CMapRM = Eigen::Map<const MatRM<S>>;

struct ConvSpec {
  int stride = 1;
  int pad = 0;
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

namespace kernels {

// Patch matrix for one sample: rows = (cin, ki, kj), cols = output positions.
template <typename S>
void im2col(const S* x, int cin, int h, int w, int k, const ConvSpec& cs, S* col) {
  const int ho = conv_out_dim(h, k, cs.stride, cs.pad);
  const int wo = conv_out_dim(w, k, cs.stride, cs.pad);
  S* dst = col;
  for (int c = 0; c < cin; ++c) {
    const S* plane = x + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * cs.stride + ki - cs.pad;
          if (ii < 0 || ii >= h) {
            for (int oj = 0; oj < wo; ++oj) *dst++ = S(0);
            continue;
          }
          const S* row = plane + static_cast<std::size_t>(ii) * w;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * cs.stride + kj - cs.pad;
            *dst++ = (jj >= 0 && jj < w) ? row[jj] : S(0);
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col.
template <typename S>
void col2im_add(const S* col, int cin, int h, int w, int k, const ConvSpec& cs, S* dx) {
  const int ho = conv_out_dim(h, k, cs.stride, cs.pad);
  const int wo = conv_out_dim(w, k, cs.stride, cs.pad);
  const S* src = col;
  for (int c = 0; c < cin; ++c) {
    S* plane = dx + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * cs.stride + ki - cs.pad;
          if (ii < 0 || ii >= h) {
            src += wo;
            continue;
          }
          S* row = plane + static_cast<std::size_t>(ii) * w;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * cs.stride + kj - cs.pad;
            if (jj >= 0 && jj < w) row[jj] += src[oj];
          }
          src += wo;
        }
      }
    }
  }
}

// x (n, cin, h, w) * w (cout, cin, k, k) + b (cout) -> (n, cout, ho, wo)
template <typename S>
Tensor<S> conv2d_forward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                         const ConvSpec& cs) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  require(w.dim(1) == cin, "conv2d: weight expects ", w.dim(1), " input channels, got ", cin);
  const int ho = conv_out_dim(h, k, cs.stride, cs.pad);
  const int wo = conv_out_dim(wd, k, cs.stride, cs.pad);
  require(ho > 0 && wo > 0, "conv2d: output would be empty");
  const int kk = cin * k * k, m = ho * wo;

  Tensor<S> y({n, cout, ho, wo});
  CMapRM<S> wm(w.data(), cout, kk);
  std::vector<S> col(static_cast<std::size_t>(kk) * m);
  for (int i = 0; i < n; ++i) {
    im2col(x.data() + static_cast<std::size_t>(i) * cin * h * wd, cin, h, wd, k, cs, col.data());
    CMapRM<S> cm(col.data(), kk, m);
    MapRM<S> ym(y.data() + static_cast<std::size_t>(i) * cout * m, cout, m);
    ym.noalias() = wm * cm;
    for (int c = 0; c < cout; ++c) ym.row(c).array() += b[static_cast<std::size_t>(c)];
  }
  return y;
}

template <typename S>
void conv2d_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy,
                     const ConvSpec& cs, Tensor<S>* dx, Tensor<S>* dw, Tensor<S>* db) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  const int ho = dy.dim(2), wo = dy.dim(3);
  const int kk = cin * k * k, m = ho * wo;

  CMapRM<S> wm(w.data(), cout, kk);
  std::vector<S> col(static_cast<std::size_t>(kk) * m);
  std::vector<S> dcol(static_cast<std::size_t>(kk) * m);
  for (int i = 0; i < n; ++i) {
    CMapRM<S> dym(dy.data() + static_cast<std::size_t>(i) * cout * m, cout, m);
    if (dw || db) {
      if (db) {
        MapRM<S> dbm(db->data(), cout, 1);
        dbm.noalias() += dym.rowwise().sum();
      }
      if (dw) {
        im2col(x.data() + static_cast<std::size_t>(i) * cin * h * wd, cin, h, wd, k, cs,
               col.data());
        CMapRM<S> cm(col.data(), kk, m);
        MapRM<S> dwm(dw->data(), cout, kk);
        dwm.noalias() += dym * cm.transpose();
      }
    }
    if (dx) {
      MapRM<S> dcm(dcol.data(), kk, m);
      dcm.noalias() = wm.transpose() * dym;
      col2im_add(dcol.data(), cin, h, wd, k, cs, dx->data() + static_cast<std::size_t>(i) * cin * h * wd);
    }
  }
}

// x (n, din) * w (dout, din)^T + b -> (n, dout)
template <typename S>
Tensor<S> linear_forward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  const int n = x.dim(0), din = x.dim(1), dout = w.dim(0);
  require(w.dim(1) == din, "linear: weight expects ", w.dim(1), " inputs, got ", din);
  Tensor<S> y({n, dout});
  CMapRM<S> xm(x.data(), n, din), wm(w.data(), dout, din);
  MapRM<S> ym(y.data(), n, dout);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < n; ++i) ym.row(i) += CMapRM<S>(b.data(), 1, dout);
  return y;
}

template <typename S>
void linear_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy, Tensor<S>* dx,
                     Tensor<S>* dw, Tensor<S>* db) {
  const int n = x.dim(0), din = x.dim(1), dout = w.dim(0);
  CMapRM<S> xm(x.data(), n, din), wm(w.data(), dout, din), dym(dy.data(), n, dout);
  if (dx) MapRM<S>(dx->data(), n, din).noalias() += dym * wm;
  if (dw) MapRM<S>(dw->data(), dout, din).noalias() += dym.transpose() * xm;
  if (db) MapRM<S>(db->data(), 1, dout).noalias() += dym.colwise().sum();
}

// Per-(sample, group) normalization statistics, kept for the backward pass.
template <typename S>
struct GroupNormCtx {
  std::vector<S> mean;
  std::vector<S> rstd;
  int groups = 1;
};

template <typename S>
Tensor<S> group_norm_forward(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                             int groups, double eps, GroupNormCtx<S>& ctx) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(c % groups == 0, "group_norm: channels ", c, " not divisible by groups ", groups);
  const int cg = c / groups;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t gsz = static_cast<std::size_t>(cg) * plane;
  ctx.groups = groups;
  ctx.mean.assign(static_cast<std::size_t>(n) * groups, S(0));
  ctx.rstd.assign(static_cast<std::size_t>(n) * groups, S(0));

  Tensor<S> y(x.shape());
  for (int i = 0; i < n; ++i) {
    for (int g = 0; g < groups; ++g) {
      const S* src = x.data() + (static_cast<std::size_t>(i) * c + static_cast<std::size_t>(g) * cg) * plane;
      double sum = 0.0, sumsq = 0.0;
      for (std::size_t j = 0; j < gsz; ++j) {
        double v = static_cast<double>(src[j]);
        sum += v;
        sumsq += v * v;
      }
      const double mu = sum / static_cast<double>(gsz);
      const double var = std::max(0.0, sumsq / static_cast<double>(gsz) - mu * mu);
      const double rstd = 1.0 / std::sqrt(var + eps);
      ctx.mean[static_cast<std::size_t>(i) * groups + g] = static_cast<S>(mu);
      ctx.rstd[static_cast<std::size_t>(i) * groups + g] = static_cast<S>(rstd);
      S* dst = y.data() + (static_cast<std::size_t>(i) * c + static_cast<std::size_t>(g) * cg) * plane;
      for (int cc = 0; cc < cg; ++cc) {
        const S ga = gamma[static_cast<std::size_t>(g * cg + cc)];
        const S be = beta[static_cast<std::size_t>(g * cg + cc)];
        for (std::size_t j = 0; j < plane; ++j) {
          std::size_t idx = static_cast<std::size_t>(cc) * plane + j;
          dst[idx] = ga * static_cast<S>((static_cast<double>(src[idx]) - mu) * rstd) + be;
        }
      }
    }
  }
  return y;
}

template <typename S>
void group_norm_backward(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& dy,
                         const GroupNormCtx<S>& ctx, Tensor<S>* dx, Tensor<S>* dgamma,
                         Tensor<S>* dbeta) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int groups = ctx.groups, cg = c / groups;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double m = static_cast<double>(cg) * plane;

  for (int i = 0; i < n; ++i) {
    for (int g = 0; g < groups; ++g) {
      const std::size_t base = (static_cast<std::size_t>(i) * c + static_cast<std::size_t>(g) * cg) * plane;
      const S* xs = x.data() + base;
      const S* dys = dy.data() + base;
      const double mu = static_cast<double>(ctx.mean[static_cast<std::size_t>(i) * groups + g]);
      const double rstd = static_cast<double>(ctx.rstd[static_cast<std::size_t>(i) * groups + g]);

      double sum1 = 0.0, sum2 = 0.0;
      for (int cc = 0; cc < cg; ++cc) {
        const double ga = static_cast<double>(gamma[static_cast<std::size_t>(g * cg + cc)]);
        for (std::size_t j = 0; j < plane; ++j) {
          std::size_t idx = static_cast<std::size_t>(cc) * plane + j;
          const double xhat = (static_cast<double>(xs[idx]) - mu) * rstd;
          const double dxh = static_cast<double>(dys[idx]) * ga;
          sum1 += dxh;
          sum2 += dxh * xhat;
        }
      }
      for (int cc = 0; cc < cg; ++cc) {
        const std::size_t ci = static_cast<std::size_t>(g * cg + cc);
        const double ga = static_cast<double>(gamma[ci]);
        double dg = 0.0, db = 0.0;
        for (std::size_t j = 0; j < plane; ++j) {
          std::size_t idx = static_cast<std::size_t>(cc) * plane + j;
          const double xhat = (static_cast<double>(xs[idx]) - mu) * rstd;
          const double dyv = static_cast<double>(dys[idx]);
          dg += dyv * xhat;
          db += dyv;
          if (dx) {
            const double dxh = dyv * ga;
            (*dx)[base + idx] += static_cast<S>(rstd * (dxh - (sum1 + xhat * sum2) / m));
          }
        }
        if (dgamma) (*dgamma)[ci] += static_cast<S>(dg);
        if (dbeta) (*dbeta)[ci] += static_cast<S>(db);
      }
    }
  }
}

// Fixed bilinear interpolation with half-pixel centers; downsampling only.
template <typename S>
Tensor<S> bilinear_resize(const Tensor<S>& x, int ho, int wo) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(ho <= h && wo <= w, "bilinear_resize: target (", ho, ",", wo,
          ") must not exceed source (", h, ",", w, "), downsampling only");
  Tensor<S> y({n, c, ho, wo});
  const double sy = static_cast<double>(h) / ho, sx = static_cast<double>(w) / wo;
  for (int oi = 0; oi < ho; ++oi) {
    double fy = (oi + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    if (y0 < 0) { y0 = 0; wy = 0.0; }
    int y1 = std::min(y0 + 1, h - 1);
    for (int oj = 0; oj < wo; ++oj) {
      double fx = (oj + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      if (x0 < 0) { x0 = 0; wx = 0.0; }
      int x1 = std::min(x0 + 1, w - 1);
      for (int i = 0; i < n; ++i) {
        for (int cc = 0; cc < c; ++cc) {
          const S* p = x.data() + ((static_cast<std::size_t>(i) * c + cc) * h) * w;
          double v = (1 - wy) * ((1 - wx) * p[y0 * w + x0] + wx * p[y0 * w + x1]) +
                     wy * ((1 - wx) * p[y1 * w + x0] + wx * p[y1 * w + x1]);
          y.at(i, cc, oi, oj) = static_cast<S>(v);
        }
      }
    }
  }
  return y;
}

template <typename S>
Tensor<S> upsample_nearest2_forward(const Tensor<S>& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<S> y({n, c, 2 * h, 2 * w});
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int ii = 0; ii < h; ++ii)
        for (int jj = 0; jj < w; ++jj) {
          const S v = x.at(i, cc, ii, jj);
          y.at(i, cc, 2 * ii, 2 * jj) = v;
          y.at(i, cc, 2 * ii, 2 * jj + 1) = v;
          y.at(i, cc, 2 * ii + 1, 2 * jj) = v;
          y.at(i, cc, 2 * ii + 1, 2 * jj + 1) = v;
        }
  return y;
}

template <typename S>
void upsample_nearest2_backward(const Tensor<S>& dy, Tensor<S>* dx) {
  const int n = dx->dim(0), c = dx->dim(1), h = dx->dim(2), w = dx->dim(3);
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int ii = 0; ii < h; ++ii)
        for (int jj = 0; jj < w; ++jj)
          dx->at(i, cc, ii, jj) += dy.at(i, cc, 2 * ii, 2 * jj) + dy.at(i, cc, 2 * ii, 2 * jj + 1) +
                                   dy.at(i, cc, 2 * ii + 1, 2 * jj) +
                                   dy.at(i, cc, 2 * ii + 1, 2 * jj + 1);
}

// Sinusoidal timestep embedding, one row per sample.
template <typename S>
Tensor<S> sinusoidal_embedding(const std::vector<int>& ts, int dim) {
  require(dim >= 2 && dim % 2 == 0, "time embedding dim must be even and >= 2, got ", dim);
  const int n = static_cast<int>(ts.size());
  const int half = dim / 2;
  Tensor<S> e({n, dim});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < half; ++j) {
      const double freq = std::exp(-std::log(10000.0) * j / half);
      const double a = ts[static_cast<std::size_t>(i)] * freq;
      e.at(0, 0, i, j) = static_cast<S>(std::sin(a));
      e.at(0, 0, i, half + j) = static_cast<S>(std::cos(a));
    }
  }
  return e;
}

}  // namespace kernels
}  // namespace lapt
