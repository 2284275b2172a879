// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "lapt/kernels.hpp"
#include "lapt/tensor.hpp"

namespace lapt {

// Reverse-mode tape over Tensor<S> values. A graph is built per training step
// and discarded; leaves are copies, so parameter storage is never aliased.
// Node ids are indices into the tape; backward() runs closures in reverse
// creation order. Every op is skipped in the backward pass unless gradient
// actually reached its output.
template <typename S>
class Graph {
 public:
  int input(Tensor<S> v, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(v), {}, requires_grad, false, nullptr});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Tensor<S>& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }

  Tensor<S>& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_alloc) {
      n.grad = Tensor<S>::zeros(n.val.shape());
      n.grad_alloc = true;
    }
    return n.grad;
  }

  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].req; }

  void backward(int root) {
    require(val(root).size() == 1, "backward root must be scalar");
    grad(root)[0] = S(1);
    for (int id = root; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.req && n.grad_alloc && n.back) n.back(*this);
    }
  }

  // ---- ops ----

  int conv2d(int x, int w, int b, ConvSpec cs) {
    Tensor<S> y = kernels::conv2d_forward(val(x), val(w), val(b), cs);
    return emit(std::move(y), {x, w, b}, [x, w, b, cs](Graph& g, int self) {
      const Tensor<S>& dy = g.grad(self);
      Tensor<S>* dx = g.requires_grad(x) ? &g.grad(x) : nullptr;
      Tensor<S>* dw = g.requires_grad(w) ? &g.grad(w) : nullptr;
      Tensor<S>* db = g.requires_grad(b) ? &g.grad(b) : nullptr;
      kernels::conv2d_backward(g.val(x), g.val(w), dy, cs, dx, dw, db);
    });
  }

  int linear(int x, int w, int b) {
    Tensor<S> y = kernels::linear_forward(val(x), val(w), val(b));
    return emit(std::move(y), {x, w, b}, [x, w, b](Graph& g, int self) {
      const Tensor<S>& dy = g.grad(self);
      Tensor<S>* dx = g.requires_grad(x) ? &g.grad(x) : nullptr;
      Tensor<S>* dw = g.requires_grad(w) ? &g.grad(w) : nullptr;
      Tensor<S>* db = g.requires_grad(b) ? &g.grad(b) : nullptr;
      kernels::linear_backward(g.val(x), g.val(w), dy, dx, dw, db);
    });
  }

  int group_norm(int x, int gamma, int beta, int groups, double eps = 1e-5) {
    auto ctx = std::make_shared<kernels::GroupNormCtx<S>>();
    Tensor<S> y = kernels::group_norm_forward(val(x), val(gamma), val(beta), groups, eps, *ctx);
    return emit(std::move(y), {x, gamma, beta}, [x, gamma, beta, ctx](Graph& g, int self) {
      const Tensor<S>& dy = g.grad(self);
      Tensor<S>* dx = g.requires_grad(x) ? &g.grad(x) : nullptr;
      Tensor<S>* dg = g.requires_grad(gamma) ? &g.grad(gamma) : nullptr;
      Tensor<S>* db = g.requires_grad(beta) ? &g.grad(beta) : nullptr;
      kernels::group_norm_backward(g.val(x), g.val(gamma), dy, *ctx, dx, dg, db);
    });
  }

  int silu(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const S sig = S(1) / (S(1) + std::exp(-xv[i]));
      y[i] = xv[i] * sig;
    }
    return emit(std::move(y), {x}, [x](Graph& g, int self) {
      if (!g.requires_grad(x)) return;
      const Tensor<S>& dy = g.grad(self);
      const Tensor<S>& xv = g.val(x);
      Tensor<S>& dx = g.grad(x);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const S sig = S(1) / (S(1) + std::exp(-xv[i]));
        dx[i] += dy[i] * sig * (S(1) + xv[i] * (S(1) - sig));
      }
    });
  }

  int tanh_(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = std::tanh(xv[i]);
    return emit(std::move(y), {x}, [x](Graph& g, int self) {
      if (!g.requires_grad(x)) return;
      const Tensor<S>& dy = g.grad(self);
      const Tensor<S>& yv = g.val(self);
      Tensor<S>& dx = g.grad(x);
      for (std::size_t i = 0; i < yv.size(); ++i) dx[i] += dy[i] * (S(1) - yv[i] * yv[i]);
    });
  }

  int add(int a, int b) {
    check_same_shape(val(a), val(b), "add");
    Tensor<S> y(val(a).shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = val(a)[i] + val(b)[i];
    return emit(std::move(y), {a, b}, [a, b](Graph& g, int self) {
      const Tensor<S>& dy = g.grad(self);
      if (g.requires_grad(a)) {
        Tensor<S>& da = g.grad(a);
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
      }
      if (g.requires_grad(b)) {
        Tensor<S>& db = g.grad(b);
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
      }
    });
  }

  // x (n, c, h, w) + v (n, c), broadcast over spatial dims.
  int add_channel_bias(int x, int v) {
    const Tensor<S>& xv = val(x);
    const Tensor<S>& vv = val(v);
    const int n = xv.dim(0), c = xv.dim(1);
    const std::size_t plane = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
    require(vv.rank() == 2 && vv.dim(0) == n && vv.dim(1) == c,
            "add_channel_bias: bias shape must be (batch, channels)");
    Tensor<S> y(xv.shape());
    for (int i = 0; i < n; ++i)
      for (int cc = 0; cc < c; ++cc) {
        const S bias = vv[static_cast<std::size_t>(i) * c + cc];
        const std::size_t base = (static_cast<std::size_t>(i) * c + cc) * plane;
        for (std::size_t j = 0; j < plane; ++j) y[base + j] = xv[base + j] + bias;
      }
    return emit(std::move(y), {x, v}, [x, v, n, c, plane](Graph& g, int self) {
      const Tensor<S>& dy = g.grad(self);
      if (g.requires_grad(x)) {
        Tensor<S>& dx = g.grad(x);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      }
      if (g.requires_grad(v)) {
        Tensor<S>& dv = g.grad(v);
        for (int i = 0; i < n; ++i)
          for (int cc = 0; cc < c; ++cc) {
            const std::size_t base = (static_cast<std::size_t>(i) * c + cc) * plane;
            S acc(0);
            for (std::size_t j = 0; j < plane; ++j) acc += dy[base + j];
            dv[static_cast<std::size_t>(i) * c + cc] += acc;
          }
      }
    });
  }

  int concat_ch(int a, int b) {
    const Tensor<S>& av = val(a);
    const Tensor<S>& bv = val(b);
    const int n = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
    require(bv.dim(0) == n && bv.dim(2) == av.dim(2) && bv.dim(3) == av.dim(3),
            "concat_ch: spatial/batch dims must match");
    const std::size_t plane = static_cast<std::size_t>(av.dim(2)) * av.dim(3);
    Tensor<S> y({n, ca + cb, av.dim(2), av.dim(3)});
    for (int i = 0; i < n; ++i) {
      std::copy_n(av.data() + static_cast<std::size_t>(i) * ca * plane, ca * plane,
                  y.data() + static_cast<std::size_t>(i) * (ca + cb) * plane);
      std::copy_n(bv.data() + static_cast<std::size_t>(i) * cb * plane, cb * plane,
                  y.data() + (static_cast<std::size_t>(i) * (ca + cb) + ca) * plane);
    }
    return emit(std::move(y), {a, b}, [a, b, n, ca, cb, plane](Graph& g, int self) {
      const Tensor<S>& dy = g.grad(self);
      for (int i = 0; i < n; ++i) {
        if (g.requires_grad(a)) {
          Tensor<S>& da = g.grad(a);
          const std::size_t src = static_cast<std::size_t>(i) * (ca + cb) * plane;
          const std::size_t dst = static_cast<std::size_t>(i) * ca * plane;
          for (std::size_t j = 0; j < static_cast<std::size_t>(ca) * plane; ++j)
            da[dst + j] += dy[src + j];
        }
        if (g.requires_grad(b)) {
          Tensor<S>& db = g.grad(b);
          const std::size_t src = (static_cast<std::size_t>(i) * (ca + cb) + ca) * plane;
          const std::size_t dst = static_cast<std::size_t>(i) * cb * plane;
          for (std::size_t j = 0; j < static_cast<std::size_t>(cb) * plane; ++j)
            db[dst + j] += dy[src + j];
        }
      }
    });
  }

  int upsample_nearest2(int x) {
    Tensor<S> y = kernels::upsample_nearest2_forward(val(x));
    return emit(std::move(y), {x}, [x](Graph& g, int self) {
      if (!g.requires_grad(x)) return;
      kernels::upsample_nearest2_backward(g.grad(self), &g.grad(x));
    });
  }

  // y = scale * x + shift (shift may be empty).
  int affine(int x, double scale, Tensor<S> shift = {}) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.shape());
    const S a = static_cast<S>(scale);
    if (shift.empty()) {
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = a * xv[i];
    } else {
      check_same_shape(xv, shift, "affine shift");
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = a * xv[i] + shift[i];
    }
    return emit(std::move(y), {x}, [x, a](Graph& g, int self) {
      if (!g.requires_grad(x)) return;
      const Tensor<S>& dy = g.grad(self);
      Tensor<S>& dx = g.grad(x);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += a * dy[i];
    });
  }

  // Mean squared error against a constant target; returns a scalar node.
  int mse_const(int x, Tensor<S> target) {
    const Tensor<S>& xv = val(x);
    check_same_shape(xv, target, "mse_const");
    auto tgt = std::make_shared<Tensor<S>>(std::move(target));
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double d = static_cast<double>(xv[i]) - static_cast<double>((*tgt)[i]);
      acc += d * d;
    }
    Tensor<S> y({1});
    y[0] = static_cast<S>(acc / static_cast<double>(xv.size()));
    return emit(std::move(y), {x}, [x, tgt](Graph& g, int self) {
      if (!g.requires_grad(x)) return;
      const S dl = g.grad(self)[0];
      const Tensor<S>& xv = g.val(x);
      Tensor<S>& dx = g.grad(x);
      const S scale = S(2) / static_cast<S>(xv.size());
      for (std::size_t i = 0; i < xv.size(); ++i)
        dx[i] += dl * scale * (xv[i] - (*tgt)[i]);
    });
  }

  // sum(mask * (x - target)^2) / denom. The mask is (n, h, w) or (h, w) and is
  // broadcast across channels; denom is supplied by the caller (total masked
  // elements across the batch, times channels).
  int masked_sq_const(int x, Tensor<S> target, Tensor<S> mask, double denom) {
    const Tensor<S>& xv = val(x);
    check_same_shape(xv, target, "masked_sq_const");
    const int n = xv.dim(0), c = xv.dim(1);
    const std::size_t plane = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
    require(mask.size() == static_cast<std::size_t>(n) * plane,
            "masked_sq_const: mask must hold batch x spatial elements");
    require(denom > 0.0, "masked_sq_const: denom must be positive");
    auto tgt = std::make_shared<Tensor<S>>(std::move(target));
    auto msk = std::make_shared<Tensor<S>>(std::move(mask));
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int cc = 0; cc < c; ++cc) {
        const std::size_t base = (static_cast<std::size_t>(i) * c + cc) * plane;
        const std::size_t mbase = static_cast<std::size_t>(i) * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          const double d = static_cast<double>(xv[base + j]) - static_cast<double>((*tgt)[base + j]);
          acc += static_cast<double>((*msk)[mbase + j]) * d * d;
        }
      }
    Tensor<S> y({1});
    y[0] = static_cast<S>(acc / denom);
    return emit(std::move(y), {x}, [x, tgt, msk, denom, n, c, plane](Graph& g, int self) {
      if (!g.requires_grad(x)) return;
      const S dl = g.grad(self)[0];
      const Tensor<S>& xv = g.val(x);
      Tensor<S>& dx = g.grad(x);
      const S scale = static_cast<S>(2.0 / denom);
      for (int i = 0; i < n; ++i)
        for (int cc = 0; cc < c; ++cc) {
          const std::size_t base = (static_cast<std::size_t>(i) * c + cc) * plane;
          const std::size_t mbase = static_cast<std::size_t>(i) * plane;
          for (std::size_t j = 0; j < plane; ++j)
            dx[base + j] += dl * scale * (*msk)[mbase + j] * (xv[base + j] - (*tgt)[base + j]);
        }
    });
  }

  // Weighted sum of scalar nodes.
  int wsum(const std::vector<std::pair<int, double>>& terms) {
    double acc = 0.0;
    for (const auto& [id, wgt] : terms) {
      require(val(id).size() == 1, "wsum: term must be scalar");
      acc += wgt * static_cast<double>(val(id)[0]);
    }
    Tensor<S> y({1});
    y[0] = static_cast<S>(acc);
    std::vector<int> parents;
    for (const auto& [id, wgt] : terms) parents.push_back(id);
    auto ts = std::make_shared<std::vector<std::pair<int, double>>>(terms);
    return emit(std::move(y), parents, [ts](Graph& g, int self) {
      const S dl = g.grad(self)[0];
      for (const auto& [id, wgt] : *ts)
        if (g.requires_grad(id)) g.grad(id)[0] += dl * static_cast<S>(wgt);
    });
  }

  // Vector quantization with a straight-through gradient: the forward output
  // is the nearest codebook row per latent vector, the backward pass copies
  // the output gradient to z unchanged. The codebook receives no gradient
  // through this op.
  int vq_straight_through(int z, const Tensor<S>& codebook, std::vector<int>* indices_out) {
    const Tensor<S>& zv = val(z);
    const int n = zv.dim(0), c = zv.dim(1), h = zv.dim(2), w = zv.dim(3);
    const int K = codebook.dim(0);
    require(codebook.rank() == 2 && codebook.dim(1) == c, "vq: codebook must be (K, ", c, ")");
    Tensor<S> y(zv.shape());
    if (indices_out) indices_out->assign(static_cast<std::size_t>(n) * h * w, 0);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < plane; ++j) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
          double d = 0.0;
          for (int cc = 0; cc < c; ++cc) {
            const double diff =
                static_cast<double>(zv[(static_cast<std::size_t>(i) * c + cc) * plane + j]) -
                static_cast<double>(codebook[static_cast<std::size_t>(k) * c + cc]);
            d += diff * diff;
          }
          if (d < best_d) {  // ties keep the lowest index
            best_d = d;
            best = k;
          }
        }
        if (indices_out) (*indices_out)[static_cast<std::size_t>(i) * plane + j] = best;
        for (int cc = 0; cc < c; ++cc)
          y[(static_cast<std::size_t>(i) * c + cc) * plane + j] =
              codebook[static_cast<std::size_t>(best) * c + cc];
      }
    return emit(std::move(y), {z}, [z](Graph& g, int self) {
      if (!g.requires_grad(z)) return;
      const Tensor<S>& dy = g.grad(self);
      Tensor<S>& dz = g.grad(z);
      for (std::size_t i = 0; i < dy.size(); ++i) dz[i] += dy[i];
    });
  }

  // mean over all elements of ||codebook[idx] - z||^2; gradient flows into the
  // codebook rows only (z is captured as a constant snapshot).
  int vq_codebook_loss(int codebook, const Tensor<S>& z_const, const std::vector<int>& indices) {
    const Tensor<S>& cb = val(codebook);
    const int c = cb.dim(1);
    const int n = z_const.dim(0), h = z_const.dim(2), w = z_const.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    auto zc = std::make_shared<Tensor<S>>(z_const);
    auto idx = std::make_shared<std::vector<int>>(indices);
    const double count = static_cast<double>(z_const.size());
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < plane; ++j) {
        const int k = (*idx)[static_cast<std::size_t>(i) * plane + j];
        for (int cc = 0; cc < c; ++cc) {
          const double d =
              static_cast<double>(cb[static_cast<std::size_t>(k) * c + cc]) -
              static_cast<double>((*zc)[(static_cast<std::size_t>(i) * c + cc) * plane + j]);
          acc += d * d;
        }
      }
    Tensor<S> y({1});
    y[0] = static_cast<S>(acc / count);
    return emit(std::move(y), {codebook}, [codebook, zc, idx, count, n, c, plane](Graph& g, int self) {
      if (!g.requires_grad(codebook)) return;
      const S dl = g.grad(self)[0];
      const Tensor<S>& cb = g.val(codebook);
      Tensor<S>& dcb = g.grad(codebook);
      const S scale = static_cast<S>(2.0 / count);
      for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < plane; ++j) {
          const int k = (*idx)[static_cast<std::size_t>(i) * plane + j];
          for (int cc = 0; cc < c; ++cc)
            dcb[static_cast<std::size_t>(k) * c + cc] +=
                dl * scale *
                (cb[static_cast<std::size_t>(k) * c + cc] -
                 (*zc)[(static_cast<std::size_t>(i) * c + cc) * plane + j]);
        }
    });
  }

 private:
  struct Node {
    Tensor<S> val;
    Tensor<S> grad;
    bool req = false;
    bool grad_alloc = false;
    std::function<void(Graph&)> back;
  };

  int emit(Tensor<S> y, const std::vector<int>& parents,
           std::function<void(Graph&, int)> back) {
    bool req = false;
    for (int p : parents) req = req || requires_grad(p);
    const int id = static_cast<int>(nodes_.size());
    std::function<void(Graph&)> bound;
    if (req) bound = [back = std::move(back), id](Graph& g) { back(g, id); };
    nodes_.push_back(Node{std::move(y), {}, req, false, std::move(bound)});
    return id;
  }

  std::vector<Node> nodes_;
};

}  // namespace lapt
