// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "lapt/autodiff.hpp"
#include "lapt/nn.hpp"

namespace lapt {

struct DenoiserConfig {
  int latent_channels = 4;
  int cond_image_channels = 5;  // n source time points
  int cond_channels = 5;        // k after the 1x1 rescaler mix; defaults to n
  int base_width = 32;
  int groups = 8;
  int time_embed_dim = 128;
};

// Time-conditional UNet predicting the injected noise, plus the spatial
// rescaler (fixed bilinear downsample followed by a learned 1x1 channel mix)
// that aligns the source stack to latent resolution. Three resolution levels
// with widths (B, 2B, 4B), residual blocks with group normalization, and a
// sinusoidal time embedding injected into every block. Attention is omitted.
template <typename S>
class CondUnet {
 public:
  DenoiserConfig cfg;
  ParamSet<S> params;

  static CondUnet init(const DenoiserConfig& cfg, std::uint64_t seed) {
    require<ConfigError>(cfg.base_width % cfg.groups == 0, "denoiser base_width ", cfg.base_width,
                         " must be divisible by groups ", cfg.groups);
    CondUnet u;
    u.cfg = cfg;
    Rng rng(mix_seed(seed, 0xD0));
    auto& p = u.params;
    const int B = cfg.base_width, c = cfg.latent_channels;
    const int dt = cfg.time_embed_dim;

    p.add("rescale.w", init::conv_weight<S>(cfg.cond_channels, cfg.cond_image_channels, 1, rng));
    p.add("rescale.b", Tensor<S>::zeros({cfg.cond_channels}));

    p.add("temb.fc1.w", init::linear_weight<S>(dt, B, rng));
    p.add("temb.fc1.b", Tensor<S>::zeros({dt}));
    p.add("temb.fc2.w", init::linear_weight<S>(dt, dt, rng));
    p.add("temb.fc2.b", Tensor<S>::zeros({dt}));

    p.add("conv_in.w", init::conv_weight<S>(B, c + cfg.cond_channels, 3, rng));
    p.add("conv_in.b", Tensor<S>::zeros({B}));

    u.add_resblock(rng, "down0", B, B);
    p.add("down1.w", init::conv_weight<S>(B, B, 3, rng));
    p.add("down1.b", Tensor<S>::zeros({B}));
    u.add_resblock(rng, "enc1", B, 2 * B);
    p.add("down2.w", init::conv_weight<S>(2 * B, 2 * B, 3, rng));
    p.add("down2.b", Tensor<S>::zeros({2 * B}));
    u.add_resblock(rng, "enc2", 2 * B, 4 * B);
    u.add_resblock(rng, "mid", 4 * B, 4 * B);
    p.add("upc2.w", init::conv_weight<S>(2 * B, 4 * B, 3, rng));
    p.add("upc2.b", Tensor<S>::zeros({2 * B}));
    u.add_resblock(rng, "dec1", 4 * B, 2 * B);  // input is concat(up, skip)
    p.add("upc1.w", init::conv_weight<S>(B, 2 * B, 3, rng));
    p.add("upc1.b", Tensor<S>::zeros({B}));
    u.add_resblock(rng, "dec0", 2 * B, B);

    p.add("out.norm.g", Tensor<S>::full({B}, S(1)));
    p.add("out.norm.b", Tensor<S>::zeros({B}));
    // Zero-initialized head: the model starts as the identity of the noise-free
    // prediction, which keeps early training stable.
    p.add("out.conv.w", Tensor<S>::zeros({c, B, 3, 3}));
    p.add("out.conv.b", Tensor<S>::zeros({c}));
    return u;
  }

  // Bilinear downsample to (h, w), then the learned 1x1 mix. Forward-only.
  Tensor<S> rescale_condition(const Tensor<S>& cond_image, int h, int w) const {
    require(cond_image.rank() == 3, "rescale_condition: expected (channels, H, W) source");
    require(cond_image.dim(0) == cfg.cond_image_channels, "rescale_condition: expected ",
            cfg.cond_image_channels, " source channels, got ", cond_image.dim(0));
    Graph<S> g;
    ParamNodes<S> pn = ParamNodes<S>::leaves(g, params, false);
    int out = rescale_graph(
        g, cond_image.reshaped({1, cond_image.dim(0), cond_image.dim(1), cond_image.dim(2)}), h, w,
        pn);
    const auto& ov = g.val(out);
    return ov.reshaped({ov.dim(1), ov.dim(2), ov.dim(3)});
  }

  // The bilinear stage runs outside the tape (its input never needs
  // gradients); the 1x1 mix is a tape op so the rescaler trains jointly.
  int rescale_graph(Graph<S>& g, const Tensor<S>& cond_image_batch, int h, int w,
                    const ParamNodes<S>& pn) const {
    require(h <= cond_image_batch.dim(2) && w <= cond_image_batch.dim(3),
            "rescale_condition: target (", h, ",", w, ") must not exceed source (",
            cond_image_batch.dim(2), ",", cond_image_batch.dim(3), ")");
    Tensor<S> small = kernels::bilinear_resize(cond_image_batch, h, w);
    int in = g.input(std::move(small));
    return g.conv2d(in, id(pn, "rescale.w"), id(pn, "rescale.b"), {1, 0});
  }

  // eps_hat for a batch; z_t (n, c, h, w), cond (n, k, h, w), one t per sample.
  int forward_graph(Graph<S>& g, int z_t, int cond, const std::vector<int>& ts,
                    const ParamNodes<S>& pn) const {
    const auto& zv = g.val(z_t);
    const auto& cv = g.val(cond);
    require(zv.dim(2) == cv.dim(2) && zv.dim(3) == cv.dim(3),
            "predict_eps: latent and condition spatial dims differ: ", shape_str(zv), " vs ",
            shape_str(cv));
    require(zv.dim(0) == static_cast<int>(ts.size()), "predict_eps: need one timestep per sample");
    require(zv.dim(2) % 4 == 0 && zv.dim(3) % 4 == 0,
            "predict_eps: latent dims must be divisible by 4 for the 3-level UNet");

    // Time embedding MLP.
    int te = g.input(kernels::sinusoidal_embedding<S>(ts, cfg.base_width));
    te = g.linear(te, id(pn, "temb.fc1.w"), id(pn, "temb.fc1.b"));
    te = g.silu(te);
    te = g.linear(te, id(pn, "temb.fc2.w"), id(pn, "temb.fc2.b"));

    int x = g.concat_ch(z_t, cond);
    int h0 = g.conv2d(x, id(pn, "conv_in.w"), id(pn, "conv_in.b"), {1, 1});
    int h1 = resblock(g, "down0", h0, te, pn);
    int d1 = g.conv2d(h1, id(pn, "down1.w"), id(pn, "down1.b"), {2, 1});
    int h2 = resblock(g, "enc1", d1, te, pn);
    int d2 = g.conv2d(h2, id(pn, "down2.w"), id(pn, "down2.b"), {2, 1});
    int h3 = resblock(g, "enc2", d2, te, pn);
    int m = resblock(g, "mid", h3, te, pn);
    int u2 = g.upsample_nearest2(m);
    u2 = g.conv2d(u2, id(pn, "upc2.w"), id(pn, "upc2.b"), {1, 1});
    int c2 = g.concat_ch(u2, h2);
    int h4 = resblock(g, "dec1", c2, te, pn);
    int u1 = g.upsample_nearest2(h4);
    u1 = g.conv2d(u1, id(pn, "upc1.w"), id(pn, "upc1.b"), {1, 1});
    int c1 = g.concat_ch(u1, h1);
    int h5 = resblock(g, "dec0", c1, te, pn);
    int out = g.group_norm(h5, id(pn, "out.norm.g"), id(pn, "out.norm.b"), cfg.groups);
    out = g.silu(out);
    return g.conv2d(out, id(pn, "out.conv.w"), id(pn, "out.conv.b"), {1, 1});
  }

  // Single-sample convenience: eps_hat = unet(concat(z_t, cond), t).
  Tensor<S> predict_eps(const Tensor<S>& z_t, int t, const Tensor<S>& cond) const {
    require(z_t.rank() == 3 && cond.rank() == 3, "predict_eps: expected (channels, h, w) inputs");
    require(t >= 1, "predict_eps: t must be >= 1, got ", t);
    Graph<S> g;
    ParamNodes<S> pn = ParamNodes<S>::leaves(g, params, false);
    int z = g.input(z_t.reshaped({1, z_t.dim(0), z_t.dim(1), z_t.dim(2)}));
    int c = g.input(cond.reshaped({1, cond.dim(0), cond.dim(1), cond.dim(2)}));
    int out = forward_graph(g, z, c, {t}, pn);
    const auto& ov = g.val(out);
    return ov.reshaped({ov.dim(1), ov.dim(2), ov.dim(3)});
  }

 private:
  void add_resblock(Rng& rng, const std::string& name, int cin, int cout) {
    auto& p = params;
    p.add(name + ".norm1.g", Tensor<S>::full({cin}, S(1)));
    p.add(name + ".norm1.b", Tensor<S>::zeros({cin}));
    p.add(name + ".conv1.w", init::conv_weight<S>(cout, cin, 3, rng));
    p.add(name + ".conv1.b", Tensor<S>::zeros({cout}));
    p.add(name + ".temb.w", init::linear_weight<S>(cout, cfg.time_embed_dim, rng));
    p.add(name + ".temb.b", Tensor<S>::zeros({cout}));
    p.add(name + ".norm2.g", Tensor<S>::full({cout}, S(1)));
    p.add(name + ".norm2.b", Tensor<S>::zeros({cout}));
    p.add(name + ".conv2.w", init::conv_weight<S>(cout, cout, 3, rng));
    p.add(name + ".conv2.b", Tensor<S>::zeros({cout}));
    if (cin != cout) {
      p.add(name + ".skip.w", init::conv_weight<S>(cout, cin, 1, rng));
      p.add(name + ".skip.b", Tensor<S>::zeros({cout}));
    }
  }

  int resblock(Graph<S>& g, const std::string& name, int x, int te,
               const ParamNodes<S>& pn) const {
    const int cin = g.val(x).dim(1);
    int h = g.group_norm(x, id(pn, name + ".norm1.g"), id(pn, name + ".norm1.b"), cfg.groups);
    h = g.silu(h);
    h = g.conv2d(h, id(pn, name + ".conv1.w"), id(pn, name + ".conv1.b"), {1, 1});
    int tproj = g.linear(te, id(pn, name + ".temb.w"), id(pn, name + ".temb.b"));
    h = g.add_channel_bias(h, tproj);
    h = g.group_norm(h, id(pn, name + ".norm2.g"), id(pn, name + ".norm2.b"), cfg.groups);
    h = g.silu(h);
    h = g.conv2d(h, id(pn, name + ".conv2.w"), id(pn, name + ".conv2.b"), {1, 1});
    int skip = x;
    if (params.has(name + ".skip.w"))
      skip = g.conv2d(x, id(pn, name + ".skip.w"), id(pn, name + ".skip.b"), {1, 0});
    else
      require(g.val(x).dim(1) == g.val(h).dim(1), "resblock ", name, ": width mismatch ", cin);
    return g.add(h, skip);
  }

  int id(const ParamNodes<S>& pn, std::string_view name) const { return pn[params.index(name)]; }
};

}  // namespace lapt
