// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "lapt/autodiff.hpp"
#include "lapt/nn.hpp"

namespace lapt {

inline constexpr int kDownsampleFactor = 4;

struct AutoencoderConfig {
  int image_channels = 2;
  int base_width = 32;
  int latent_channels = 4;
  bool use_vq = false;
  int codebook_size = 256;
  double commitment_beta = 0.25;
};

// Strided convolutional encoder (two 2x downsampling stages, fixed overall
// factor 4) and mirrored decoder with a saturating tanh output. Optional
// vector-quantization bottleneck.
template <typename S>
class ConvAutoencoder {
 public:
  AutoencoderConfig cfg;
  ParamSet<S> params;

  static ConvAutoencoder init(const AutoencoderConfig& cfg, std::uint64_t seed) {
    ConvAutoencoder ae;
    ae.cfg = cfg;
    Rng rng(mix_seed(seed, 0x0AE));
    const int m = cfg.image_channels, w = cfg.base_width, c = cfg.latent_channels;
    auto& p = ae.params;
    p.add("enc.conv_in.w", init::conv_weight<S>(w, m, 3, rng));
    p.add("enc.conv_in.b", Tensor<S>::zeros({w}));
    p.add("enc.down1.w", init::conv_weight<S>(w, w, 3, rng));
    p.add("enc.down1.b", Tensor<S>::zeros({w}));
    p.add("enc.down2.w", init::conv_weight<S>(2 * w, w, 3, rng));
    p.add("enc.down2.b", Tensor<S>::zeros({2 * w}));
    p.add("enc.mix.w", init::conv_weight<S>(2 * w, 2 * w, 3, rng));
    p.add("enc.mix.b", Tensor<S>::zeros({2 * w}));
    p.add("enc.head.w", init::conv_weight<S>(c, 2 * w, 1, rng));
    p.add("enc.head.b", Tensor<S>::zeros({c}));
    p.add("dec.stem.w", init::conv_weight<S>(2 * w, c, 1, rng));
    p.add("dec.stem.b", Tensor<S>::zeros({2 * w}));
    p.add("dec.mix.w", init::conv_weight<S>(2 * w, 2 * w, 3, rng));
    p.add("dec.mix.b", Tensor<S>::zeros({2 * w}));
    p.add("dec.up1.w", init::conv_weight<S>(w, 2 * w, 3, rng));
    p.add("dec.up1.b", Tensor<S>::zeros({w}));
    p.add("dec.up2.w", init::conv_weight<S>(w, w, 3, rng));
    p.add("dec.up2.b", Tensor<S>::zeros({w}));
    p.add("dec.conv_out.w", init::conv_weight<S>(m, w, 3, rng));
    p.add("dec.conv_out.b", Tensor<S>::zeros({m}));
    if (cfg.use_vq) {
      Rng crng(mix_seed(seed, 0xC0DE));
      p.add("vq.codebook",
            Tensor<S>::randn({cfg.codebook_size, c}, crng, static_cast<S>(1.0 / std::sqrt(c))));
    }
    return ae;
  }

  // Graph builders; x is (n, m, H, W) with H, W divisible by 4.
  int encode_graph(Graph<S>& g, int x, const ParamNodes<S>& pn) const {
    const auto& xv = g.val(x);
    require(xv.dim(2) % kDownsampleFactor == 0 && xv.dim(3) % kDownsampleFactor == 0,
            "encode: image dims (", xv.dim(2), ",", xv.dim(3), ") must be divisible by ",
            kDownsampleFactor);
    require(xv.dim(1) == cfg.image_channels, "encode: expected ", cfg.image_channels,
            " channels, got ", xv.dim(1));
    int h = g.conv2d(x, id(pn, "enc.conv_in.w"), id(pn, "enc.conv_in.b"), {1, 1});
    h = g.silu(h);
    h = g.conv2d(h, id(pn, "enc.down1.w"), id(pn, "enc.down1.b"), {2, 1});
    h = g.silu(h);
    h = g.conv2d(h, id(pn, "enc.down2.w"), id(pn, "enc.down2.b"), {2, 1});
    h = g.silu(h);
    h = g.conv2d(h, id(pn, "enc.mix.w"), id(pn, "enc.mix.b"), {1, 1});
    h = g.silu(h);
    return g.conv2d(h, id(pn, "enc.head.w"), id(pn, "enc.head.b"), {1, 0});
  }

  int decode_graph(Graph<S>& g, int z, const ParamNodes<S>& pn) const {
    require(g.val(z).dim(1) == cfg.latent_channels, "decode: expected ", cfg.latent_channels,
            " latent channels, got ", g.val(z).dim(1));
    int h = g.conv2d(z, id(pn, "dec.stem.w"), id(pn, "dec.stem.b"), {1, 0});
    h = g.silu(h);
    h = g.conv2d(h, id(pn, "dec.mix.w"), id(pn, "dec.mix.b"), {1, 1});
    h = g.silu(h);
    h = g.upsample_nearest2(h);
    h = g.conv2d(h, id(pn, "dec.up1.w"), id(pn, "dec.up1.b"), {1, 1});
    h = g.silu(h);
    h = g.upsample_nearest2(h);
    h = g.conv2d(h, id(pn, "dec.up2.w"), id(pn, "dec.up2.b"), {1, 1});
    h = g.silu(h);
    h = g.conv2d(h, id(pn, "dec.conv_out.w"), id(pn, "dec.conv_out.b"), {1, 1});
    return g.tanh_(h);
  }

  // Forward-only conveniences over a throwaway graph (single sample, rank 3).
  Tensor<S> encode(const Tensor<S>& x) const {
    require(x.rank() == 3, "encode: expected (channels, h, w) input");
    Graph<S> g;
    ParamNodes<S> pn = ParamNodes<S>::leaves(g, params, false);
    int in = g.input(x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)}));
    int z = encode_graph(g, in, pn);
    const auto& zv = g.val(z);
    return zv.reshaped({zv.dim(1), zv.dim(2), zv.dim(3)});
  }

  Tensor<S> decode(const Tensor<S>& z) const {
    require(z.rank() == 3, "decode: expected (channels, h, w) input");
    Graph<S> g;
    ParamNodes<S> pn = ParamNodes<S>::leaves(g, params, false);
    int in = g.input(z.reshaped({1, z.dim(0), z.dim(1), z.dim(2)}));
    int x = decode_graph(g, in, pn);
    const auto& xv = g.val(x);
    return xv.reshaped({xv.dim(1), xv.dim(2), xv.dim(3)});
  }

  bool has_vq() const { return cfg.use_vq; }

 private:
  int id(const ParamNodes<S>& pn, std::string_view name) const {
    return pn[params.index(name)];
  }
};

// Nearest-codebook-row assignment (Euclidean, ties to the lowest index).
// Returns the quantized grid and the index grid.
template <typename S>
std::pair<Tensor<S>, Tensor<S>> quantize(const Tensor<S>& z, const Tensor<S>& codebook) {
  require(z.rank() == 3, "quantize: expected (channels, h, w) latent");
  require(codebook.rank() == 2 && codebook.dim(0) >= 1, "quantize: codebook must be nonempty (K, c)");
  require(codebook.dim(1) == z.dim(0), "quantize: codebook width ", codebook.dim(1),
          " must equal latent channels ", z.dim(0));
  Graph<S> g;
  int zin = g.input(z.reshaped({1, z.dim(0), z.dim(1), z.dim(2)}));
  std::vector<int> idx;
  int q = g.vq_straight_through(zin, codebook, &idx);
  Tensor<S> indices({z.dim(1), z.dim(2)});
  for (std::size_t i = 0; i < idx.size(); ++i) indices[i] = static_cast<S>(idx[i]);
  return {g.val(q).reshaped({z.dim(0), z.dim(1), z.dim(2)}), indices};
}

}  // namespace lapt
