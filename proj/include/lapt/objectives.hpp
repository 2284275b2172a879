// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "lapt/common.hpp"
#include "lapt/tensor.hpp"

namespace lapt {

struct LossWeights {
  double lambda_image = 0.01;
  double lambda_lesion = 0.02;
};

inline void validate(const LossWeights& w) {
  require<ConfigError>(std::isfinite(w.lambda_image) && w.lambda_image >= 0.0,
                       "lambda_image must be finite and >= 0, got ", w.lambda_image);
  require<ConfigError>(std::isfinite(w.lambda_lesion) && w.lambda_lesion >= 0.0,
                       "lambda_lesion must be finite and >= 0, got ", w.lambda_lesion);
}

struct LossBreakdown {
  double latent = 0.0;
  double image = 0.0;
  double lesion = 0.0;
  double total = 0.0;
};

template <typename S>
void check_binary_mask(const Tensor<S>& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i)
    require(mask[i] == S(0) || mask[i] == S(1), "mask must be binary (0/1), found ",
            static_cast<double>(mask[i]));
}

// Mean squared error over all elements (noise-prediction objective).
template <typename S>
double latent_loss(const Tensor<S>& eps, const Tensor<S>& eps_hat) {
  check_same_shape(eps, eps_hat, "latent_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double d = static_cast<double>(eps_hat[i]) - static_cast<double>(eps[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(eps.size());
}

// Mean squared error between the target image and the decoded one-step
// estimate (supplied by the caller).
template <typename S>
double image_loss(const Tensor<S>& x, const Tensor<S>& x_hat) {
  check_same_shape(x, x_hat, "image_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x_hat[i]) - static_cast<double>(x[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

// Squared error restricted to mask pixels, normalized by masked element count
// (mask sum times channels). An empty mask contributes 0; most slices carry no
// lesion. x and x_hat are (m, H, W); the mask is (H, W), broadcast over m.
template <typename S>
double lesion_loss(const Tensor<S>& x, const Tensor<S>& x_hat, const Tensor<S>& mask) {
  check_same_shape(x, x_hat, "lesion_loss");
  require(x.rank() == 3, "lesion_loss: expected (channels, h, w) images, got rank ", x.rank());
  require(mask.rank() == 2 && mask.dim(0) == x.dim(1) && mask.dim(1) == x.dim(2),
          "lesion_loss: mask shape ", shape_str(mask), " must match image spatial dims (",
          x.dim(1), ",", x.dim(2), ")");
  check_binary_mask(mask);
  const int m = x.dim(0);
  const std::size_t plane = mask.size();
  double mask_sum = 0.0;
  for (std::size_t i = 0; i < plane; ++i) mask_sum += static_cast<double>(mask[i]);
  if (mask_sum == 0.0) return 0.0;
  double acc = 0.0;
  for (int c = 0; c < m; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      const double d =
          static_cast<double>(x_hat[c * plane + i]) - static_cast<double>(x[c * plane + i]);
      acc += static_cast<double>(mask[i]) * d * d;
    }
  return acc / (mask_sum * m);
}

// total = latent + lambda_image * image + lambda_lesion * lesion.
inline LossBreakdown total_loss(double latent, double image, double lesion,
                                const LossWeights& w) {
  validate(w);
  LossBreakdown b;
  b.latent = latent;
  b.image = image;
  b.lesion = lesion;
  b.total = latent + w.lambda_image * image + w.lambda_lesion * lesion;
  return b;
}

}  // namespace lapt
