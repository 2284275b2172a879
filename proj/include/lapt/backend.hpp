// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "lapt/diffusion.hpp"
#include "lapt/schedule.hpp"
#include "lapt/tensor.hpp"

namespace lapt {

// Abstraction over the latent corruption process so the post-training stage
// is not tied to the DDPM forward process. A backend must satisfy the
// round-trip law estimate_clean(perturb(z0, t, n), model_target(z0, n, t), t) == z0.
template <typename S>
class LatentProcessBackend {
 public:
  virtual ~LatentProcessBackend() = default;
  virtual std::string name() const = 0;
  virtual Tensor<S> perturb(const Tensor<S>& z0, int t, const Tensor<S>& noise) const = 0;
  virtual Tensor<S> model_target(const Tensor<S>& z0, const Tensor<S>& noise, int t) const = 0;
  virtual Tensor<S> estimate_clean(const Tensor<S>& z_t, const Tensor<S>& model_out,
                                   int t) const = 0;
  // Coefficients of the clean estimate as an affine map of the model output,
  // z0_hat = scale * model_out + shift(z_t), used to build the training graph.
  virtual void clean_estimate_coeffs(int t, double* scale, double* shift_zt) const = 0;
};

// Standard epsilon-prediction DDPM process.
template <typename S>
class DdpmBackend final : public LatentProcessBackend<S> {
 public:
  explicit DdpmBackend(NoiseSchedule sched) : sched_(std::move(sched)) {}

  std::string name() const override { return "ddpm"; }

  Tensor<S> perturb(const Tensor<S>& z0, int t, const Tensor<S>& noise) const override {
    return q_sample(z0, t, noise, sched_);
  }

  Tensor<S> model_target(const Tensor<S>&, const Tensor<S>& noise, int) const override {
    return noise;
  }

  Tensor<S> estimate_clean(const Tensor<S>& z_t, const Tensor<S>& model_out,
                           int t) const override {
    return predict_z0(z_t, model_out, t, sched_);
  }

  void clean_estimate_coeffs(int t, double* scale, double* shift_zt) const override {
    const double abar = sched_.get_alpha_bar(t);
    *scale = -std::sqrt(1.0 - abar) / std::sqrt(abar);
    *shift_zt = 1.0 / std::sqrt(abar);
  }

  const NoiseSchedule& schedule() const { return sched_; }

 private:
  NoiseSchedule sched_;
};

}  // namespace lapt
