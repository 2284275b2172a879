// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "lapt/common.hpp"
#include "lapt/rng.hpp"
#include "lapt/schedule.hpp"
#include "lapt/tensor.hpp"

namespace lapt {

// Forward perturbation: z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
template <typename S>
Tensor<S> q_sample(const Tensor<S>& z0, int t, const Tensor<S>& eps, const NoiseSchedule& sched) {
  require(t >= 1 && t <= sched.T, "q_sample: t ", t, " out of range [1, ", sched.T, "]");
  check_same_shape(z0, eps, "q_sample");
  const S a = static_cast<S>(std::sqrt(sched.get_alpha_bar(t)));
  const S b = static_cast<S>(std::sqrt(1.0 - sched.get_alpha_bar(t)));
  Tensor<S> out(z0.shape());
  for (std::size_t i = 0; i < z0.size(); ++i) out[i] = a * z0[i] + b * eps[i];
  return out;
}

// One-step clean-latent estimate: z0_hat = (z_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t).
// Exact algebraic inverse of q_sample for the supplied eps_hat.
template <typename S>
Tensor<S> predict_z0(const Tensor<S>& z_t, const Tensor<S>& eps_hat, int t,
                     const NoiseSchedule& sched) {
  require(t >= 1 && t <= sched.T, "predict_z0: t ", t, " out of range [1, ", sched.T, "]");
  check_same_shape(z_t, eps_hat, "predict_z0");
  const S inv_a = static_cast<S>(1.0 / std::sqrt(sched.get_alpha_bar(t)));
  const S b = static_cast<S>(std::sqrt(1.0 - sched.get_alpha_bar(t)));
  Tensor<S> out(z_t.shape());
  for (std::size_t i = 0; i < z_t.size(); ++i) out[i] = (z_t[i] - b * eps_hat[i]) * inv_a;
  return out;
}

// One DDIM update from t to t_prev (t_prev may be 0, with abar_0 := 1):
//   out = sqrt(abar_prev) z0_hat + sqrt(1 - abar_prev - sigma^2) eps_hat + sigma noise
//   sigma = eta sqrt((1 - abar_prev) / (1 - abar_t)) sqrt(1 - abar_t / abar_prev)
template <typename S>
Tensor<S> ddim_step(const Tensor<S>& z_t, const Tensor<S>& eps_hat, int t, int t_prev, double eta,
                    const NoiseSchedule& sched, const Tensor<S>* noise = nullptr) {
  require(t >= 1 && t <= sched.T, "ddim_step: t ", t, " out of range [1, ", sched.T, "]");
  require(t_prev >= 0 && t_prev < t, "ddim_step: t_prev ", t_prev, " must be in [0, ", t, ")");
  require(eta >= 0.0 && eta <= 1.0, "ddim_step: eta ", eta, " must be in [0, 1]");
  require(!(eta > 0.0) || noise != nullptr, "ddim_step: noise required when eta > 0");
  require(!(eta == 0.0) || noise == nullptr, "ddim_step: noise must be omitted when eta == 0");
  check_same_shape(z_t, eps_hat, "ddim_step");
  if (noise) check_same_shape(z_t, *noise, "ddim_step noise");

  const double abar_t = sched.get_alpha_bar(t);
  const double abar_prev = sched.get_alpha_bar(t_prev);
  const double sigma =
      eta * std::sqrt((1.0 - abar_prev) / (1.0 - abar_t)) * std::sqrt(1.0 - abar_t / abar_prev);

  Tensor<S> z0_hat = predict_z0(z_t, eps_hat, t, sched);
  const S c0 = static_cast<S>(std::sqrt(abar_prev));
  const S c1 = static_cast<S>(std::sqrt(std::max(0.0, 1.0 - abar_prev - sigma * sigma)));
  const S cs = static_cast<S>(sigma);
  Tensor<S> out(z_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = c0 * z0_hat[i] + c1 * eps_hat[i];
    if (noise) out[i] += cs * (*noise)[i];
  }
  return out;
}

// Evenly spaced increasing timestep subsequence of length n_steps over [1, T],
// including T, rounding down. n_steps == T visits every timestep once.
inline std::vector<int> timestep_subsequence(int T, int n_steps) {
  require(n_steps >= 1 && n_steps <= T, "n_steps ", n_steps, " must be in [1, ", T, "]");
  std::vector<int> ts(static_cast<std::size_t>(n_steps));
  for (int i = 0; i < n_steps; ++i) {
    ts[static_cast<std::size_t>(i)] = static_cast<int>(
        (static_cast<std::int64_t>(T) * (i + 1)) / n_steps);
  }
  return ts;
}

// Full DDIM sampler. Starts from standard-normal z_T drawn with rng_seed and
// walks the subsequence down to t_prev = 0. The denoiser is any callable
// (z_t, t, condition) -> eps_hat.
template <typename S, typename Cond>
Tensor<S> sample(const std::function<Tensor<S>(const Tensor<S>&, int, const Cond&)>& denoiser,
                 const Cond& condition, const std::vector<int>& latent_shape,
                 const NoiseSchedule& sched, int n_steps, double eta, std::uint64_t rng_seed) {
  require(n_steps >= 1 && n_steps <= sched.T, "sample: n_steps ", n_steps, " must be in [1, ",
          sched.T, "]");
  Rng rng(rng_seed);
  Tensor<S> z = Tensor<S>::randn(latent_shape, rng);
  std::vector<int> ts = timestep_subsequence(sched.T, n_steps);
  for (int i = n_steps - 1; i >= 0; --i) {
    const int t = ts[static_cast<std::size_t>(i)];
    const int t_prev = i > 0 ? ts[static_cast<std::size_t>(i - 1)] : 0;
    Tensor<S> eps_hat = denoiser(z, t, condition);
    require<ContractError>(eps_hat.same_shape(z), "sample: denoiser returned shape ",
                           shape_str(eps_hat), ", expected ", shape_str(z));
    if (eta > 0.0) {
      Tensor<S> noise = Tensor<S>::randn(z.shape(), rng);
      z = ddim_step(z, eps_hat, t, t_prev, eta, sched, &noise);
    } else {
      z = ddim_step(z, eps_hat, t, t_prev, eta, sched);
    }
  }
  return z;
}

}  // namespace lapt
