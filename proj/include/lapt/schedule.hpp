// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapt/common.hpp"

namespace lapt {

// Per-timestep beta/alpha/alpha_bar tables for t = 1..T. Arrays are kept in
// double precision; index 0 corresponds to t = 1. alpha_bar(0) is defined
// as 1 so the terminal reverse step collapses to the clean estimate.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  // Descriptor fields, kept for serialization.
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::string kind = "linear";

  double get_alpha_bar(int t) const {
    require(t >= 0 && t <= T, "timestep ", t, " out of range [0, ", T, "]");
    return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 1)];
  }

  double get_beta(int t) const {
    require(t >= 1 && t <= T, "timestep ", t, " out of range [1, ", T, "]");
    return beta[static_cast<std::size_t>(t - 1)];
  }

  double get_alpha(int t) const {
    require(t >= 1 && t <= T, "timestep ", t, " out of range [1, ", T, "]");
    return alpha[static_cast<std::size_t>(t - 1)];
  }
};

inline NoiseSchedule make_schedule(int T, double beta_start, double beta_end,
                                   const std::string& kind = "linear") {
  require<ConfigError>(T >= 1, "schedule T must be >= 1, got ", T);
  require<ConfigError>(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
                       "betas must satisfy 0 < beta_start <= beta_end < 1, got [", beta_start,
                       ", ", beta_end, "]");
  require<ConfigError>(kind == "linear", "unknown schedule kind \"", kind, "\"");

  NoiseSchedule s;
  s.T = T;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.kind = kind;
  s.beta.resize(static_cast<std::size_t>(T));
  s.alpha.resize(static_cast<std::size_t>(T));
  s.alpha_bar.resize(static_cast<std::size_t>(T));
  double prod = 1.0;
  for (int t = 1; t <= T; ++t) {
    double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
    double b = beta_start + (beta_end - beta_start) * frac;
    std::size_t i = static_cast<std::size_t>(t - 1);
    s.beta[i] = b;
    s.alpha[i] = 1.0 - b;
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  return s;
}

// Checkpoints persist only the descriptor; the tables are recomputed on load
// and cross-checked against the stored terminal alpha_bar.
inline nlohmann::json schedule_to_json(const NoiseSchedule& s) {
  return nlohmann::json{{"T", s.T},
                        {"beta_start", s.beta_start},
                        {"beta_end", s.beta_end},
                        {"kind", s.kind},
                        {"alpha_bar_T", s.get_alpha_bar(s.T)}};
}

inline NoiseSchedule schedule_from_json(const nlohmann::json& j) {
  require<FormatError>(j.contains("T") && j.contains("beta_start") && j.contains("beta_end") &&
                           j.contains("kind"),
                       "schedule descriptor missing fields");
  NoiseSchedule s = make_schedule(j.at("T").get<int>(), j.at("beta_start").get<double>(),
                                  j.at("beta_end").get<double>(), j.at("kind").get<std::string>());
  if (j.contains("alpha_bar_T")) {
    double stored = j.at("alpha_bar_T").get<double>();
    double recomputed = s.get_alpha_bar(s.T);
    require<FormatError>(std::abs(stored - recomputed) <= 1e-12 * std::max(std::abs(stored), 1e-300),
                         "schedule alpha_bar_T mismatch: stored ", stored, ", recomputed ",
                         recomputed);
  }
  return s;
}

}  // namespace lapt
