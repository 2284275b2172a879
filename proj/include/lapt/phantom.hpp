// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapt/common.hpp"
#include "lapt/rng.hpp"
#include "lapt/tensor.hpp"
#include "lapt/tensor_io.hpp"

namespace lapt {

struct PhantomConfig {
  int height = 64;
  int width = 64;
  int n_source_channels = 5;   // source time points
  int m_target_channels = 2;   // [DWI-like, ADC-like]
  double lesion_prevalence = 0.11;

  void validate() const {
    require<ConfigError>(height >= 16 && width >= 16, "phantom image size must be >= 16x16, got ",
                         height, "x", width);
    require<ConfigError>(height % 4 == 0 && width % 4 == 0,
                         "phantom image size must be divisible by 4, got ", height, "x", width);
    require<ConfigError>(lesion_prevalence >= 0.0 && lesion_prevalence <= 1.0,
                         "lesion_prevalence must be in [0, 1], got ", lesion_prevalence);
    require<ConfigError>(n_source_channels >= 2, "need at least 2 source time points");
    require<ConfigError>(m_target_channels == 2, "target is fixed to 2 channels [DWI, ADC]");
  }
};

// One synthetic paired case: a source perfusion stack with a hypoperfusion
// signature, a two-channel target (bright-lesion DWI-like, dark-lesion
// ADC-like), and the binary lesion mask.
struct PhantomCase {
  std::string case_id;
  Tensor<float> source;  // (n, H, W)
  Tensor<float> target;  // (2, H, W)
  Tensor<float> mask;    // (H, W), values in {0, 1}
  long lesion_area_px = 0;

  bool has_lesion() const { return lesion_area_px > 0; }
};

struct DatasetManifest {
  int format_version = 1;
  std::uint64_t seed = 0;
  std::map<std::string, std::vector<std::string>> splits;
  double lesion_prevalence = 0.11;
  int height = 64;
  int width = 64;
  int n_source_channels = 5;
  int m_target_channels = 2;
  std::map<std::string, double> split_prevalence_overrides;
  // Provenance stamped by the CLI.
  std::string config_hash;
};

namespace phantom_detail {

struct Field {
  int h, w;
  std::vector<double> v;
  Field(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }
};

inline void box_blur(Field& f) {
  Field out(f.h, f.w);
  for (int i = 0; i < f.h; ++i)
    for (int j = 0; j < f.w; ++j) {
      double s = 0.0;
      int n = 0;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          int ii = i + di, jj = j + dj;
          if (ii >= 0 && ii < f.h && jj >= 0 && jj < f.w) {
            s += f.at(ii, jj);
            ++n;
          }
        }
      out.at(i, j) = s / n;
    }
  f = out;
}

}  // namespace phantom_detail

// Deterministic pure function of (seed, config).
inline PhantomCase generate_case(std::uint64_t seed, const PhantomConfig& cfg) {
  using phantom_detail::Field;
  cfg.validate();
  Rng rng(mix_seed(seed, 0x9A57));
  const int H = cfg.height, W = cfg.width, n = cfg.n_source_channels;

  // Elliptical brain support with mild per-case jitter.
  const double cy = 0.5 * H * (1.0 + 0.05 * (rng.uniform() - 0.5));
  const double cx = 0.5 * W * (1.0 + 0.05 * (rng.uniform() - 0.5));
  const double ry = H * (0.36 + 0.03 * rng.uniform());
  const double rx = W * (0.30 + 0.03 * rng.uniform());
  const double theta = rng.uniform(-0.25, 0.25);
  const double ct = std::cos(theta), st = std::sin(theta);

  Field brain(H, W);
  long brain_area = 0;
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const double dy = i - cy, dx = j - cx;
      const double u = (ct * dx + st * dy) / rx;
      const double v = (-st * dx + ct * dy) / ry;
      if (u * u + v * v <= 1.0) {
        brain.at(i, j) = 1.0;
        ++brain_area;
      }
    }

  // Smooth low-frequency texture: a seeded sum of Gaussian blobs, standardized
  // over the brain, then split at 0 into two tissue bands (gray/white stand-in).
  Field tex(H, W);
  const int n_blobs = 8;
  for (int b = 0; b < n_blobs; ++b) {
    const double by = rng.uniform(0.2 * H, 0.8 * H);
    const double bx = rng.uniform(0.2 * W, 0.8 * W);
    const double s = rng.uniform(0.10, 0.28) * std::min(H, W);
    const double a = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        const double d2 = (i - by) * (i - by) + (j - bx) * (j - bx);
        tex.at(i, j) += a * std::exp(-d2 / (2.0 * s * s));
      }
  }
  double mu = 0.0, sq = 0.0;
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j)
      if (brain.at(i, j) > 0) {
        mu += tex.at(i, j);
        sq += tex.at(i, j) * tex.at(i, j);
      }
  mu /= std::max<long>(1, brain_area);
  const double sd = std::sqrt(std::max(1e-12, sq / std::max<long>(1, brain_area) - mu * mu));
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) tex.at(i, j) = (tex.at(i, j) - mu) / sd;

  // Lesion mask: union of 1-3 overlapping discs, box-smoothed, thresholded at
  // 0.5, clipped to the brain. Area is log-uniform in [0.2%, 15%] of the brain.
  Field mask(H, W);
  const bool lesion_present = rng.uniform() < cfg.lesion_prevalence;
  if (lesion_present) {
    const double area_frac = std::exp(rng.uniform(std::log(0.002), std::log(0.15)));
    const double target_area = std::max(4.0, area_frac * static_cast<double>(brain_area));
    const int n_discs = 1 + static_cast<int>(rng.uniform_int(3));
    const double r0 = std::sqrt(target_area / (M_PI * n_discs * 0.6));
    double ly = cy, lx = cx;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double py = rng.uniform(0.15 * H, 0.85 * H);
      const double px = rng.uniform(0.15 * W, 0.85 * W);
      const double dy = py - cy, dx = px - cx;
      const double u = (ct * dx + st * dy) / rx;
      const double v = (-st * dx + ct * dy) / ry;
      if (u * u + v * v <= 0.55) {  // keep the core inside the brain
        ly = py;
        lx = px;
        break;
      }
    }
    Field blob(H, W);
    for (int d = 0; d < n_discs; ++d) {
      const double oy = d == 0 ? 0.0 : rng.uniform(-0.9, 0.9) * r0;
      const double ox = d == 0 ? 0.0 : rng.uniform(-0.9, 0.9) * r0;
      const double r = r0 * rng.uniform(0.7, 1.3);
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          const double d2 = (i - ly - oy) * (i - ly - oy) + (j - lx - ox) * (j - lx - ox);
          if (d2 <= r * r) blob.at(i, j) = 1.0;
        }
    }
    phantom_detail::box_blur(blob);
    phantom_detail::box_blur(blob);
    long area = 0;
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j)
        if (blob.at(i, j) > 0.5 && brain.at(i, j) > 0) {
          mask.at(i, j) = 1.0;
          ++area;
        }
    if (area == 0) {
      // Degenerate smoothing outcome: fall back to the seed pixel.
      const int iy = std::clamp(static_cast<int>(std::lround(ly)), 0, H - 1);
      const int ix = std::clamp(static_cast<int>(std::lround(lx)), 0, W - 1);
      if (brain.at(iy, ix) > 0) mask.at(iy, ix) = 1.0;
    }
  }

  PhantomCase out;
  out.case_id = detail::cat("case-", seed);
  out.source = Tensor<float>({n, H, W});
  out.target = Tensor<float>({2, H, W});
  out.mask = Tensor<float>({H, W});

  // Target intensities (values chosen so lesion contrast stays strict under
  // the +-0.015 texture noise): DWI gray 0.10 / white 0.35, lesion +0.50;
  // ADC gray 0.30 / white 0.15, lesion -0.45; background -1.
  const double t_peak_base = 0.5 * (n - 1) + rng.uniform(-0.5, 0.5);
  const double t_sigma = std::max(0.8, n / 4.0);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const bool inside = brain.at(i, j) > 0;
      const bool in_lesion = mask.at(i, j) > 0;
      const double tx = std::clamp(tex.at(i, j), -2.5, 2.5);
      const bool white = tx > 0.0;
      out.mask[static_cast<std::size_t>(i) * W + j] = in_lesion ? 1.0f : 0.0f;

      double dwi, adc;
      if (!inside) {
        dwi = -1.0;
        adc = -1.0;
      } else {
        const double wobble = 0.04 * tx;
        dwi = (white ? 0.35 : 0.10) + wobble + rng.uniform(-0.015, 0.015);
        adc = (white ? 0.15 : 0.30) + wobble + rng.uniform(-0.015, 0.015);
        if (in_lesion) {
          dwi += 0.50;
          adc -= 0.45;
        }
      }
      out.target[static_cast<std::size_t>(0) * H * W + static_cast<std::size_t>(i) * W + j] =
          static_cast<float>(std::clamp(dwi, -1.0, 1.0));
      out.target[static_cast<std::size_t>(1) * H * W + static_cast<std::size_t>(i) * W + j] =
          static_cast<float>(std::clamp(adc, -1.0, 1.0));

      // Source stack: baseline CT-like value plus a temporal enhancement
      // curve; hypoperfused (lesion) pixels get the curve scaled by 0.4 and
      // delayed by one time index.
      for (int tau = 0; tau < n; ++tau) {
        double v;
        if (!inside) {
          v = -1.0;
        } else {
          const double base = (white ? 0.16 : 0.06) + 0.03 * tx;
          double amp = 0.50 + 0.08 * tx;
          double peak = t_peak_base;
          if (in_lesion) {
            amp *= 0.4;
            peak += 1.0;
          }
          const double curve = std::exp(-(tau - peak) * (tau - peak) / (2.0 * t_sigma * t_sigma));
          v = 2.0 * (base + amp * curve) - 1.0 + rng.uniform(-0.01, 0.01);
        }
        out.source[(static_cast<std::size_t>(tau) * H + i) * W + j] =
            static_cast<float>(std::clamp(v, -1.0, 1.0));
      }
    }

  long area = 0;
  for (std::size_t i = 0; i < out.mask.size(); ++i) area += out.mask[i] > 0.5f ? 1 : 0;
  out.lesion_area_px = area;
  return out;
}

// ---- on-disk dataset ----

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j{{"format_version", m.format_version},
                   {"seed", m.seed},
                   {"splits", m.splits},
                   {"lesion_prevalence", m.lesion_prevalence},
                   {"image_size", {m.height, m.width}},
                   {"n_source_channels", m.n_source_channels},
                   {"m_target_channels", m.m_target_channels}};
  if (!m.split_prevalence_overrides.empty()) j["split_prevalence_overrides"] = m.split_prevalence_overrides;
  if (!m.config_hash.empty()) j["config_hash"] = m.config_hash;
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  require<FormatError>(m.format_version == 1, "unsupported manifest format_version ",
                       m.format_version);
  m.seed = j.at("seed").get<std::uint64_t>();
  m.splits = j.at("splits").get<std::map<std::string, std::vector<std::string>>>();
  m.lesion_prevalence = j.at("lesion_prevalence").get<double>();
  m.height = j.at("image_size").at(0).get<int>();
  m.width = j.at("image_size").at(1).get<int>();
  m.n_source_channels = j.at("n_source_channels").get<int>();
  m.m_target_channels = j.at("m_target_channels").get<int>();
  if (j.contains("split_prevalence_overrides"))
    m.split_prevalence_overrides = j.at("split_prevalence_overrides").get<std::map<std::string, double>>();
  if (j.contains("config_hash")) m.config_hash = j.at("config_hash").get<std::string>();
  return m;
}

inline void write_case(const std::filesystem::path& dir, const PhantomCase& c) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  write_tensor(dir / (c.case_id + "_source.tnsr"), c.source);
  write_tensor(dir / (c.case_id + "_target.tnsr"), c.target);
  write_tensor(dir / (c.case_id + "_mask.tnsr"), c.mask);
  nlohmann::json j{{"case_id", c.case_id},
                   {"files",
                    {{"source", c.case_id + "_source.tnsr"},
                     {"target", c.case_id + "_target.tnsr"},
                     {"mask", c.case_id + "_mask.tnsr"}}},
                   {"lesion_area_px", c.lesion_area_px},
                   {"has_lesion", c.has_lesion()}};
  std::ofstream f(dir / (c.case_id + ".json"));
  require<IoError>(f.good(), "cannot write case json in ", dir.string());
  f << j.dump(2) << "\n";
}

inline PhantomCase read_case(const std::filesystem::path& dir, const std::string& case_id) {
  std::ifstream f(dir / (case_id + ".json"));
  require<IoError>(f.good(), "cannot read case json for ", case_id, " in ", dir.string());
  nlohmann::json j = nlohmann::json::parse(f);
  PhantomCase c;
  c.case_id = j.at("case_id").get<std::string>();
  c.source = read_tensor(dir / j.at("files").at("source").get<std::string>());
  c.target = read_tensor(dir / j.at("files").at("target").get<std::string>());
  c.mask = read_tensor(dir / j.at("files").at("mask").get<std::string>());
  c.lesion_area_px = j.at("lesion_area_px").get<long>();
  return c;
}

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

// Floor-allocated split sizes; the remainder goes to train.
inline std::array<int, 3> split_sizes(int n_cases, const SplitRatios& r) {
  require(r.train > 0.0 && r.val > 0.0 && r.test > 0.0, "split ratios must be positive");
  require(std::abs(r.train + r.val + r.test - 1.0) <= 1e-9, "split ratios must sum to 1, got ",
          r.train + r.val + r.test);
  const int nv = static_cast<int>(std::floor(n_cases * r.val));
  const int nt = static_cast<int>(std::floor(n_cases * r.test));
  const int ntr_floor = static_cast<int>(std::floor(n_cases * r.train));
  const int ntr = ntr_floor + (n_cases - ntr_floor - nv - nt);
  return {ntr, nv, nt};
}

inline DatasetManifest build_dataset(int n_cases, const SplitRatios& ratios, std::uint64_t seed,
                                     const std::filesystem::path& out_dir, const PhantomConfig& cfg,
                                     const std::map<std::string, double>& split_prevalence = {},
                                     const std::string& config_hash = "") {
  cfg.validate();
  require<ConfigError>(n_cases >= 1, "n_cases must be >= 1");
  for (const auto& [split, p] : split_prevalence)
    require<ConfigError>(p >= 0.0 && p <= 1.0, "split prevalence override for ", split,
                         " must be in [0, 1], got ", p);
  const auto sizes = split_sizes(n_cases, ratios);

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "cases", ec);
  require<IoError>(std::filesystem::is_directory(out_dir / "cases"), "cannot create output dir ",
                   (out_dir / "cases").string());

  std::vector<int> order(static_cast<std::size_t>(n_cases));
  for (int i = 0; i < n_cases; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng split_rng(mix_seed(seed, 0x5D17));
  split_rng.shuffle(order);

  DatasetManifest m;
  m.seed = seed;
  m.lesion_prevalence = cfg.lesion_prevalence;
  m.height = cfg.height;
  m.width = cfg.width;
  m.n_source_channels = cfg.n_source_channels;
  m.m_target_channels = cfg.m_target_channels;
  m.split_prevalence_overrides = split_prevalence;
  m.config_hash = config_hash;

  const char* split_names[3] = {"train", "val", "test"};
  int cursor = 0;
  for (int s = 0; s < 3; ++s) {
    std::vector<std::string> ids;
    for (int i = 0; i < sizes[static_cast<std::size_t>(s)]; ++i, ++cursor) {
      const int idx = order[static_cast<std::size_t>(cursor)];
      PhantomConfig case_cfg = cfg;
      if (auto it = split_prevalence.find(split_names[s]); it != split_prevalence.end())
        case_cfg.lesion_prevalence = it->second;
      PhantomCase c = generate_case(mix_seed(seed, static_cast<std::uint64_t>(idx)), case_cfg);
      char buf[16];
      std::snprintf(buf, sizeof buf, "c%06d", idx);
      c.case_id = buf;
      write_case(out_dir / "cases", c);
      ids.push_back(c.case_id);
    }
    std::sort(ids.begin(), ids.end());
    m.splits[split_names[s]] = std::move(ids);
  }

  std::ofstream f(out_dir / "manifest.json");
  require<IoError>(f.good(), "cannot write manifest in ", out_dir.string());
  f << manifest_to_json(m).dump(2) << "\n";
  return m;
}

struct Dataset {
  DatasetManifest manifest;
  std::vector<PhantomCase> cases;                  // all cases, id-sorted
  std::map<std::string, std::vector<int>> splits;  // indices into cases
};

inline Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  require<IoError>(f.good(), "cannot read manifest in ", dir.string());
  Dataset ds;
  ds.manifest = manifest_from_json(nlohmann::json::parse(f));
  std::map<std::string, int> id_to_index;
  for (const auto& [split, ids] : ds.manifest.splits) {
    for (const auto& id : ids) {
      if (id_to_index.find(id) == id_to_index.end()) {
        id_to_index[id] = static_cast<int>(ds.cases.size());
        ds.cases.push_back(read_case(dir / "cases", id));
      }
      ds.splits[split].push_back(id_to_index[id]);
    }
  }
  return ds;
}

}  // namespace lapt
