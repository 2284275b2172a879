// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lapt/autodiff.hpp"
#include "lapt/common.hpp"
#include "lapt/rng.hpp"
#include "lapt/tensor.hpp"

namespace lapt {

// Named parameter tensors in deterministic registration order.
template <typename S>
class ParamSet {
 public:
  int add(const std::string& name, Tensor<S> value) {
    require(index_.find(name) == index_.end(), "duplicate parameter name: ", name);
    const int id = static_cast<int>(names_.size());
    index_.emplace(name, id);
    names_.push_back(name);
    values_.push_back(std::move(value));
    return id;
  }

  int count() const { return static_cast<int>(names_.size()); }
  const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }
  Tensor<S>& value(int i) { return values_[static_cast<std::size_t>(i)]; }
  const Tensor<S>& value(int i) const { return values_[static_cast<std::size_t>(i)]; }

  Tensor<S>& value(std::string_view name) { return values_[static_cast<std::size_t>(index(name))]; }
  const Tensor<S>& value(std::string_view name) const {
    return values_[static_cast<std::size_t>(index(name))];
  }

  int index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    require(it != index_.end(), "unknown parameter: ", name);
    return it->second;
  }

  bool has(std::string_view name) const { return index_.find(std::string(name)) != index_.end(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  template <typename T>
  ParamSet<T> cast() const {
    ParamSet<T> out;
    for (int i = 0; i < count(); ++i) out.add(name(i), value(i).template cast<T>());
    return out;
  }

  // Checksum over exact value bytes, for determinism assertions.
  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& v : values_)
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()), sizeof(S) * v.size()), h);
    return h;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<S>> values_;
  std::unordered_map<std::string, int> index_;
};

// Leaf ids of a ParamSet registered into a Graph for one forward/backward pass.
template <typename S>
struct ParamNodes {
  std::vector<int> ids;

  static ParamNodes leaves(Graph<S>& g, const ParamSet<S>& params, bool requires_grad) {
    ParamNodes out;
    out.ids.reserve(static_cast<std::size_t>(params.count()));
    for (int i = 0; i < params.count(); ++i)
      out.ids.push_back(g.input(params.value(i), requires_grad));
    return out;
  }

  int operator[](int param_index) const { return ids[static_cast<std::size_t>(param_index)]; }
};

namespace init {

// Kaiming-normal fan-in initialization for conv / linear weights.
template <typename S>
Tensor<S> conv_weight(int cout, int cin, int k, Rng& rng) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
  return Tensor<S>::randn({cout, cin, k, k}, rng, static_cast<S>(stddev));
}

template <typename S>
Tensor<S> linear_weight(int dout, int din, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(din));
  return Tensor<S>::randn({dout, din}, rng, static_cast<S>(stddev));
}

}  // namespace init

// AdamW with decoupled weight decay over a chosen subset of parameters.
template <typename S>
class AdamW {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(const std::vector<std::size_t>& sizes, Options opt) : opt_(opt) {
    m_.reserve(sizes.size());
    v_.reserve(sizes.size());
    for (std::size_t s : sizes) {
      m_.emplace_back(s, 0.0);
      v_.emplace_back(s, 0.0);
    }
  }

  // One update for slot `slot`; grads and values must have the registered size.
  void step_param(int slot, Tensor<S>& value, const Tensor<S>& grad) {
    auto& m = m_[static_cast<std::size_t>(slot)];
    auto& v = v_[static_cast<std::size_t>(slot)];
    const double b1 = opt_.beta1, b2 = opt_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = static_cast<double>(grad[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      const double x = static_cast<double>(value[i]);
      value[i] = static_cast<S>(x - opt_.learning_rate *
                                        (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * x));
    }
  }

  void begin_step() { ++t_; }

 private:
  Options opt_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

}  // namespace lapt
