// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "lapt/common.hpp"
#include "lapt/rng.hpp"

namespace lapt {

// Dense row-major tensor of rank 1..4. Images are stored (channels, height,
// width); batches add a leading dimension (batch, channels, height, width);
// masks are rank 2 (height, width).
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    require(!shape_.empty() && shape_.size() <= 4, "tensor rank must be in [1, 4], got ",
            shape_.size());
    std::size_t n = 1;
    for (int d : shape_) {
      require(d > 0, "tensor dimensions must be positive");
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, S(0));
  }

  Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, S value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor randn(std::vector<int> shape, Rng& rng, S stddev = S(1)) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = static_cast<S>(rng.normal() * static_cast<double>(stddev));
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }

  // Rank-4 (n, c, h, w) accessor; lower-rank tensors use leading index 0.
  S& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  const S& at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](S v) { return std::isfinite(static_cast<double>(v)); });
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
    return out;
  }

  Tensor reshaped(std::vector<int> shape) const {
    Tensor out(std::move(shape));
    require(out.size() == size(), "reshape must preserve element count");
    out.data_ = data_;
    return out;
  }

  void fill(S value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    // Shapes shorter than rank 4 are addressed as if left-padded with 1s.
    int r = rank();
    std::size_t idx = 0;
    int logical[4] = {n, c, h, w};
    for (int i = 0; i < r; ++i) {
      idx = idx * static_cast<std::size_t>(shape_[static_cast<std::size_t>(i)]) +
            static_cast<std::size_t>(logical[4 - r + i]);
    }
    return idx;
  }

  std::vector<int> shape_;
  std::vector<S> data_;
};

template <typename S>
std::string shape_str(const Tensor<S>& t) {
  std::string s = "(";
  for (int i = 0; i < t.rank(); ++i) s += (i ? "," : "") + std::to_string(t.dim(i));
  return s + ")";
}

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
  require(a.same_shape(b), what, ": shape mismatch ", shape_str(a), " vs ", shape_str(b));
}

}  // namespace lapt
