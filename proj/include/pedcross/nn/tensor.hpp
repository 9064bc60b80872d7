// Copyright 2026 The pedcross Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pedcross/error.hpp"

namespace pedcross::nn {

using Shape = std::vector<std::size_t>;

inline std::string ShapeString(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline std::size_t ShapeSize(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

// Dense row-major fp64 array.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(ShapeSize(shape_), fill) {
    CheckExtents();
  }

  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    CheckExtents();
    if (values_.size() != ShapeSize(shape_))
      throw ShapeError("tensor of shape " + ShapeString(shape_) + " given " +
                       std::to_string(values_.size()) + " values");
  }

  bool operator==(const Tensor&) const = default;

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // 4-D accessor (n, c, h, w).
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void Fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  Tensor Reshaped(Shape shape) const {
    if (ShapeSize(shape) != size())
      throw ShapeError("cannot reshape " + ShapeString(shape_) + " to " +
                       ShapeString(shape));
    return Tensor(std::move(shape), values_);
  }

  Tensor& operator+=(const Tensor& o) {
    if (o.shape_ != shape_)
      throw ShapeError("add " + ShapeString(o.shape_) + " to " +
                       ShapeString(shape_));
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }

 private:
  void CheckExtents() const {
    for (std::size_t e : shape_)
      if (e == 0) throw ShapeError("zero extent in shape " + ShapeString(shape_));
  }

  Shape shape_;
  std::vector<double> values_;
};

}  // namespace pedcross::nn
