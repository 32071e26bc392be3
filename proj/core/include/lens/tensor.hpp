// Copyright 2026 The LENS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lens {

/// Dense row-major array of doubles with rank 1, 2 or 3.
///
/// A default-constructed Tensor is empty (rank 0) and only serves as an
/// "unset" placeholder; every constructor that takes dims enforces
/// rank in [1, 3] and extents >= 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor row_vector(std::vector<double> values);

  bool empty() const { return dims_.empty(); }
  std::size_t rank() const { return dims_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const { return data_.size(); }

  // Matrix view helpers; rank-1 tensors act as a single row.
  std::size_t rows() const {
    if (dims_.size() <= 2) return dims_.empty() ? 0 : (dims_.size() == 1 ? 1 : dims_[0]);
    return dims_[0] * dims_[1];
  }
  std::size_t cols() const { return dims_.empty() ? 0 : dims_.back(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols(), cols()}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols(), cols()};
  }

  /// Same data, new extents; the element count must match.
  Tensor reshaped(std::vector<std::size_t> dims) const;

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& dims);

/// Throws std::invalid_argument with `what` and both shapes when a != b.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace lens
