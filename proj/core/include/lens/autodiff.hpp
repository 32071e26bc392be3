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
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "lens/numerics.hpp"
#include "lens/tensor.hpp"

// Reverse-mode differentiation over rank-2 tensors.
//
// A Tape records every intermediate value of a forward pass together with a
// closure that pushes the node's gradient into its inputs. Nodes are kept in
// a deque so references handed out by value() stay valid while recording.
namespace lens::ad {

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  /// Gradient accumulated by the last backward(); empty if none reached it.
  const Tensor& grad() const;
  std::size_t index() const { return index_; }
  Tape& tape() const { return *tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// A leaf that receives gradients.
  Var parameter(Tensor value);
  /// Records an op output. `backward` runs only if some input needs a grad.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);

  const Tensor& value(std::size_t index) const { return nodes_[index].value; }
  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad(std::size_t index);
  const Tensor& grad_or_empty(std::size_t index) const { return nodes_[index].grad; }
  bool requires_grad(std::size_t index) const { return nodes_[index].requires_grad; }

  /// Seeds d(root)/d(root) = 1 for a 1 x 1 root and propagates to the leaves.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

// Linear algebra.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a b^T
Var transpose(Var a);

// Elementwise.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Adds a 1 x c row to every row of an r x c matrix.
Var add_row(Var a, Var row);
Var gelu(Var a);
Var sigmoid(Var a);

// Row-wise transforms.
Var layer_norm(Var a, Var gain, Var offset, double eps = 1e-5);
Var softmax(Var logits, bool causal);
Var minmax_normalize(Var a);

// Structure.
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
/// Column means, 1 x c.
Var mean_rows(Var a);
/// Elementwise mean of same-shaped values.
Var average(std::span<const Var> parts);
Var reshape(Var a, std::vector<std::size_t> dims);
/// Applies a constant sparse row operator: out = op * a.
Var gather(std::shared_ptr<const SparseRows> op, Var a);

// Scalars (1 x 1 values).
/// Wraps an externally evaluated scalar f(a) whose gradient df/da is known.
Var scalar_function(Var a, double value, Tensor gradient);
/// sum_i weights[i] * parts[i].
Var weighted_sum(std::span<const Var> parts, std::span<const double> weights);

}  // namespace lens::ad
