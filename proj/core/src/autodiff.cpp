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

#include "lens/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lens::ad {

const Tensor& Var::value() const { return tape_->value(index_); }
const Tensor& Var::grad() const { return tape_->grad_or_empty(index_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw std::logic_error("ad: mixing values from different tapes");
    needs = needs || nodes_[in.index()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor(), needs, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t index) {
  Node& node = nodes_[index];
  if (node.grad.empty()) node.grad = Tensor(node.value.dims());
  return node.grad;
}

void Tape::backward(Var root) {
  if (root.value().size() != 1) throw std::invalid_argument("ad: backward root must be a scalar");
  for (Node& node : nodes_) node.grad = Tensor();
  grad(root.index())[0] = 1.0;
  for (std::size_t i = root.index() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.backward && !node.grad.empty()) node.backward(*this, i);
  }
}

namespace {

bool wants(const Tape& tape, const Var& v) { return tape.requires_grad(v.index()); }

void require_rank2(const Var& v, const char* op) {
  if (v.value().rank() != 2) {
    throw std::invalid_argument(std::string("ad::") + op + ": expected matrix, got " +
                                shape_string(v.value().dims()));
  }
}

void accumulate(Tensor& dst, const Tensor& src, double factor = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  Tape& tape = a.tape();
  return tape.record(lens::matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (wants(t, a)) add_matmul_nt(t.grad(a.index()), g, b.value());
    if (wants(t, b)) add_matmul_tn(t.grad(b.index()), a.value(), g);
  });
}

Var matmul_nt(Var a, Var b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  Tensor out = Tensor::matrix(a.value().rows(), b.value().rows());
  add_matmul_nt(out, a.value(), b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (wants(t, a)) add_matmul(t.grad(a.index()), g, b.value());
    if (wants(t, b)) add_matmul_tn(t.grad(b.index()), g, a.value());
  });
}

Var transpose(Var a) {
  require_rank2(a, "transpose");
  return a.tape().record(lens::transpose(a.value()), {a}, [a](Tape& t, std::size_t self) {
    accumulate(t.grad(a.index()), lens::transpose(t.grad(self)));
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "ad::add");
  Tensor out = a.value();
  accumulate(out, b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    if (wants(t, a)) accumulate(t.grad(a.index()), t.grad(self));
    if (wants(t, b)) accumulate(t.grad(b.index()), t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "ad::sub");
  Tensor out = a.value();
  accumulate(out, b.value(), -1.0);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    if (wants(t, a)) accumulate(t.grad(a.index()), t.grad(self));
    if (wants(t, b)) accumulate(t.grad(b.index()), t.grad(self), -1.0);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "ad::mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (wants(t, a)) {
      Tensor& ga = t.grad(a.index());
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (wants(t, b)) {
      Tensor& gb = t.grad(b.index());
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& t, std::size_t self) {
    accumulate(t.grad(a.index()), t.grad(self), factor);
  });
}

Var add_row(Var a, Var row) {
  require_rank2(a, "add_row");
  const std::size_t cols = a.value().cols();
  if (row.value().size() != cols) {
    throw std::invalid_argument("ad::add_row: bias length " +
                                std::to_string(row.value().size()) + " vs " +
                                std::to_string(cols) + " columns");
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) out(i, j) += row.value()[j];
  }
  return a.tape().record(std::move(out), {a, row}, [a, row](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (wants(t, a)) accumulate(t.grad(a.index()), g);
    if (wants(t, row)) {
      Tensor& gr = t.grad(row.index());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
      }
    }
  });
}

namespace {

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

}  // namespace

Var gelu(Var a) {
  Tensor out = a.value();
  for (double& x : out.data()) {
    x = 0.5 * x * (1.0 + std::tanh(kGeluScale * (x + kGeluCubic * x * x * x)));
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.index());
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double xi = x[i];
      const double th = std::tanh(kGeluScale * (xi + kGeluCubic * xi * xi * xi));
      const double du = kGeluScale * (1.0 + 3.0 * kGeluCubic * xi * xi);
      ga[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * xi * (1.0 - th * th) * du);
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& x : out.data()) x = 1.0 / (1.0 + std::exp(-x));
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a.index());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var layer_norm(Var a, Var gain, Var offset, double eps) {
  require_rank2(a, "layer_norm");
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gain.value().size() != cols || offset.value().size() != cols) {
    throw std::invalid_argument("ad::layer_norm: gain/offset length must equal " +
                                std::to_string(cols));
  }
  Tensor normalized(x.dims());
  std::vector<double> inv_std(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (double v : x.row(i)) mean += v;
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : x.row(i)) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cols);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) normalized(i, j) = (x(i, j) - mean) * inv_std[i];
  }
  Tensor out(x.dims());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out(i, j) = normalized(i, j) * gain.value()[j] + offset.value()[j];
    }
  }
  return a.tape().record(
      std::move(out), {a, gain, offset},
      [a, gain, offset, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const std::size_t rows = g.rows(), cols = g.cols();
        if (wants(t, gain)) {
          Tensor& gg = t.grad(gain.index());
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) gg[j] += g(i, j) * normalized(i, j);
          }
        }
        if (wants(t, offset)) {
          Tensor& go = t.grad(offset.index());
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) go[j] += g(i, j);
          }
        }
        if (wants(t, a)) {
          Tensor& ga = t.grad(a.index());
          const Tensor& gamma = gain.value();
          std::vector<double> dxhat(cols);
          for (std::size_t i = 0; i < rows; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
              dxhat[j] = g(i, j) * gamma[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * normalized(i, j);
            }
            mean_d /= static_cast<double>(cols);
            mean_dx /= static_cast<double>(cols);
            for (std::size_t j = 0; j < cols; ++j) {
              ga(i, j) += inv_std[i] * (dxhat[j] - mean_d - normalized(i, j) * mean_dx);
            }
          }
        }
      });
}

Var softmax(Var logits, bool causal) {
  return logits.tape().record(softmax_rows(logits.value(), causal), {logits},
                              [logits](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& p = t.value(self);
    Tensor& gl = t.grad(logits.index());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * p(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) gl(i, j) += p(i, j) * (g(i, j) - dot);
    }
  });
}

Var minmax_normalize(Var a) {
  const Tensor& x = a.value();
  const auto lo_it = std::min_element(x.data().begin(), x.data().end());
  const auto hi_it = std::max_element(x.data().begin(), x.data().end());
  const auto lo = static_cast<std::size_t>(lo_it - x.data().begin());
  const auto hi = static_cast<std::size_t>(hi_it - x.data().begin());
  const double range = *hi_it - *lo_it;
  Tensor out = lens::minmax_normalize(x);
  if (!(range > 0.0)) return a.tape().constant(std::move(out));
  Tensor y = out;
  return a.tape().record(std::move(out), {a}, [a, lo, hi, range, y = std::move(y)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.index());
    double to_lo = 0.0, to_hi = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] / range;
      to_lo += g[i] * (y[i] - 1.0) / range;
      to_hi -= g[i] * y[i] / range;
    }
    ga[lo] += to_lo;
    ga[hi] += to_hi;
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_rows");
  const Tensor& x = a.value();
  if (begin >= end || end > x.rows()) throw std::out_of_range("ad::slice_rows: bad range");
  const std::size_t cols = x.cols();
  std::vector<double> data(x.data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                           x.data().begin() + static_cast<std::ptrdiff_t>(end * cols));
  return a.tape().record(Tensor({end - begin, cols}, std::move(data)), {a},
                         [a, begin, cols](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor& ga = t.grad(a.index());
                           for (std::size_t i = 0; i < g.size(); ++i) ga[begin * cols + i] += g[i];
                         });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  const Tensor& x = a.value();
  if (begin >= end || end > x.cols()) throw std::out_of_range("ad::slice_cols: bad range");
  Tensor out = Tensor::matrix(x.rows(), end - begin);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = x(i, j);
  }
  return a.tape().record(std::move(out), {a}, [a, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.index());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) += g(i, j);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad::concat_rows: nothing to concatenate");
  const std::size_t cols = parts.front().value().cols();
  std::vector<double> data;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.value().cols() != cols) throw std::invalid_argument("ad::concat_rows: column mismatch");
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    rows += p.value().rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(
      Tensor({rows, cols}, std::move(data)), parts, [inputs](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (const Var& p : inputs) {
          const std::size_t n = p.value().size();
          if (wants(t, p)) {
            Tensor& gp = t.grad(p.index());
            for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
          }
          offset += n;
        }
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad::concat_cols: nothing to concatenate");
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.value().rows() != rows) throw std::invalid_argument("ad::concat_cols: row mismatch");
    cols += p.value().cols();
  }
  Tensor out = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    }
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(out), parts, [inputs](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t pc = p.value().cols();
      if (wants(t, p)) {
        Tensor& gp = t.grad(p.index());
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < pc; ++j) gp(i, j) += g(i, offset + j);
        }
      }
      offset += pc;
    }
  });
}

Var mean_rows(Var a) {
  require_rank2(a, "mean_rows");
  const Tensor& x = a.value();
  const double inv = 1.0 / static_cast<double>(x.rows());
  Tensor out = Tensor::matrix(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out[j] += x(i, j);
  }
  for (double& v : out.data()) v *= inv;
  return a.tape().record(std::move(out), {a}, [a, inv](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.index());
    for (std::size_t i = 0; i < ga.rows(); ++i) {
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += inv * g[j];
    }
  });
}

Var average(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad::average: no inputs");
  const double inv = 1.0 / static_cast<double>(parts.size());
  Tensor out(parts.front().value().dims());
  for (const Var& p : parts) {
    require_same_shape(out, p.value(), "ad::average");
    accumulate(out, p.value(), inv);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(out), parts, [inputs, inv](Tape& t, std::size_t self) {
    for (const Var& p : inputs) {
      if (wants(t, p)) accumulate(t.grad(p.index()), t.grad(self), inv);
    }
  });
}

Var reshape(Var a, std::vector<std::size_t> dims) {
  return a.tape().record(a.value().reshaped(std::move(dims)), {a}, [a](Tape& t, std::size_t self) {
    accumulate(t.grad(a.index()), t.grad(self));
  });
}

Var gather(std::shared_ptr<const SparseRows> op, Var a) {
  Tensor out = apply_sparse_rows(*op, a.value());
  return a.tape().record(std::move(out), {a}, [a, op](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.index());
    const std::size_t cols = g.cols();
    for (std::size_t r = 0; r < op->rows.size(); ++r) {
      const double* src = g.row(r).data();
      for (const Tap& tap : op->rows[r]) {
        double* dst = ga.row(tap.index).data();
        for (std::size_t c = 0; c < cols; ++c) dst[c] += tap.weight * src[c];
      }
    }
  });
}

Var scalar_function(Var a, double value, Tensor gradient) {
  require_same_shape(a.value(), gradient, "ad::scalar_function");
  return a.tape().record(Tensor::matrix(1, 1, value), {a},
                         [a, gradient = std::move(gradient)](Tape& t, std::size_t self) {
                           accumulate(t.grad(a.index()), gradient, t.grad(self)[0]);
                         });
}

Var weighted_sum(std::span<const Var> parts, std::span<const double> weights) {
  if (parts.empty() || parts.size() != weights.size()) {
    throw std::invalid_argument("ad::weighted_sum: parts and weights must align");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].value().size() != 1) throw std::invalid_argument("ad::weighted_sum: scalars only");
    total += weights[i] * parts[i].value()[0];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  std::vector<double> w(weights.begin(), weights.end());
  return parts.front().tape().record(Tensor::matrix(1, 1, total), parts,
                                     [inputs, w](Tape& t, std::size_t self) {
                                       const double g = t.grad(self)[0];
                                       for (std::size_t i = 0; i < inputs.size(); ++i) {
                                         if (wants(t, inputs[i])) t.grad(inputs[i].index())[0] += w[i] * g;
                                       }
                                     });
}

}  // namespace lens::ad
