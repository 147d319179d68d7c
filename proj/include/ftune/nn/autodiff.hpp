// Copyright 2026 The ftune Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ftune/core.hpp"
#include "ftune/nn/param_store.hpp"

namespace ftune::nn {

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

/// Reverse-mode autodiff over dense matrices.
///
/// A tape records one forward evaluation. Parameters enter as leaves bound
/// to ParamStore entries; `backward` walks the tape once in reverse creation
/// order and returns the parameter gradients. A tape can be consumed only
/// once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(const ParamStore& store, std::size_t entry);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of a 1x1 node with respect to every parameter leaf.
  GradMap backward(Var loss, std::size_t num_entries);

  // Op plumbing: appends a node whose backward pass is `fn`.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn);
  void accumulate(Var v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    int param = -1;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Elementwise and linear-algebra ops. All inputs must live on one tape.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);  // broadcast a 1xN row over every row of a
Var scale(Var a, double s);
Var square(Var a);
Var relu(Var a);
Var softmax_rows(Var a);
Var layer_norm_rows(Var a, double eps = 1e-5);
Var col_block(Var a, Eigen::Index start, Eigen::Index count);
Var hconcat(std::span<const Var> parts);
Var sum(Var a);
Var mean(Var a);

/// Mean over rows of -log softmax(logits)[row, label[row]].
Var cross_entropy(Var logits, std::span<const int> labels);

Matrix softmax_rows(const Matrix& a);

}  // namespace ftune::nn
