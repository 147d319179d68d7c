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

#include "ftune/nn/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace ftune::nn {

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw std::logic_error("Var is not bound to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw std::logic_error("Vars belong to different tapes");
  return tape_of(a);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, {}, -1, false});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(const ParamStore& store, std::size_t entry) {
  nodes_.push_back({store[entry].value, {}, {}, static_cast<int>(entry), true});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw std::invalid_argument("node is not a scalar");
  return m(0, 0);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  if (consumed_) throw std::logic_error("tape already consumed by backward()");
  bool needs = false;
  for (Var v : inputs) {
    if (v.tape != this) throw std::logic_error("Vars belong to different tapes");
    needs = needs || nodes_[v.id].requires_grad;
  }
  Node node{std::move(value), {}, {}, -1, needs};
  if (needs) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

GradMap Tape::backward(Var loss, std::size_t num_entries) {
  if (loss.tape != this) throw std::logic_error("loss is not on this tape");
  if (consumed_) throw std::logic_error("tape already consumed by backward()");
  if (value(loss).size() != 1) throw std::invalid_argument("backward() requires a scalar loss");
  consumed_ = true;

  GradMap grads(num_entries);
  if (!nodes_[loss.id].requires_grad) return grads;
  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param >= 0) {
      auto p = static_cast<std::size_t>(n.param);
      if (p >= num_entries) throw std::out_of_range("parameter index beyond GradMap size");
      if (grads.has(p)) {
        grads.raw(p) += n.grad;
      } else {
        grads.raw(p) = n.grad;
      }
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
  return grads;
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (t.value(a).cols() != t.value(b).rows()) throw std::invalid_argument("matmul: shape mismatch");
  Matrix out = t.value(a) * t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g * t.value(b).transpose());
    t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (t.value(a).cols() != t.value(b).cols()) {
    throw std::invalid_argument("matmul_nt: shape mismatch");
  }
  Matrix out = t.value(a) * t.value(b).transpose();
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g * t.value(b));
    t.accumulate(b, g.transpose() * t.value(a));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(t.value(a), t.value(b), "add");
  Matrix out = t.value(a) + t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(t.value(a), t.value(b), "sub");
  Matrix out = t.value(a) - t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(t.value(a), t.value(b), "mul");
  Matrix out = t.value(a).cwiseProduct(t.value(b));
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(t.value(b)));
    t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Matrix& r = t.value(row);
  if (r.rows() != 1 || r.cols() != t.value(a).cols()) {
    throw std::invalid_argument("add_row: row must be 1 x cols(a)");
  }
  Matrix out = t.value(a).rowwise() + r.row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(row, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Matrix out = t.value(a) * s;
  return t.record(std::move(out), {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var square(Var a) {
  Tape& t = tape_of(a);
  Matrix out = t.value(a).array().square().matrix();
  return t.record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, 2.0 * g.cwiseProduct(t.value(a)));
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Matrix out = t.value(a).cwiseMax(0.0);
  return t.record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (t.value(a).array() > 0.0).select(g, 0.0).matrix());
  });
}

Matrix softmax_rows(const Matrix& a) {
  Matrix out = a.colwise() - a.rowwise().maxCoeff();
  out = out.array().exp().matrix();
  const Vector denom = out.rowwise().sum();
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= denom(i);
  return out;
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  Var y{&t, static_cast<int>(t.size())};
  return t.record(softmax_rows(t.value(a)), {a}, [a, y](Tape& t, const Matrix& g) {
    const Matrix& s = t.value(y);
    const Vector dot = g.cwiseProduct(s).rowwise().sum();
    t.accumulate(a, s.cwiseProduct(g.colwise() - dot));
  });
}

Var layer_norm_rows(Var a, double eps) {
  Tape& t = tape_of(a);
  const Matrix& x = t.value(a);
  const auto n = static_cast<double>(x.cols());
  const Vector mu = x.rowwise().mean();
  Matrix centered = x.colwise() - mu;
  const Vector inv_std =
      ((centered.array().square().rowwise().sum() / n) + eps).rsqrt().matrix();
  Matrix out = inv_std.asDiagonal() * centered;
  Var y{&t, static_cast<int>(t.size())};
  return t.record(std::move(out), {a}, [a, y, inv_std, n](Tape& t, const Matrix& g) {
    const Matrix& yv = t.value(y);
    const Vector g_mean = g.rowwise().mean();
    const Vector gy_mean = g.cwiseProduct(yv).rowwise().sum() / n;
    Matrix dx = g.colwise() - g_mean;
    dx -= gy_mean.asDiagonal() * yv;
    t.accumulate(a, inv_std.asDiagonal() * dx);
  });
}

Var col_block(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  const Matrix& x = t.value(a);
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw std::invalid_argument("col_block: range out of bounds");
  }
  const Eigen::Index rows = x.rows();
  const Eigen::Index cols = x.cols();
  Matrix out = x.middleCols(start, count);
  return t.record(std::move(out), {a}, [a, start, count, rows, cols](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(rows, cols);
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var hconcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hconcat: no inputs");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = t.value(parts.front()).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (t.value(p).rows() != rows) throw std::invalid_argument("hconcat: row mismatch");
    cols += t.value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, t.value(p).cols()) = t.value(p);
    at += t.value(p).cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [inputs](Tape& t, const Matrix& g) {
    Eigen::Index at = 0;
    for (Var p : inputs) {
      const Eigen::Index c = t.value(p).cols();
      t.accumulate(p, g.middleCols(at, c));
      at += c;
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const Eigen::Index r = t.value(a).rows();
  const Eigen::Index c = t.value(a).cols();
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.record(std::move(out), {a}, [a, r, c](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean(Var a) {
  Tape& t = tape_of(a);
  return scale(sum(a), 1.0 / static_cast<double>(t.value(a).size()));
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  Tape& t = tape_of(logits);
  const Matrix& z = t.value(logits);
  if (static_cast<std::size_t>(z.rows()) != labels.size()) {
    throw std::invalid_argument("cross_entropy: one label per row required");
  }
  for (int y : labels) {
    if (y < 0 || y >= z.cols()) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " out of range");
    }
  }
  Matrix probs = softmax_rows(z);
  const Vector row_max = z.rowwise().maxCoeff();
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double lse = row_max(i) + std::log((z.row(i).array() - row_max(i)).exp().sum());
    total += lse - z(i, labels[static_cast<std::size_t>(i)]);
  }
  const auto n = static_cast<double>(z.rows());
  Matrix out(1, 1);
  out(0, 0) = total / n;
  std::vector<int> ys(labels.begin(), labels.end());
  return t.record(std::move(out), {logits},
                  [logits, probs = std::move(probs), ys = std::move(ys), n](Tape& t,
                                                                            const Matrix& g) {
                    Matrix d = probs;
                    for (std::size_t i = 0; i < ys.size(); ++i) {
                      d(static_cast<Eigen::Index>(i), ys[i]) -= 1.0;
                    }
                    t.accumulate(logits, d * (g(0, 0) / n));
                  });
}

}  // namespace ftune::nn
