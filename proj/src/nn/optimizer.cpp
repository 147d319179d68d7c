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

#include "ftune/nn/optimizer.hpp"

#include <stdexcept>

namespace ftune::nn {

void SgdOptimizer::apply(ParamStore& store, const GradMap& grads, const ParamMask* mask) {
  if (grads.size() != store.size()) throw std::invalid_argument("GradMap not aligned to store");
  if (mask != nullptr && mask->size() != store.total_scalars()) {
    throw std::invalid_argument("ParamMask has " + std::to_string(mask->size()) +
                                " entries, store has " + std::to_string(store.total_scalars()) +
                                " scalars");
  }
  const bool use_momentum = config_.momentum != 0.0;
  if (use_momentum && velocity_.size() != store.size()) {
    velocity_.assign(store.size(), Matrix());
  }
  const double lr = config_.learning_rate;
  const auto bits = mask != nullptr ? mask->bits() : std::span<const std::uint8_t>{};

  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!grads.has(i)) continue;
    Matrix& w = store[i].value;
    const Matrix& g = grads.raw(i);
    if (g.rows() != w.rows() || g.cols() != w.cols()) {
      throw std::invalid_argument("gradient shape mismatch for '" + store[i].name + "'");
    }
    if (use_momentum && velocity_[i].size() == 0) velocity_[i] = Matrix::Zero(w.rows(), w.cols());
    const std::size_t base = store.offset(i);
    auto w_flat = w.reshaped();
    const auto g_flat = g.reshaped();
    for (Eigen::Index j = 0; j < w_flat.size(); ++j) {
      if (mask != nullptr && bits[base + static_cast<std::size_t>(j)] == 0) continue;
      double step = g_flat(j);
      if (use_momentum) {
        auto v_flat = velocity_[i].reshaped();
        v_flat(j) = config_.momentum * v_flat(j) + step;
        step = v_flat(j);
      }
      w_flat(j) -= lr * step;
    }
  }
}

}  // namespace ftune::nn
