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

#include <vector>

#include "ftune/nn/param_store.hpp"

namespace ftune::nn {

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.0;
};

/// Plain SGD with optional heavy-ball momentum.
///
/// Masked-out coordinates are never written, velocity included, so they stay
/// bit-identical for as long as they remain masked.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig config = {}) : config_(config) {}

  const SgdConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  /// mask may be null (update everything); otherwise it must be aligned to
  /// store.total_scalars().
  void apply(ParamStore& store, const GradMap& grads, const ParamMask* mask);

 private:
  SgdConfig config_;
  std::vector<Matrix> velocity_;
};

/// Free-function form of a single optimizer step.
inline void apply_update(ParamStore& store, const GradMap& grads, const ParamMask* mask,
                         SgdOptimizer& optimizer) {
  optimizer.apply(store, grads, mask);
}

}  // namespace ftune::nn
