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

#include <span>

#include "ftune/data/domain.hpp"
#include "ftune/fisher/diag_fisher.hpp"
#include "ftune/nn/model.hpp"

namespace ftune::fisher {

/// Per-image gradients of the segmentation loss over a parameter selection.
/// In ModelSampled mode every patch label is drawn from the model's own
/// predictive distribution; in Empirical mode the dataset labels are used.
class ModelGradientSource {
 public:
  ModelGradientSource(const nn::SegmentationTransformer& model, const nn::ParamStore& store,
                      const nn::Selection& selection, std::span<const data::Sample> samples)
      : model_(model), store_(store), selection_(selection), samples_(samples) {}

  std::size_t num_items() const { return samples_.size(); }
  std::size_t dimension() const { return selection_.total_scalars(); }
  Vector sample_gradient(std::size_t item, LabelMode mode, Rng& rng) const;

 private:
  const nn::SegmentationTransformer& model_;
  const nn::ParamStore& store_;
  const nn::Selection& selection_;
  std::span<const data::Sample> samples_;
};

/// Draws one label per row from softmax(logits).
std::vector<int> sample_labels(const Matrix& logits, Rng& rng);

}  // namespace ftune::fisher
