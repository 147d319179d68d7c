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
#include "ftune/nn/model.hpp"

namespace ftune::variational {

/// Mean segmentation loss of a batch as a function of the selected
/// coordinates; the remaining parameters stay at their snapshot values.
class ModelLossSource {
 public:
  ModelLossSource(const nn::SegmentationTransformer& model, nn::ParamStore snapshot,
                  const nn::Selection& selection)
      : model_(model), scratch_(std::move(snapshot)), selection_(selection) {}

  void set_batch(std::span<const data::Sample> samples) { samples_ = samples; }

  std::size_t dimension() const { return selection_.total_scalars(); }
  double loss_and_gradient(const Vector& theta, Vector& grad);

 private:
  const nn::SegmentationTransformer& model_;
  nn::ParamStore scratch_;
  const nn::Selection& selection_;
  std::span<const data::Sample> samples_;
};

}  // namespace ftune::variational
