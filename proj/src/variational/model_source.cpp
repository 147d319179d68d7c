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

#include "ftune/variational/model_source.hpp"

#include <stdexcept>

#include "ftune/parallel.hpp"

namespace ftune::variational {

double ModelLossSource::loss_and_gradient(const Vector& theta, Vector& grad) {
  if (samples_.empty()) throw std::invalid_argument("ModelLossSource: empty batch");
  selection_.scatter(scratch_, theta);
  struct PerSample {
    double loss;
    Vector grad;
  };
  double loss = 0.0;
  grad = Vector::Zero(static_cast<Eigen::Index>(selection_.total_scalars()));
  ordered_parallel_for(
      samples_.size(),
      [&](std::size_t i) {
        nn::Tape tape;
        nn::Var logits = model_.forward(tape, scratch_, samples_[i].image);
        nn::Var l = nn::loss_ce(logits, samples_[i].labels);
        const double value = tape.scalar(l);
        return PerSample{value, tape.backward(l, scratch_.size()).flatten(scratch_, selection_)};
      },
      [&](std::size_t, PerSample r) {
        loss += r.loss;
        grad += r.grad;
      });
  const double inv_n = 1.0 / static_cast<double>(samples_.size());
  grad *= inv_n;
  return loss * inv_n;
}

}  // namespace ftune::variational
