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

#include "ftune/fisher/model_source.hpp"

namespace ftune::fisher {

std::vector<int> sample_labels(const Matrix& logits, Rng& rng) {
  const Matrix probs = nn::softmax_rows(logits);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> labels(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double u = unit(rng);
    double acc = 0.0;
    Eigen::Index k = 0;
    for (; k + 1 < probs.cols(); ++k) {
      acc += probs(i, k);
      if (u < acc) break;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return labels;
}

Vector ModelGradientSource::sample_gradient(std::size_t item, LabelMode mode, Rng& rng) const {
  const data::Sample& s = samples_[item];
  nn::Tape tape;
  nn::Var logits = model_.forward(tape, store_, s.image);
  std::vector<int> labels =
      mode == LabelMode::Empirical ? s.labels : sample_labels(tape.value(logits), rng);
  nn::Var loss = nn::loss_ce(logits, labels);
  return tape.backward(loss, store_.size()).flatten(store_, selection_);
}

}  // namespace ftune::fisher
