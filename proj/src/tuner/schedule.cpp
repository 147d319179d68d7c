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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ftune/tuner/tuner.hpp"

namespace ftune::tuner {

ScheduleState schedule_fraction(int t, const ScheduleConfig& cfg) {
  if (t < 0 || t > cfg.finetune_steps) {
    throw std::out_of_range("schedule_fraction: t=" + std::to_string(t) + " outside [0, " +
                            std::to_string(cfg.finetune_steps) + "]");
  }
  const double decay = std::exp(-static_cast<double>(t) / static_cast<double>(cfg.finetune_steps));
  const double span = cfg.delta_max - cfg.delta_min;
  ScheduleState s;
  s.t = t;
  const double percent = cfg.mode == ScheduleMode::Ramp ? cfg.delta_max - span * decay
                                                             : cfg.delta_min + span * decay;
  s.fraction = std::clamp(percent / 100.0, 0.0, 1.0);
  return s;
}

std::size_t selected_count(double fraction, std::size_t n) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("selection fraction must lie in [0, 1]");
  }
  const double k = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

std::vector<std::uint32_t> rank_scores(const Vector& scores) {
  if (!scores.allFinite()) throw NumericalError("rank_scores: non-finite score");
  std::vector<std::uint32_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return scores(a) > scores(b) || (scores(a) == scores(b) && a < b);
  });
  return order;
}

nn::ParamMask select_mask(const Vector& scores, double fraction) {
  const auto n = static_cast<std::size_t>(scores.size());
  const std::size_t k = selected_count(fraction, n);
  const auto order = rank_scores(scores);
  nn::ParamMask mask(n, false);
  for (std::size_t i = 0; i < k; ++i) mask.set(order[i], true);
  return mask;
}

RankedMask::RankedMask(const nn::ParamStore& store, const nn::Selection& selection,
                       const Vector& scores, Granularity granularity)
    : scores_(scores), mask_(store.total_scalars(), false) {
  const std::size_t n = selection.total_scalars();
  if (static_cast<std::size_t>(scores.size()) != n) {
    throw std::invalid_argument("RankedMask: " + std::to_string(scores.size()) +
                                " scores for " + std::to_string(n) + " selectable scalars");
  }
  to_store_.resize(n);
  const auto entries = selection.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const std::size_t len = static_cast<std::size_t>(store[entries[k]].value.size());
    for (std::size_t j = 0; j < len; ++j) {
      to_store_[selection.offset(k) + j] =
          static_cast<std::uint32_t>(store.offset(entries[k]) + j);
    }
  }
  if (granularity == Granularity::PerScalar) {
    order_ = rank_scores(scores);
    return;
  }
  Vector means(static_cast<Eigen::Index>(entries.size()));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto len = store[entries[k]].value.size();
    means(static_cast<Eigen::Index>(k)) =
        scores.segment(static_cast<Eigen::Index>(selection.offset(k)), len).mean();
  }
  stops_.push_back(0);
  for (std::uint32_t k : rank_scores(means)) {
    const std::size_t len = static_cast<std::size_t>(store[entries[k]].value.size());
    for (std::size_t j = 0; j < len; ++j) {
      order_.push_back(static_cast<std::uint32_t>(selection.offset(k) + j));
    }
    stops_.push_back(order_.size());
  }
}

bool RankedMask::set_fraction(double fraction) {
  std::size_t target = selected_count(fraction, order_.size());
  if (!stops_.empty()) target = *std::lower_bound(stops_.begin(), stops_.end(), target);
  if (target == selected_) return false;
  for (std::size_t i = std::min(target, selected_); i < std::max(target, selected_); ++i) {
    mask_.set(to_store_[order_[i]], target > selected_);
  }
  selected_ = target;
  return true;
}

double RankedMask::threshold() const {
  return selected_ == 0 ? std::numeric_limits<double>::quiet_NaN()
                        : scores_(order_[selected_ - 1]);
}

nn::ParamMask RankedMask::selection_mask() const {
  nn::ParamMask m(order_.size(), false);
  for (std::size_t i = 0; i < selected_; ++i) m.set(order_[i], true);
  return m;
}

double jaccard(const nn::ParamMask& a, const nn::ParamMask& b) {
  if (a.size() != b.size()) throw std::invalid_argument("jaccard: masks differ in size");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace ftune::tuner
