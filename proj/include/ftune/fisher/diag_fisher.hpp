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

#include <concepts>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ftune/core.hpp"
#include "ftune/parallel.hpp"

namespace ftune::fisher {

enum class FisherRole : std::uint8_t { TaskFIM = 0, DeltaFIM = 1, DRFIM = 2 };
enum class LabelMode : std::uint8_t { ModelSampled = 0, Empirical = 1 };

std::string_view role_name(FisherRole r);
std::string_view label_mode_name(LabelMode m);
LabelMode parse_label_mode(std::string_view s);

struct FisherMeta {
  std::size_t num_samples = 0;
  LabelMode label_mode = LabelMode::ModelSampled;
  double eps_mu = 0.0;
  double eps_sigma = 0.0;
  std::size_t draws = 0;
  std::size_t floored = 0;  // negative estimates clamped to zero
};

/// Per-scalar diagonal Fisher scores, aligned with a Selection's flat order.
struct DiagFisher {
  Vector scores;
  FisherRole role = FisherRole::TaskFIM;
  FisherMeta meta;

  std::size_t size() const { return static_cast<std::size_t>(scores.size()); }
};

/// Default epsilon for the relative Fisher change.
inline constexpr double kDeltaEpsilon = 1e-8;

/// Relative Fisher change |F_x - F_xp| / (min(F_x, F_xp) + epsilon).
template <typename A, typename B>
Vector relative_change(const Eigen::MatrixBase<A>& f_x, const Eigen::MatrixBase<B>& f_xp,
                       double epsilon) {
  return ((f_x - f_xp).array().abs() / (f_x.array().min(f_xp.array()) + epsilon)).matrix();
}

/// Weight of the domain-sensitive term, exp(-(eps_mu + eps_sigma)).
inline double shift_weight(double eps_mu, double eps_sigma) {
  return std::exp(-(eps_mu + eps_sigma));
}

DiagFisher delta_fim(const DiagFisher& f_x, const DiagFisher& f_xp,
                     double epsilon = kDeltaEpsilon);

/// F_x + exp(-(eps_mu + eps_sigma)) * delta_fim(F_x, F_xp).
DiagFisher drfim_direct(const DiagFisher& f_x, const DiagFisher& f_xp, double eps_mu,
                        double eps_sigma, double epsilon = kDeltaEpsilon);

/// Running arithmetic mean over draws; `t` is the 1-based index of `next`.
DiagFisher accumulate_drfim(const DiagFisher& running, const DiagFisher& next, std::size_t t);

/// Anything that can produce one per-example loss gradient over a flat
/// parameter selection.
template <typename S>
concept GradientSource = requires(const S& s, std::size_t i, LabelMode m, Rng& rng) {
  { s.num_items() } -> std::convertible_to<std::size_t>;
  { s.dimension() } -> std::convertible_to<std::size_t>;
  { s.sample_gradient(i, m, rng) } -> std::convertible_to<Vector>;
};

/// Diagonal Fisher: mean over N draws of the squared per-example gradient.
///
/// Draw n uses item n mod num_items() and its own random stream derived from
/// (seed, n), so the result does not depend on the worker count. Squares are
/// summed in draw order.
template <GradientSource Source>
DiagFisher estimate_diag_fim(const Source& source, LabelMode mode, std::size_t num_samples,
                             std::uint64_t seed) {
  if (source.num_items() == 0) throw std::invalid_argument("estimate_diag_fim: no data");
  if (num_samples == 0) throw std::invalid_argument("estimate_diag_fim: N must be >= 1");
  Vector total = Vector::Zero(static_cast<Eigen::Index>(source.dimension()));
  const std::uint64_t tag = stream_tag("fisher-labels");
  ordered_parallel_for(
      num_samples,
      [&](std::size_t n) {
        Rng rng(derive_seed(seed, tag, n));
        Vector g = source.sample_gradient(n % source.num_items(), mode, rng);
        return Vector(g.array().square());
      },
      [&](std::size_t, Vector sq) { total += sq; });
  DiagFisher out;
  out.scores = total / static_cast<double>(num_samples);
  out.role = FisherRole::TaskFIM;
  out.meta.num_samples = num_samples;
  out.meta.label_mode = mode;
  if (!out.scores.allFinite()) throw NumericalError("non-finite Fisher score");
  return out;
}

/// Spearman rank correlation with average ranks for ties.
double spearman(const Vector& a, const Vector& b);

}  // namespace ftune::fisher
