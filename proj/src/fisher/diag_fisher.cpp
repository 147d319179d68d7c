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

#include "ftune/fisher/diag_fisher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ftune::fisher {

namespace {

void require_aligned(const DiagFisher& a, const DiagFisher& b, const char* op) {
  if (a.scores.size() != b.scores.size()) {
    throw std::invalid_argument(std::string(op) + ": score vectors are not aligned (" +
                                std::to_string(a.scores.size()) + " vs " +
                                std::to_string(b.scores.size()) + ")");
  }
}

Vector ranks(const Vector& v) {
  const auto n = static_cast<std::size_t>(v.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v(static_cast<Eigen::Index>(a)) < v(static_cast<Eigen::Index>(b));
  });
  Vector r(v.size());
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v(static_cast<Eigen::Index>(order[j + 1])) ==
                            v(static_cast<Eigen::Index>(order[i]))) {
      ++j;
    }
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) r(static_cast<Eigen::Index>(order[k])) = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::string_view role_name(FisherRole r) {
  switch (r) {
    case FisherRole::TaskFIM: return "TaskFIM";
    case FisherRole::DeltaFIM: return "DeltaFIM";
    case FisherRole::DRFIM: return "DRFIM";
  }
  return "?";
}

std::string_view label_mode_name(LabelMode m) {
  return m == LabelMode::ModelSampled ? "model_sampled" : "empirical";
}

LabelMode parse_label_mode(std::string_view s) {
  if (s == "model_sampled") return LabelMode::ModelSampled;
  if (s == "empirical") return LabelMode::Empirical;
  throw std::invalid_argument("unknown label mode '" + std::string(s) + "'");
}

DiagFisher delta_fim(const DiagFisher& f_x, const DiagFisher& f_xp, double epsilon) {
  require_aligned(f_x, f_xp, "delta_fim");
  DiagFisher out;
  out.scores = relative_change(f_x.scores, f_xp.scores, epsilon);
  out.role = FisherRole::DeltaFIM;
  out.meta = f_x.meta;
  return out;
}

DiagFisher drfim_direct(const DiagFisher& f_x, const DiagFisher& f_xp, double eps_mu,
                        double eps_sigma, double epsilon) {
  require_aligned(f_x, f_xp, "drfim_direct");
  DiagFisher out;
  out.scores = f_x.scores + shift_weight(eps_mu, eps_sigma) *
                                relative_change(f_x.scores, f_xp.scores, epsilon);
  out.role = FisherRole::DRFIM;
  out.meta = f_x.meta;
  out.meta.eps_mu = eps_mu;
  out.meta.eps_sigma = eps_sigma;
  out.meta.draws = 1;
  return out;
}

DiagFisher accumulate_drfim(const DiagFisher& running, const DiagFisher& next, std::size_t t) {
  if (t == 0) throw std::invalid_argument("accumulate_drfim: t is 1-based");
  if (t == 1) {
    DiagFisher out = next;
    out.meta.draws = 1;
    return out;
  }
  require_aligned(running, next, "accumulate_drfim");
  DiagFisher out = running;
  out.scores += (next.scores - running.scores) / static_cast<double>(t);
  out.meta.draws = t;
  return out;
}

double spearman(const Vector& a, const Vector& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("spearman: need two aligned vectors of length >= 2");
  }
  const Vector ra = ranks(a);
  const Vector rb = ranks(b);
  const Vector ca = ra.array() - ra.mean();
  const Vector cb = rb.array() - rb.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return denom == 0.0 ? 0.0 : ca.dot(cb) / denom;
}

}  // namespace ftune::fisher
