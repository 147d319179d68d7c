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

#include <algorithm>
#include <cmath>
#include <limits>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ftune/core.hpp"
#include "ftune/fisher/diag_fisher.hpp"

namespace ftune::variational {

/// Isotropic Gaussian prior N(theta_pt, tau2 I).
struct PriorSpec {
  Vector theta_pt;
  double tau2 = 1.0;

  void validate() const;
};

/// Diagonal Gaussian posterior N(mean, diag(exp(log_precision))^-1).
struct GaussianPosterior {
  Vector mean;
  Vector log_precision;

  std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }
  Vector precision() const { return log_precision.array().exp().matrix(); }
  Vector stddev() const { return (-0.5 * log_precision.array()).exp().matrix(); }

  /// Posterior equal to the prior: mean theta_pt, precision tau^-2.
  static GaussianPosterior at_prior(const PriorSpec& prior);
};

struct VarEstConfig {
  double gamma = 1.0;
  double tau = 1.0;
  int mc_samples = 1;
  /// Evaluate each draw at +zeta and -zeta. Cancels the first-order term of
  /// the loss gradient at the mean, which otherwise swamps the precision signal.
  bool antithetic = true;
  int steps = 2000;
  double learning_rate = 1e-2;
  double mean_learning_rate = 1e-2;
  bool freeze_mean = true;
  /// Keep every precision at or above the prior precision tau^-2. Directions
  /// of negative curvature have no stationary point otherwise, and their
  /// recovered Fisher is floored at zero either way.
  bool floor_at_prior = true;
  /// Per-coordinate bound on one log-precision step (0 disables). Rare large
  /// cross-curvature draws otherwise throw single coordinates far past their
  /// stationary point, and the way back is slow.
  double max_step = 0.5;
  /// Fraction of final iterates averaged into the returned log-precision.
  double tail_fraction = 0.5;
  /// Abort when the per-step ELBO estimate rises this many steps in a row.
  int divergence_window = 50;

  void validate() const;
};

/// KL(q || p) for diagonal q and isotropic p:
/// 1/2 (tau^-2 sum 1/Lambda + tau^-2 |mean - theta_pt|^2 - k + k ln tau^2 + sum ln Lambda).
double kl_gaussian(const GaussianPosterior& q, const PriorSpec& p);

/// A differentiable scalar objective over a flat parameter vector.
template <typename S>
concept LossSource = requires(S& s, const Vector& theta, Vector& grad) {
  { s.dimension() } -> std::convertible_to<std::size_t>;
  { s.loss_and_gradient(theta, grad) } -> std::convertible_to<double>;
};

struct ElboEstimate {
  double value = 0.0;
  double expected_loss = 0.0;
  double kl = 0.0;
  Vector grad_log_precision;
  Vector grad_mean;
};

/// Monte-Carlo ELBO (1/S) sum_s L(theta_s) + gamma KL(q||p) with
/// theta_s = mean + Lambda^-1/2 * zeta_s, plus its reparameterized gradients.
/// With `antithetic`, every zeta_s is also used as -zeta_s (2S evaluations).
template <LossSource S>
ElboEstimate elbo_loss(S& source, const GaussianPosterior& q, const PriorSpec& p, double gamma,
                       int mc_samples, Rng& rng, bool antithetic = false) {
  if (mc_samples < 1) throw std::invalid_argument("elbo_loss: mc_samples must be >= 1");
  const auto k = static_cast<Eigen::Index>(q.dimension());
  if (static_cast<std::size_t>(k) != source.dimension() || p.theta_pt.size() != k) {
    throw std::invalid_argument("elbo_loss: dimension mismatch");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vector sigma = q.stddev();
  ElboEstimate out;
  out.grad_log_precision = Vector::Zero(k);
  out.grad_mean = Vector::Zero(k);
  Vector zeta(k);
  Vector theta(k);
  Vector grad(k);
  const int signs = antithetic ? 2 : 1;
  for (int s = 0; s < mc_samples; ++s) {
    for (Eigen::Index i = 0; i < k; ++i) zeta(i) = normal(rng);
    for (int sign = 0; sign < signs; ++sign) {
      if (sign == 1) zeta = -zeta;
      theta = q.mean + sigma.cwiseProduct(zeta);
      const double loss = source.loss_and_gradient(theta, grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw NumericalError("elbo_loss: non-finite loss under draw " + std::to_string(s));
      }
      out.expected_loss += loss;
      out.grad_mean += grad;
      out.grad_log_precision.array() -= 0.5 * grad.array() * sigma.array() * zeta.array();
    }
  }
  const double inv_s = 1.0 / static_cast<double>(mc_samples * signs);
  out.expected_loss *= inv_s;
  out.grad_mean *= inv_s;
  out.grad_log_precision *= inv_s;

  const double inv_tau2 = 1.0 / p.tau2;
  out.kl = kl_gaussian(q, p);
  out.value = out.expected_loss + gamma * out.kl;
  out.grad_log_precision.array() +=
      gamma * 0.5 * (1.0 - inv_tau2 * (-q.log_precision.array()).exp());
  out.grad_mean += gamma * inv_tau2 * (q.mean - p.theta_pt);
  return out;
}

struct OptimizeTrace {
  std::vector<double> elbo;  // per-step estimate
};

/// First-order minimization of the ELBO over log-precision (and the mean
/// unless frozen). The log-precision step is lr * grad / gamma: gamma / 2 is
/// the curvature of the objective in log-precision at its stationary point.
/// Returns the tail average of the iterates.
template <LossSource S>
GaussianPosterior optimize_precision(S& source, const PriorSpec& prior, const VarEstConfig& cfg,
                                     Rng& rng, const GaussianPosterior* warm_start = nullptr,
                                     OptimizeTrace* trace = nullptr) {
  cfg.validate();
  prior.validate();
  GaussianPosterior q = warm_start != nullptr ? *warm_start : GaussianPosterior::at_prior(prior);
  if (q.dimension() != source.dimension()) {
    throw std::invalid_argument("optimize_precision: dimension mismatch");
  }
  if (cfg.freeze_mean) q.mean = prior.theta_pt;

  const int tail_start =
      cfg.steps - std::max(1, static_cast<int>(std::lround(cfg.tail_fraction * cfg.steps)));
  Vector rho_sum = Vector::Zero(q.log_precision.size());
  Vector mean_sum = Vector::Zero(q.mean.size());
  int tail_count = 0;
  const double rho_floor = -std::log(prior.tau2);
  double previous = std::numeric_limits<double>::infinity();
  int rising = 0;

  for (int step = 0; step < cfg.steps; ++step) {
    const ElboEstimate e = elbo_loss(source, q, prior, cfg.gamma, cfg.mc_samples, rng, cfg.antithetic);
    if (trace != nullptr) trace->elbo.push_back(e.value);
    rising = e.value > previous ? rising + 1 : 0;
    previous = e.value;
    if (rising >= cfg.divergence_window) {
      throw NumericalError("optimize_precision: ELBO rose for " + std::to_string(rising) +
                           " consecutive steps (step " + std::to_string(step) +
                           ", elbo " + std::to_string(e.value) + ")");
    }
    Vector delta = (cfg.learning_rate / cfg.gamma) * e.grad_log_precision;
    if (cfg.max_step > 0.0) delta = delta.cwiseMax(-cfg.max_step).cwiseMin(cfg.max_step);
    q.log_precision -= delta;
    if (cfg.floor_at_prior) q.log_precision = q.log_precision.cwiseMax(rho_floor);
    if (!cfg.freeze_mean) q.mean -= cfg.mean_learning_rate * e.grad_mean;
    if (!q.log_precision.allFinite() || !q.mean.allFinite()) {
      throw NumericalError("optimize_precision: non-finite posterior at step " +
                           std::to_string(step));
    }
    if (step >= tail_start) {
      rho_sum += q.log_precision;
      mean_sum += q.mean;
      ++tail_count;
    }
  }
  q.log_precision = rho_sum / static_cast<double>(tail_count);
  q.mean = mean_sum / static_cast<double>(tail_count);
  return q;
}

/// gamma * (Lambda - tau^-2) per coordinate, negatives floored at zero.
fisher::DiagFisher fim_from_precision(const GaussianPosterior& q, double gamma, double tau);

enum class DenominatorVariant : std::uint8_t {
  /// min(Lambda_x, Lambda_xp) + epsilon / gamma.
  Literal = 0,
  /// Relative change of the recovered Fishers, i.e. the tau^-2 shift kept.
  ExactSubstitution = 1,
};

/// Domain-related Fisher from clean and perturbed posterior precisions.
fisher::DiagFisher drfim_variational(const GaussianPosterior& q_x, const GaussianPosterior& q_xp,
                                     double gamma, double tau, double eps_mu, double eps_sigma,
                                     double epsilon = fisher::kDeltaEpsilon,
                                     DenominatorVariant variant = DenominatorVariant::Literal);

}  // namespace ftune::variational
