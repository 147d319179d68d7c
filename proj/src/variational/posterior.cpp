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

#include "ftune/variational/posterior.hpp"

namespace ftune::variational {

void PriorSpec::validate() const {
  if (!(tau2 > 0.0) || !std::isfinite(tau2)) throw std::invalid_argument("PriorSpec: tau2 must be > 0");
}

GaussianPosterior GaussianPosterior::at_prior(const PriorSpec& prior) {
  prior.validate();
  GaussianPosterior q;
  q.mean = prior.theta_pt;
  q.log_precision = Vector::Constant(prior.theta_pt.size(), -std::log(prior.tau2));
  return q;
}

void VarEstConfig::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("VarEstConfig: gamma must be > 0");
  if (!(tau > 0.0)) throw std::invalid_argument("VarEstConfig: tau must be > 0");
  if (steps < 1) throw std::invalid_argument("VarEstConfig: steps must be >= 1");
  if (mc_samples < 1) throw std::invalid_argument("VarEstConfig: mc_samples must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("VarEstConfig: learning_rate must be > 0");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw std::invalid_argument("VarEstConfig: tail_fraction must be in (0, 1]");
  }
  if (!(max_step >= 0.0)) throw std::invalid_argument("VarEstConfig: max_step must be >= 0");
  if (divergence_window < 1) {
    throw std::invalid_argument("VarEstConfig: divergence_window must be >= 1");
  }
}

double kl_gaussian(const GaussianPosterior& q, const PriorSpec& p) {
  p.validate();
  if (q.mean.size() != p.theta_pt.size() || q.log_precision.size() != q.mean.size()) {
    throw std::invalid_argument("kl_gaussian: dimension mismatch");
  }
  const auto k = static_cast<double>(q.mean.size());
  const double inv_tau2 = 1.0 / p.tau2;
  const double trace = (-q.log_precision.array()).exp().sum();
  const double dist = (q.mean - p.theta_pt).squaredNorm();
  return 0.5 * (inv_tau2 * trace + inv_tau2 * dist - k + k * std::log(p.tau2) +
                q.log_precision.sum());
}

fisher::DiagFisher fim_from_precision(const GaussianPosterior& q, double gamma, double tau) {
  const double inv_tau2 = 1.0 / (tau * tau);
  fisher::DiagFisher out;
  out.role = fisher::FisherRole::TaskFIM;
  out.scores = gamma * (q.precision().array() - inv_tau2).matrix();
  for (Eigen::Index i = 0; i < out.scores.size(); ++i) {
    if (out.scores(i) < 0.0) {
      out.scores(i) = 0.0;
      ++out.meta.floored;
    }
  }
  return out;
}

fisher::DiagFisher drfim_variational(const GaussianPosterior& q_x, const GaussianPosterior& q_xp,
                                     double gamma, double tau, double eps_mu, double eps_sigma,
                                     double epsilon, DenominatorVariant variant) {
  if (q_x.dimension() != q_xp.dimension()) {
    throw std::invalid_argument("drfim_variational: posteriors are not aligned");
  }
  if (variant == DenominatorVariant::ExactSubstitution) {
    return fisher::drfim_direct(fim_from_precision(q_x, gamma, tau),
                                fim_from_precision(q_xp, gamma, tau), eps_mu, eps_sigma,
                                epsilon);
  }
  const double inv_tau2 = 1.0 / (tau * tau);
  const Vector lam_x = q_x.precision();
  const Vector lam_xp = q_xp.precision();
  fisher::DiagFisher out;
  out.role = fisher::FisherRole::DRFIM;
  out.meta.eps_mu = eps_mu;
  out.meta.eps_sigma = eps_sigma;
  out.meta.draws = 1;
  const double w = fisher::shift_weight(eps_mu, eps_sigma);
  const Vector task = (lam_x.array() - inv_tau2).matrix();
  const Vector domain = fisher::relative_change(lam_x, lam_xp, epsilon / gamma);
  out.scores = gamma * (task + w * domain).array();
  for (Eigen::Index i = 0; i < out.scores.size(); ++i) {
    if (out.scores(i) < 0.0) {
      out.scores(i) = 0.0;
      ++out.meta.floored;
    }
  }
  return out;
}

}  // namespace ftune::variational
