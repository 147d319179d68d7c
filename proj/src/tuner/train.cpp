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
#include <optional>
#include <stdexcept>

#include "ftune/fisher/model_source.hpp"
#include "ftune/parallel.hpp"
#include "ftune/tuner/tuner.hpp"
#include "ftune/variational/model_source.hpp"

namespace ftune::tuner {

namespace {

struct SampleResult {
  double loss;
  nn::GradMap grads;
};

/// Decoder-only gradient from cached token features.
SampleResult decoder_step(const nn::SegmentationTransformer& model, const nn::ParamStore& store,
                          const Matrix& features, std::span<const int> labels) {
  nn::Tape tape;
  nn::Var logits = model.decode(tape, store, tape.constant(features));
  nn::Var loss = nn::loss_ce(logits, labels);
  const double value = tape.scalar(loss);
  return {value, tape.backward(loss, store.size())};
}

std::vector<Matrix> token_features(const nn::SegmentationTransformer& model,
                                   const nn::ParamStore& store,
                                   std::span<const data::Sample> samples) {
  std::vector<Matrix> out(samples.size());
  ordered_parallel_for(
      samples.size(),
      [&](std::size_t i) {
        nn::Tape tape;
        return Matrix(tape.value(model.features(tape, store, samples[i].image)));
      },
      [&](std::size_t i, Matrix f) { out[i] = std::move(f); });
  return out;
}

BatchGradient cached_gradient(const nn::SegmentationTransformer& model,
                              const nn::ParamStore& store, const std::vector<Matrix>& features,
                              std::span<const data::Sample> samples,
                              std::span<const std::size_t> indices) {
  BatchGradient out{0.0, nn::GradMap(store.size())};
  for (std::size_t i : indices) {
    SampleResult r = decoder_step(model, store, features[i], samples[i].labels);
    out.loss += r.loss;
    out.grads += r.grads;
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  out.loss *= inv;
  out.grads *= inv;
  return out;
}

std::vector<std::size_t> probe_indices(std::size_t n, int batch_size) {
  std::vector<std::size_t> idx(std::min(n, static_cast<std::size_t>(batch_size)));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

std::vector<data::Sample> gather(std::span<const data::Sample> samples,
                                 std::span<const std::size_t> indices) {
  std::vector<data::Sample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(samples[i]);
  return out;
}

}  // namespace

BatchGradient batch_gradient(const nn::SegmentationTransformer& model, const nn::ParamStore& store,
                             std::span<const data::Sample> samples,
                             std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  BatchGradient out{0.0, nn::GradMap(store.size())};
  ordered_parallel_for(
      indices.size(),
      [&](std::size_t k) {
        const data::Sample& s = samples[indices[k]];
        nn::Tape tape;
        nn::Var loss = nn::loss_ce(model.forward(tape, store, s.image), s.labels);
        const double value = tape.scalar(loss);
        return SampleResult{value, tape.backward(loss, store.size())};
      },
      [&](std::size_t, SampleResult r) {
        out.loss += r.loss;
        out.grads += r.grads;
      });
  const double inv = 1.0 / static_cast<double>(indices.size());
  out.loss *= inv;
  out.grads *= inv;
  return out;
}

double batch_loss(const nn::SegmentationTransformer& model, const nn::ParamStore& store,
                  std::span<const data::Sample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double total = 0.0;
  ordered_parallel_for(
      indices.size(),
      [&](std::size_t k) {
        const data::Sample& s = samples[indices[k]];
        nn::Tape tape;
        return tape.scalar(nn::loss_ce(model.forward(tape, store, s.image), s.labels));
      },
      [&](std::size_t, double v) { total += v; });
  return total / static_cast<double>(indices.size());
}

std::vector<std::size_t> sample_batch(std::size_t population, std::size_t batch_size, Rng& rng) {
  if (population == 0) throw std::invalid_argument("sample_batch: empty population");
  std::uniform_int_distribution<std::size_t> pick(0, population - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

std::vector<data::Sample> coarse_labels(std::span<const data::Sample> samples) {
  std::vector<data::Sample> out(samples.begin(), samples.end());
  for (auto& s : out) {
    for (int& l : s.labels) l = l == 0 ? 0 : 1;
  }
  return out;
}

PretrainResult pretrain(const TrainConfig& cfg, const data::Dataset& dataset, std::uint64_t seed) {
  cfg.validate();
  auto [model, store] = nn::SegmentationTransformer::build(cfg.model, derive_seed(seed, stream_tag("pretrain-init")));
  std::vector<data::Sample> mixture;
  for (int id : cfg.data.mixture_ids()) {
    const auto& d = dataset.domain(id);
    mixture.insert(mixture.end(), d.begin(), d.end());
  }
  const bool coarse = cfg.schedule.pretrain_task == PretrainTask::Coarse;
  if (coarse) {
    mixture = coarse_labels(mixture);
    model.reset_decoder(store, 2, derive_seed(seed, stream_tag("pretrain-head")));
  }

  const auto probe = probe_indices(mixture.size(), cfg.schedule.batch_size);
  PretrainResult out{model, store};
  out.initial_loss = batch_loss(model, store, mixture, probe);

  nn::SgdOptimizer opt({cfg.schedule.pretrain_lr, cfg.schedule.momentum});
  Rng rng(derive_seed(seed, stream_tag("pretrain-batches")));
  for (int step = 0; step < cfg.schedule.pretrain_steps; ++step) {
    const auto idx = sample_batch(mixture.size(), static_cast<std::size_t>(cfg.schedule.batch_size), rng);
    BatchGradient g = batch_gradient(model, store, mixture, idx);
    if (!std::isfinite(g.loss)) throw NumericalError("pretrain: non-finite loss at step " + std::to_string(step));
    opt.apply(store, g.grads, nullptr);
  }
  out.final_loss = batch_loss(model, store, mixture, probe);

  const int classes = coarse ? 2 : cfg.model.num_classes;
  std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& s : mixture) {
    const Matrix logits = model.logits(store, s.image);
    for (Eigen::Index p = 0; p < logits.rows(); ++p) {
      Eigen::Index arg = 0;
      logits.row(p).maxCoeff(&arg);
      const int truth = s.labels[static_cast<std::size_t>(p)];
      correct += arg == truth ? 1 : 0;
      ++counts[static_cast<std::size_t>(truth)];
      ++total;
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  out.majority_accuracy = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                          static_cast<double>(total);

  if (coarse) {
    model.reset_decoder(store, cfg.model.num_classes, derive_seed(seed, stream_tag("segmentation-head")));
  }
  out.model = model;
  out.store = std::move(store);
  return out;
}

WarmupResult warmup_decoder(const nn::SegmentationTransformer& model, nn::ParamStore& store,
                            std::span<const data::Sample> source, const ScheduleConfig& cfg,
                            std::uint64_t seed) {
  if (cfg.warmup_steps < 1) throw std::invalid_argument("warmup_decoder: T1 must be >= 1");
  if (source.empty()) throw std::invalid_argument("warmup_decoder: empty source domain");
  const std::vector<Matrix> features = token_features(model, store, source);
  const auto probe = probe_indices(source.size(), cfg.batch_size);
  WarmupResult out;
  out.initial_loss = cached_gradient(model, store, features, source, probe).loss;

  const nn::ParamMask decoder = nn::ParamMask::for_groups(store, {nn::Group::Decoder});
  nn::SgdOptimizer opt({cfg.warmup_lr, cfg.momentum});
  Rng rng(derive_seed(seed, stream_tag("warmup-batches")));
  for (int step = 0; step < cfg.warmup_steps; ++step) {
    const auto idx = sample_batch(source.size(), static_cast<std::size_t>(cfg.batch_size), rng);
    BatchGradient g = cached_gradient(model, store, features, source, idx);
    if (!std::isfinite(g.loss)) throw NumericalError("warmup: non-finite loss at step " + std::to_string(step));
    opt.apply(store, g.grads, &decoder);
  }
  out.final_loss = cached_gradient(model, store, features, source, probe).loss;
  return out;
}

EstimationResult estimate_drfim_round(const nn::SegmentationTransformer& model,
                                      const nn::ParamStore& store, const nn::Selection& selection,
                                      std::span<const data::Sample> source,
                                      const EstimationConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (source.size() < 2) throw std::invalid_argument("estimate_drfim_round: need >= 2 samples");
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  Rng batch_rng(derive_seed(seed, stream_tag("estimate-batches")));
  Rng draw_rng(derive_seed(seed, stream_tag("estimate-perturb")));
  std::optional<data::BatchUncertainty> corpus;
  if (cfg.uncertainty == UncertaintySource::Corpus) corpus = data::batch_uncertainty(source);

  const bool variational = cfg.mode == EstimationMode::Variational;
  variational::PriorSpec prior;
  variational::VarEstConfig vcfg = cfg.var;
  std::optional<variational::ModelLossSource> loss_x, loss_xp;
  std::optional<variational::GaussianPosterior> q_x, q_xp;
  if (variational) {
    prior.theta_pt = selection.gather(store);
    prior.tau2 = cfg.var.tau * cfg.var.tau;
    vcfg.steps = std::max(1, (cfg.var.steps + cfg.draws - 1) / cfg.draws);
    loss_x.emplace(model, store, selection);
    loss_xp.emplace(model, store, selection);
  }

  EstimationResult out;
  for (int t = 0; t < cfg.draws; ++t) {
    data::DomainBatch clean;
    clean.domain_id = kSourceDomain;
    clean.samples = gather(source, sample_batch(source.size(), batch, batch_rng));
    data::PerturbationDraw draw;
    if (cfg.zero_shift) {
      draw = data::sample_draw(clean, draw_rng, true);
    } else if (corpus) {
      draw = data::sample_draw(*corpus, draw_rng);
    } else {
      draw = data::sample_draw(clean, draw_rng);
    }
    const data::DomainBatch shifted = data::perturb_statistics(clean, draw);

    fisher::DiagFisher drf;
    fisher::DiagFisher task;
    if (!variational) {
      const std::uint64_t label_seed = derive_seed(seed, stream_tag("estimate-labels"), static_cast<std::uint64_t>(t));
      fisher::ModelGradientSource sx(model, store, selection, clean.samples);
      fisher::ModelGradientSource sxp(model, store, selection, shifted.samples);
      task = fisher::estimate_diag_fim(sx, cfg.label_mode, batch, label_seed);
      const fisher::DiagFisher f_xp = fisher::estimate_diag_fim(sxp, cfg.label_mode, batch, label_seed);
      drf = fisher::drfim_direct(task, f_xp, draw.eps_mu, draw.eps_sigma, cfg.epsilon);
    } else {
      const std::uint64_t noise_seed = derive_seed(seed, stream_tag("estimate-noise"), static_cast<std::uint64_t>(t));
      loss_x->set_batch(clean.samples);
      loss_xp->set_batch(shifted.samples);
      Rng rx(noise_seed);
      Rng rxp(noise_seed);
      q_x = variational::optimize_precision(*loss_x, prior, vcfg, rx, q_x ? &*q_x : nullptr);
      q_xp = variational::optimize_precision(*loss_xp, prior, vcfg, rxp, q_xp ? &*q_xp : nullptr);
      task = variational::fim_from_precision(*q_x, cfg.var.gamma, cfg.var.tau);
      drf = variational::drfim_variational(*q_x, *q_xp, cfg.var.gamma, cfg.var.tau, draw.eps_mu,
                                           draw.eps_sigma, cfg.epsilon, cfg.denominator);
    }
    const auto n = static_cast<std::size_t>(t) + 1;
    out.floored += drf.meta.floored;
    out.weights.push_back(fisher::shift_weight(draw.eps_mu, draw.eps_sigma));
    out.drfim = fisher::accumulate_drfim(out.drfim, drf, n);
    out.task = fisher::accumulate_drfim(out.task, task, n);
  }
  out.drfim.role = fisher::FisherRole::DRFIM;
  out.task.role = fisher::FisherRole::TaskFIM;
  out.drfim.meta.label_mode = out.task.meta.label_mode = cfg.label_mode;
  out.drfim.meta.num_samples = out.task.meta.num_samples = batch * static_cast<std::size_t>(cfg.draws);
  out.drfim.meta.floored = out.floored;
  out.q_x = std::move(q_x);
  out.q_xp = std::move(q_xp);
  return out;
}

FinetuneResult finetune_selective(const nn::SegmentationTransformer& model, nn::ParamStore& store,
                                  const nn::Selection& selection,
                                  std::span<const data::Sample> source, const Vector& scores,
                                  const ScheduleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (source.empty()) throw std::invalid_argument("finetune_selective: empty source domain");
  RankedMask ranked(store, selection, scores, cfg.granularity);
  const nn::ParamMask decoder = nn::ParamMask::for_groups(store, {nn::Group::Decoder});
  nn::SgdOptimizer backbone_opt({cfg.finetune_lr, cfg.momentum});
  nn::SgdOptimizer decoder_opt({cfg.decoder_lr, cfg.momentum});
  Rng rng(derive_seed(seed, stream_tag("finetune-batches")));
  const auto probe = probe_indices(source.size(), cfg.batch_size);

  FinetuneResult out;
  out.initial_loss = batch_loss(model, store, source, probe);
  // Token features stay valid until the first backbone update.
  std::optional<std::vector<Matrix>> features;
  bool backbone_moved = false;
  for (int t = 0; t < cfg.finetune_steps; ++t) {
    const ScheduleState state = schedule_fraction(t, cfg);
    ranked.set_fraction(state.fraction);
    out.final_fraction = state.fraction;
    const auto idx = sample_batch(source.size(), static_cast<std::size_t>(cfg.batch_size), rng);
    BatchGradient g;
    if (ranked.selected() == 0 && !backbone_moved) {
      if (!features) features = token_features(model, store, source);
      g = cached_gradient(model, store, *features, source, idx);
    } else {
      g = batch_gradient(model, store, source, idx);
    }
    if (!std::isfinite(g.loss)) throw NumericalError("finetune: non-finite loss at step " + std::to_string(t));
    if (ranked.selected() > 0) {
      backbone_opt.apply(store, g.grads, &ranked.mask());
      backbone_moved = true;
    }
    decoder_opt.apply(store, g.grads, &decoder);
  }
  out.final_loss = batch_loss(model, store, source, probe);
  return out;
}

MethodPlan plan_method(Method method, const EstimationResult& estimate, const ScheduleConfig& cfg,
                       std::uint64_t seed) {
  MethodPlan plan{Vector::Zero(estimate.drfim.scores.size()), cfg};
  switch (method) {
    case Method::FisherTune:
      plan.scores = estimate.drfim.scores;
      break;
    case Method::TaskFIMMask:
      plan.scores = estimate.task.scores;
      break;
    case Method::RandomMask: {
      Rng rng(derive_seed(seed, stream_tag("random-mask")));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (Eigen::Index i = 0; i < plan.scores.size(); ++i) plan.scores(i) = unit(rng);
      break;
    }
    case Method::Full:
      plan.schedule.delta_min = plan.schedule.delta_max = 100.0;
      break;
    case Method::Freeze:
      plan.schedule.delta_min = plan.schedule.delta_max = 0.0;
      break;
  }
  return plan;
}

}  // namespace ftune::tuner
