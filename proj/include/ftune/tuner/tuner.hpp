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

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftune/data/domain.hpp"
#include "ftune/fisher/diag_fisher.hpp"
#include "ftune/nn/model.hpp"
#include "ftune/nn/optimizer.hpp"
#include "ftune/tuner/config.hpp"
#include "ftune/variational/posterior.hpp"

namespace ftune::tuner {

// ---------------------------------------------------------------------------
// Selection schedule and masks.

struct ScheduleState {
  int t = 0;
  double fraction = 0.0;  // in [0, 1]
  /// Lowest selected score once a ranking is applied; NaN before that or
  /// when nothing is selected.
  double threshold_score = std::numeric_limits<double>::quiet_NaN();
};

/// Fraction of selectable scalars trained at step t (horizon T = T3).
/// Ramp: (d_max - (d_max - d_min) e^{-t/T}) / 100, rising from d_min.
/// Decay: (d_min + (d_max - d_min) e^{-t/T}) / 100, decaying from d_max.
ScheduleState schedule_fraction(int t, const ScheduleConfig& cfg);

/// Number of coordinates selected out of n at this fraction: ceil(fraction * n),
/// with a 1e-9 slack so that e.g. 0.6 * 5 selects 3.
std::size_t selected_count(double fraction, std::size_t n);

/// Coordinates ordered by descending score; ties by ascending index.
std::vector<std::uint32_t> rank_scores(const Vector& scores);

/// Top-ceil(fraction * n) mask over the score vector itself.
nn::ParamMask select_mask(const Vector& scores, double fraction);

/// Incrementally maintained mask over a full ParamStore holding the top-k
/// coordinates of a selection under a fixed ranking. PerTensor granularity
/// ranks tensors by mean score and selects whole tensors until at least k
/// scalars are covered.
class RankedMask {
 public:
  RankedMask(const nn::ParamStore& store, const nn::Selection& selection, const Vector& scores,
             Granularity granularity);

  /// Selects the top `fraction` of the selection; returns true if changed.
  bool set_fraction(double fraction);

  const nn::ParamMask& mask() const { return mask_; }
  std::size_t selected() const { return selected_; }
  /// Score of the last selected coordinate (NaN if none).
  double threshold() const;
  /// Selected coordinates of the selection as a mask over the selection only.
  nn::ParamMask selection_mask() const;

 private:
  std::vector<std::uint32_t> order_;  // selection-flat indices, best first
  std::vector<std::size_t> stops_;    // PerTensor: admissible prefix lengths
  std::vector<std::uint32_t> to_store_;
  Vector scores_;
  nn::ParamMask mask_;
  std::size_t selected_ = 0;
};

// ---------------------------------------------------------------------------
// Training stages.

/// Mean batch loss and fixed-order accumulated gradients.
struct BatchGradient {
  double loss = 0.0;
  nn::GradMap grads;
};

BatchGradient batch_gradient(const nn::SegmentationTransformer& model, const nn::ParamStore& store,
                             std::span<const data::Sample> samples,
                             std::span<const std::size_t> indices);

double batch_loss(const nn::SegmentationTransformer& model, const nn::ParamStore& store,
                  std::span<const data::Sample> samples, std::span<const std::size_t> indices);

/// Uniform with-replacement minibatch indices from a named stream.
std::vector<std::size_t> sample_batch(std::size_t population, std::size_t batch_size, Rng& rng);

/// Maps labels to the coarse pretraining task (background vs shape).
std::vector<data::Sample> coarse_labels(std::span<const data::Sample> samples);

struct PretrainResult {
  nn::SegmentationTransformer model;
  nn::ParamStore store;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double accuracy = 0.0;           // patch accuracy on the mixture
  double majority_accuracy = 0.0;  // always-predict-most-frequent baseline
};

/// Generalist stage standing in for a pretrained foundation model: trains
/// the whole network on the broad domain mixture.
PretrainResult pretrain(const TrainConfig& cfg, const data::Dataset& dataset, std::uint64_t seed);

struct WarmupResult {
  double initial_loss = 0.0;  // probe batch, before
  double final_loss = 0.0;    // probe batch, after
};

/// Trains only the Decoder group for T1 steps on the source samples. Token
/// features are computed once since the backbone is frozen.
WarmupResult warmup_decoder(const nn::SegmentationTransformer& model, nn::ParamStore& store,
                            std::span<const data::Sample> source, const ScheduleConfig& cfg,
                            std::uint64_t seed);

struct EstimationResult {
  fisher::DiagFisher drfim;
  std::optional<variational::GaussianPosterior> q_x;   // final posteriors,
  std::optional<variational::GaussianPosterior> q_xp;  // variational mode only
  fisher::DiagFisher task;
  std::vector<double> weights;  // exp(-(eps_mu + eps_sigma)) per draw
  std::size_t floored = 0;
};

/// The DR-FIM loop: T2 draws of (batch, perturbation, per-domain Fisher,
/// combination), averaged. Also returns the matching task-only Fisher.
EstimationResult estimate_drfim_round(const nn::SegmentationTransformer& model,
                                      const nn::ParamStore& store, const nn::Selection& selection,
                                      std::span<const data::Sample> source,
                                      const EstimationConfig& cfg, std::uint64_t seed);

struct FinetuneResult {
  double initial_loss = 0.0;  // probe batch
  double final_loss = 0.0;
  double final_fraction = 0.0;
};

/// Scheduled selective fine-tuning: at each step the top schedule_fraction(t)
/// of `scores` (over `selection`) plus the decoder are updated; everything
/// else stays bit-identical.
FinetuneResult finetune_selective(const nn::SegmentationTransformer& model, nn::ParamStore& store,
                                  const nn::Selection& selection,
                                  std::span<const data::Sample> source, const Vector& scores,
                                  const ScheduleConfig& cfg, std::uint64_t seed);

/// Scores that make `finetune_selective` reproduce a baseline.
struct MethodPlan {
  Vector scores;
  ScheduleConfig schedule;
};

MethodPlan plan_method(Method method, const EstimationResult& estimate, const ScheduleConfig& cfg,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Evaluation.

struct DomainEval {
  int domain_id = 0;
  std::string role;  // "source", "unseen" or "mixture"
  std::vector<std::optional<double>> class_iou;  // nullopt: absent from truth and prediction
  double miou = 0.0;
  std::size_t patches = 0;
};

struct EvalReport {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<DomainEval> domains;
  double mean_unseen_miou = 0.0;
  double source_miou = 0.0;
  std::string checkpoint_digest;
  std::string config_echo;
};

/// Per-class IoU over patches from a confusion matrix (rows: truth).
DomainEval domain_iou(const Eigen::MatrixXi& confusion);

Eigen::MatrixXi confusion_matrix(const nn::SegmentationTransformer& model,
                                 const nn::ParamStore& store,
                                 std::span<const data::Sample> samples, int num_classes);

EvalReport evaluate(const nn::SegmentationTransformer& model, const nn::ParamStore& store,
                    const data::Dataset& dataset, std::span<const int> domain_ids,
                    std::span<const int> unseen_ids);

// ---------------------------------------------------------------------------
// Sensitivity profile (per tensor and per group/layer).

struct ProfileRow {
  std::string tensor;
  nn::Group group;
  int layer = 0;
  std::size_t count = 0;
  double mean_drfim = 0.0;
  double mean_task = 0.0;
  double selected_fraction = 0.0;  // share selected at the final schedule fraction
};

struct SensitivityProfile {
  std::vector<ProfileRow> tensors;
  std::vector<ProfileRow> groups;  // aggregated by (group, layer)
  double spearman_drfim_task = 0.0;
  double jaccard_drfim_task = 0.0;  // final-fraction masks
};

SensitivityProfile sensitivity_profile(const nn::ParamStore& store, const nn::Selection& selection,
                                       const EstimationResult& estimate,
                                       const ScheduleConfig& cfg);

double jaccard(const nn::ParamMask& a, const nn::ParamMask& b);

// ---------------------------------------------------------------------------
// End-to-end pipeline.

struct MethodOutcome {
  Method method;
  nn::ParamStore store;
  EvalReport report;
  FinetuneResult finetune;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<PretrainResult> pretrained;  // set when pretraining ran here
  WarmupResult warmup;
  EstimationResult estimate;
  SensitivityProfile profile;
  std::vector<MethodOutcome> methods;

  const MethodOutcome& get(Method m) const;
};

/// Benchmark corpus for a config.
data::Dataset build_dataset(const DataConfig& cfg);

/// A pretrained model with a fresh segmentation head after decoder warm-up.
struct WarmedModel {
  nn::SegmentationTransformer model;
  nn::ParamStore store;
  WarmupResult warmup;
};

/// Head reset and decoder warm-up for one seed.
WarmedModel prepare_warm(const TrainConfig& cfg, const data::Dataset& dataset,
                         const nn::SegmentationTransformer& model,
                         const nn::ParamStore& pretrained, std::uint64_t seed);

/// DR-FIM estimation on the warmed model for one seed.
EstimationResult estimate_for_seed(const TrainConfig& cfg, const data::Dataset& dataset,
                                   const WarmedModel& warm, std::uint64_t seed);

/// Fine-tunes a copy of the warmed model with one method and evaluates it on
/// the source and unseen domains.
MethodOutcome finetune_method(const TrainConfig& cfg, const data::Dataset& dataset,
                              const WarmedModel& warm, const EstimationResult& estimate,
                              Method method, std::uint64_t seed);

/// Everything after pretraining for one seed: head reset, warm-up, DR-FIM
/// estimation, fine-tuning of each configured method, evaluation.
SeedOutcome run_from_pretrained(const TrainConfig& cfg, const data::Dataset& dataset,
                                const nn::SegmentationTransformer& model,
                                const nn::ParamStore& pretrained, std::uint64_t seed);

/// Warm-up, estimation, FisherTune fine-tuning and evaluation for one seed,
/// plus the configured baselines. Stage failures are rethrown tagged with
/// the stage name.
SeedOutcome run_fishertune(const TrainConfig& cfg, const data::Dataset& dataset,
                           std::uint64_t seed);

/// Prefixes an in-flight exception's message with a stage tag, keeping its type.
[[noreturn]] void rethrow_tagged(const std::string& stage);

}  // namespace ftune::tuner
