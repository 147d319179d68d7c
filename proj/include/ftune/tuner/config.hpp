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
#include <string>
#include <string_view>
#include <vector>

#include "ftune/data/domain.hpp"
#include "ftune/fisher/diag_fisher.hpp"
#include "ftune/nn/model.hpp"
#include "ftune/nn/param_store.hpp"
#include "ftune/variational/posterior.hpp"

namespace ftune::tuner {

enum class ScheduleMode : std::uint8_t { Ramp, Decay };
enum class Granularity : std::uint8_t { PerScalar, PerTensor };
enum class EstimationMode : std::uint8_t { Direct, Variational };
enum class Method : std::uint8_t { FisherTune, Full, Freeze, RandomMask, TaskFIMMask };
enum class PretrainTask : std::uint8_t { Coarse, Full };
enum class UncertaintySource : std::uint8_t { Batch, Corpus };

std::string_view to_string(ScheduleMode m);
std::string_view to_string(Granularity g);
std::string_view to_string(EstimationMode m);
std::string_view to_string(Method m);
std::string_view to_string(PretrainTask t);
std::string_view to_string(UncertaintySource u);
ScheduleMode parse_schedule_mode(std::string_view s);
Granularity parse_granularity(std::string_view s);
EstimationMode parse_estimation_mode(std::string_view s);
Method parse_method(std::string_view s);
PretrainTask parse_pretrain_task(std::string_view s);
UncertaintySource parse_uncertainty_source(std::string_view s);

/// Domain ids used by the benchmark layout.
inline constexpr int kSourceDomain = 100;
inline constexpr int kFirstUnseenDomain = 200;

/// Synthetic benchmark: a broad pretraining mixture, one narrow source
/// domain, and held-out shifted domains.
struct DataConfig {
  data::SceneConfig scene;
  std::uint64_t seed = 7;
  int mixture_domains = 8;
  int mixture_scenes = 64;
  int source_scenes = 256;
  int eval_scenes = 128;
  // Ranges for the randomly drawn mixture domains.
  double mixture_shift = 0.5;
  double mixture_scale_min = 0.5;
  double mixture_scale_max = 1.5;
  double mixture_noise_max = 0.08;
  double mixture_freq_min = 0.3;
  double mixture_freq_max = 1.2;
  data::DomainSpec source;
  std::vector<data::DomainSpec> unseen;

  DataConfig();
  void validate() const;
  /// Mixture specs (ids 0..n-1), then the source, then the unseen domains.
  std::vector<data::DomainSpec> all_specs() const;
  std::vector<int> mixture_ids() const;
  std::vector<int> unseen_ids() const;
};

struct EstimationConfig {
  EstimationMode mode = EstimationMode::Variational;
  int draws = 50;   // T2
  int batch_size = 8;
  fisher::LabelMode label_mode = fisher::LabelMode::ModelSampled;
  double epsilon = fisher::kDeltaEpsilon;
  variational::VarEstConfig var;
  variational::DenominatorVariant denominator = variational::DenominatorVariant::Literal;
  UncertaintySource uncertainty = UncertaintySource::Batch;
  bool zero_shift = false;

  void validate() const;
};

struct ScheduleConfig {
  ScheduleMode mode = ScheduleMode::Ramp;
  double delta_min = 2.0;   // percent
  double delta_max = 10.0;  // percent
  int warmup_steps = 300;   // T1
  int finetune_steps = 1500;  // T3, also the schedule horizon T
  int batch_size = 16;
  double warmup_lr = 0.1;
  double finetune_lr = 0.05;
  double decoder_lr = 0.05;
  double momentum = 0.9;
  Granularity granularity = Granularity::PerScalar;
  std::vector<nn::Group> selection_groups{nn::Group::Q, nn::Group::K, nn::Group::V,
                                          nn::Group::FFN};
  int pretrain_steps = 1200;
  double pretrain_lr = 0.05;
  PretrainTask pretrain_task = PretrainTask::Coarse;

  void validate() const;
};

struct BaselineConfig {
  std::vector<Method> methods{Method::FisherTune, Method::Full, Method::Freeze,
                              Method::RandomMask, Method::TaskFIMMask};
};

struct OutputConfig {
  std::string dir = "ftune_out";
  std::uint64_t seed = 1;
  int seeds = 1;
};

/// Every hyper-parameter of a run.
struct TrainConfig {
  nn::ModelConfig model;
  DataConfig data;
  EstimationConfig estimation;
  ScheduleConfig schedule;
  BaselineConfig baselines;
  OutputConfig output;

  void validate() const;
};

}  // namespace ftune::tuner
