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

#include "ftune/tuner/config.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace ftune::tuner {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 2> kScheduleNames{"ramp", "decay"};
constexpr std::array<std::string_view, 2> kGranularityNames{"per_scalar", "per_tensor"};
constexpr std::array<std::string_view, 2> kEstimationNames{"direct", "variational"};
constexpr std::array<std::string_view, 5> kMethodNames{"fishertune", "full", "freeze", "random",
                                                       "taskfim"};
constexpr std::array<std::string_view, 2> kPretrainNames{"coarse", "full"};
constexpr std::array<std::string_view, 2> kUncertaintyNames{"batch", "corpus"};

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

std::string_view to_string(ScheduleMode m) { return kScheduleNames.at(static_cast<std::size_t>(m)); }
std::string_view to_string(Granularity g) { return kGranularityNames.at(static_cast<std::size_t>(g)); }
std::string_view to_string(EstimationMode m) {
  return kEstimationNames.at(static_cast<std::size_t>(m));
}
std::string_view to_string(Method m) { return kMethodNames.at(static_cast<std::size_t>(m)); }
std::string_view to_string(PretrainTask t) { return kPretrainNames.at(static_cast<std::size_t>(t)); }
std::string_view to_string(UncertaintySource u) {
  return kUncertaintyNames.at(static_cast<std::size_t>(u));
}

ScheduleMode parse_schedule_mode(std::string_view s) {
  return parse_enum<ScheduleMode>(s, kScheduleNames, "schedule mode");
}
Granularity parse_granularity(std::string_view s) {
  return parse_enum<Granularity>(s, kGranularityNames, "granularity");
}
EstimationMode parse_estimation_mode(std::string_view s) {
  return parse_enum<EstimationMode>(s, kEstimationNames, "estimation mode");
}
Method parse_method(std::string_view s) { return parse_enum<Method>(s, kMethodNames, "method"); }
PretrainTask parse_pretrain_task(std::string_view s) {
  return parse_enum<PretrainTask>(s, kPretrainNames, "pretrain task");
}
UncertaintySource parse_uncertainty_source(std::string_view s) {
  return parse_enum<UncertaintySource>(s, kUncertaintyNames, "uncertainty source");
}

DataConfig::DataConfig() {
  source.domain_id = kSourceDomain;
  source.channel_mean_shift = {0.10, -0.10, 0.05};
  source.channel_scale = {1.0, 0.9, 1.1};
  source.noise_std = 0.02;
  source.texture_freq = 0.5;

  data::DomainSpec a;
  a.domain_id = kFirstUnseenDomain;
  a.channel_mean_shift = {-0.35, 0.30, 0.20};
  a.channel_scale = {0.6, 1.3, 0.8};
  a.noise_std = 0.06;
  a.texture_freq = 1.0;

  data::DomainSpec b;
  b.domain_id = kFirstUnseenDomain + 1;
  b.channel_mean_shift = {0.40, -0.25, -0.30};
  b.channel_scale = {1.4, 0.7, 1.2};
  b.noise_std = 0.04;
  b.texture_freq = 0.35;

  unseen = {a, b};
}

void DataConfig::validate() const {
  scene.validate();
  require(mixture_domains >= 1, "data.mixture_domains must be >= 1");
  require(mixture_domains < kSourceDomain, "data.mixture_domains too large");
  require(mixture_scenes >= 1 && source_scenes >= 1 && eval_scenes >= 1,
          "data scene counts must be >= 1");
  require(mixture_shift >= 0.0, "data.mixture_shift must be >= 0");
  require(mixture_scale_min > 0.0 && mixture_scale_min <= mixture_scale_max,
          "data.mixture_scale range invalid");
  require(mixture_noise_max >= 0.0, "data.mixture_noise_max must be >= 0");
  require(mixture_freq_min > 0.0 && mixture_freq_min <= mixture_freq_max,
          "data.mixture_freq range invalid");
  require(source.domain_id == kSourceDomain, "source domain id must be 100");
  source.validate(scene.channels);
  require(!unseen.empty(), "at least one unseen domain is required");
  for (std::size_t i = 0; i < unseen.size(); ++i) {
    require(unseen[i].domain_id == kFirstUnseenDomain + static_cast<int>(i),
            "unseen domain ids must be 200, 201, ...");
    unseen[i].validate(scene.channels);
  }
}

std::vector<data::DomainSpec> DataConfig::all_specs() const {
  std::vector<data::DomainSpec> specs;
  Rng rng(derive_seed(seed, stream_tag("mixture-specs")));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int d = 0; d < mixture_domains; ++d) {
    data::DomainSpec s;
    s.domain_id = d;
    for (int c = 0; c < scene.channels; ++c) {
      s.channel_mean_shift.push_back(mixture_shift * (2.0 * unit(rng) - 1.0));
      s.channel_scale.push_back(mixture_scale_min +
                                (mixture_scale_max - mixture_scale_min) * unit(rng));
    }
    s.noise_std = mixture_noise_max * unit(rng);
    s.texture_freq = mixture_freq_min + (mixture_freq_max - mixture_freq_min) * unit(rng);
    specs.push_back(std::move(s));
  }
  specs.push_back(source);
  for (const auto& u : unseen) specs.push_back(u);
  return specs;
}

std::vector<int> DataConfig::mixture_ids() const {
  std::vector<int> ids;
  for (int d = 0; d < mixture_domains; ++d) ids.push_back(d);
  return ids;
}

std::vector<int> DataConfig::unseen_ids() const {
  std::vector<int> ids;
  for (const auto& u : unseen) ids.push_back(u.domain_id);
  return ids;
}

void EstimationConfig::validate() const {
  require(draws >= 1, "estimation.draws (T2) must be >= 1");
  require(batch_size >= 2, "estimation.batch_size must be >= 2");
  require(epsilon > 0.0, "estimation.epsilon must be > 0");
  var.validate();
}

void ScheduleConfig::validate() const {
  require(0.0 <= delta_min && delta_min <= delta_max && delta_max <= 100.0,
          "schedule requires 0 <= delta_min <= delta_max <= 100");
  require(warmup_steps >= 1, "schedule.warmup_steps (T1) must be >= 1");
  require(finetune_steps >= 1, "schedule.finetune_steps (T3) must be >= 1");
  require(batch_size >= 1, "schedule.batch_size must be >= 1");
  require(warmup_lr > 0.0 && finetune_lr >= 0.0 && decoder_lr >= 0.0,
          "schedule learning rates must be non-negative (warmup_lr > 0)");
  require(momentum >= 0.0 && momentum < 1.0, "schedule.momentum must be in [0, 1)");
  require(!selection_groups.empty(), "schedule.selection_groups must not be empty");
  for (nn::Group g : selection_groups) {
    require(g != nn::Group::Decoder, "decoder cannot be a selection group");
  }
  require(pretrain_steps >= 0, "schedule.pretrain_steps must be >= 0");
  require(pretrain_lr > 0.0, "schedule.pretrain_lr must be > 0");
}

void TrainConfig::validate() const {
  model.validate();
  data.validate();
  estimation.validate();
  schedule.validate();
  require(model.image_size == data.scene.image_size && model.patch_size == data.scene.patch_size &&
              model.channels == data.scene.channels,
          "model and data scene geometry differ");
  require(model.num_classes == data::kNumClasses, "model.num_classes must equal 4");
  require(!baselines.methods.empty(), "baselines.methods must not be empty");
  require(output.seeds >= 1, "output.seeds must be >= 1");
}

}  // namespace ftune::tuner
