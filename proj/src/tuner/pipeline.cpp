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

#include <stdexcept>

#include "ftune/tuner/tuner.hpp"

namespace ftune::tuner {

void rethrow_tagged(const std::string& stage) {
  try {
    throw;
  } catch (const NumericalError& e) {
    throw NumericalError(stage + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(stage + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(stage + ": " + e.what());
  }
}

const MethodOutcome& SeedOutcome::get(Method m) const {
  for (const auto& o : methods) {
    if (o.method == m) return o;
  }
  throw std::out_of_range("method '" + std::string(to_string(m)) + "' was not run");
}

data::Dataset build_dataset(const DataConfig& cfg) {
  cfg.validate();
  const auto specs = cfg.all_specs();
  const auto mixture_end = specs.begin() + cfg.mixture_domains;
  const std::vector<data::DomainSpec> mixture(specs.begin(), mixture_end);
  const std::vector<data::DomainSpec> source{cfg.source};
  data::Dataset out =
      data::gen_corpus(mixture, static_cast<std::size_t>(cfg.mixture_scenes), cfg.scene, cfg.seed);
  for (auto [part, count] : {std::pair{&source, cfg.source_scenes}, std::pair{&cfg.unseen, cfg.eval_scenes}}) {
    data::Dataset d = data::gen_corpus(*part, static_cast<std::size_t>(count), cfg.scene, cfg.seed);
    for (std::size_t i = 0; i < d.specs.size(); ++i) {
      out.specs.push_back(d.specs[i]);
      out.domains.push_back(std::move(d.domains[i]));
    }
  }
  out.scenes_per_domain = 0;  // counts differ per role
  return out;
}

WarmedModel prepare_warm(const TrainConfig& cfg, const data::Dataset& dataset,
                         const nn::SegmentationTransformer& model,
                         const nn::ParamStore& pretrained, std::uint64_t seed) {
  try {
    WarmedModel w{model, pretrained, {}};
    w.model.reset_decoder(w.store, cfg.model.num_classes, derive_seed(seed, stream_tag("head")));
    w.warmup = warmup_decoder(w.model, w.store, dataset.domain(kSourceDomain), cfg.schedule,
                              derive_seed(seed, stream_tag("warmup")));
    return w;
  } catch (...) {
    rethrow_tagged("warmup");
  }
}

EstimationResult estimate_for_seed(const TrainConfig& cfg, const data::Dataset& dataset,
                                   const WarmedModel& warm, std::uint64_t seed) {
  try {
    const nn::Selection selection(warm.store, cfg.schedule.selection_groups);
    return estimate_drfim_round(warm.model, warm.store, selection, dataset.domain(kSourceDomain),
                                cfg.estimation, derive_seed(seed, stream_tag("estimate")));
  } catch (...) {
    rethrow_tagged("estimate");
  }
}

MethodOutcome finetune_method(const TrainConfig& cfg, const data::Dataset& dataset,
                              const WarmedModel& warm, const EstimationResult& estimate,
                              Method method, std::uint64_t seed) {
  try {
    const nn::Selection selection(warm.store, cfg.schedule.selection_groups);
    MethodOutcome mo{method, warm.store, {}, {}};
    const MethodPlan plan = plan_method(method, estimate, cfg.schedule, seed);
    mo.finetune = finetune_selective(warm.model, mo.store, selection, dataset.domain(kSourceDomain),
                                     plan.scores, plan.schedule,
                                     derive_seed(seed, stream_tag("finetune")));
    std::vector<int> eval_ids{kSourceDomain};
    const auto unseen = cfg.data.unseen_ids();
    eval_ids.insert(eval_ids.end(), unseen.begin(), unseen.end());
    mo.report = evaluate(warm.model, mo.store, dataset, eval_ids, unseen);
    mo.report.method = std::string(to_string(method));
    mo.report.seed = seed;
    return mo;
  } catch (...) {
    rethrow_tagged("finetune[" + std::string(to_string(method)) + "]");
  }
}

SeedOutcome run_from_pretrained(const TrainConfig& cfg, const data::Dataset& dataset,
                                const nn::SegmentationTransformer& model,
                                const nn::ParamStore& pretrained, std::uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;
  const WarmedModel warm = prepare_warm(cfg, dataset, model, pretrained, seed);
  out.warmup = warm.warmup;
  out.estimate = estimate_for_seed(cfg, dataset, warm, seed);
  try {
    const nn::Selection selection(warm.store, cfg.schedule.selection_groups);
    out.profile = sensitivity_profile(warm.store, selection, out.estimate, cfg.schedule);
  } catch (...) {
    rethrow_tagged("profile");
  }
  for (Method m : cfg.baselines.methods) {
    out.methods.push_back(finetune_method(cfg, dataset, warm, out.estimate, m, seed));
  }
  return out;
}

SeedOutcome run_fishertune(const TrainConfig& cfg, const data::Dataset& dataset,
                           std::uint64_t seed) {
  PretrainResult pre = [&] {
    try {
      return pretrain(cfg, dataset, derive_seed(seed, stream_tag("pretrain")));
    } catch (...) {
      rethrow_tagged("pretrain");
    }
  }();
  SeedOutcome out = run_from_pretrained(cfg, dataset, pre.model, pre.store, seed);
  out.pretrained = std::move(pre);
  return out;
}

}  // namespace ftune::tuner
