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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftune/tuner/tuner.hpp"

namespace ftune::io {

inline constexpr const char* kEvalReportSchema = "ftune.eval_report/1";

nlohmann::json to_json(const tuner::EvalReport& r);
/// Throws FormatError when the schema tag or a field is missing or wrong.
tuner::EvalReport eval_report_from_json(const nlohmann::json& j);
tuner::EvalReport load_eval_report(const std::filesystem::path& path);

/// One row per evaluated domain: method, seed, domain, role, patches, mIoU
/// and the per-class IoUs (empty cell for excluded classes).
std::string eval_report_csv(const tuner::EvalReport& r);

/// One row per selectable scalar: parameter[index], group, layer, drfim, taskfim.
std::string scores_csv(const nn::ParamStore& store, const nn::Selection& selection,
                       const Vector& drfim, const Vector& task);

std::string profile_csv(const tuner::SensitivityProfile& p);

/// Per-method aggregate over reports (seeds). Standard deviations use the
/// n - 1 denominator and are 0 for a single report.
struct MethodSummary {
  std::string method;
  std::size_t n = 0;
  double mean_unseen = 0.0;
  double std_unseen = 0.0;
  double mean_source = 0.0;
  double std_source = 0.0;
  std::vector<std::pair<int, double>> domain_means;  // by domain id
};

/// Rows in canonical method order, then unknown methods by name.
std::vector<MethodSummary> summarize(std::span<const tuner::EvalReport> reports);
std::string summary_csv(std::span<const MethodSummary> rows);
nlohmann::json summary_json(std::span<const MethodSummary> rows);

/// FisherTune against the baselines: mean unseen-domain mIoU differences
/// and the per-seed win count against TaskFIMMask.
struct OrderingCheck {
  std::size_t seeds = 0;
  double fishertune = 0.0;
  double freeze = 0.0;
  double random = 0.0;
  double taskfim = 0.0;
  double full = 0.0;
  std::size_t wins_vs_taskfim = 0;  // seeds with fishertune >= taskfim
  bool beats_freeze = false;
  bool beats_random = false;
  bool beats_taskfim_most_seeds = false;  // >= in at least 4 of every 5 seeds
};

OrderingCheck ordering_check(std::span<const tuner::EvalReport> reports);
nlohmann::json to_json(const OrderingCheck& c);

}  // namespace ftune::io
