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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ftune/tuner/config.hpp"

namespace ftune::io {

namespace fs = std::filesystem;

/// Command implementations behind the `ftune` binary. Each returns the
/// paths it wrote; errors surface as FormatError (exit 2), NumericalError
/// (exit 3) or std::invalid_argument (exit 1).

struct GenDataArgs {
  tuner::TrainConfig config;
  fs::path out;
  std::uint64_t seed = 7;
};
/// Returns the dataset file digest.
std::string cmd_gen_data(const GenDataArgs& a);

struct PretrainArgs {
  tuner::TrainConfig config;
  fs::path data;
  fs::path out;
  std::uint64_t seed = 1;
};
void cmd_pretrain(const PretrainArgs& a);

struct EstimateArgs {
  tuner::TrainConfig config;
  fs::path data;
  fs::path checkpoint;
  fs::path out;
  std::uint64_t seed = 1;
};
/// Writes scores.ftck, scores.csv and profile.csv (plus posterior_x.ftck
/// and posterior_xp.ftck in variational mode) into `out`.
void cmd_estimate(const EstimateArgs& a);

struct FinetuneArgs {
  tuner::TrainConfig config;
  fs::path data;
  fs::path checkpoint;
  std::optional<fs::path> scores;  // required for fishertune and taskfim
  tuner::Method method = tuner::Method::FisherTune;
  fs::path out;
  std::uint64_t seed = 1;
  int seeds = 1;
};
/// For each seed s: out/seed_<s>/<method>.ftck, <method>_report.json and
/// <method>_report.csv. Returns the report paths.
std::vector<fs::path> cmd_finetune(const FinetuneArgs& a);

struct ReportArgs {
  std::vector<fs::path> inputs;
  fs::path out;
};
/// Writes comparison.csv and comparison.json (and ordering.json when every
/// method needed for the ordering check is present).
void cmd_report(const ReportArgs& a);

struct ExperimentArgs {
  tuner::TrainConfig config;
  fs::path out;
  std::uint64_t seed = 1;
  int seeds = 1;
};
/// Full pipeline per seed (pretrain, warm-up, estimation, every configured
/// method) followed by the report. Returns the ordering summary path.
fs::path cmd_experiment(const ExperimentArgs& a);

}  // namespace ftune::io
