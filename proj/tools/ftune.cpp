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

// ftune: command-line entry point.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ftune/core.hpp"
#include "ftune/io/commands.hpp"
#include "ftune/io/config_file.hpp"

namespace fs = std::filesystem;
using namespace ftune;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kFormat = 2, kNumerical = 3 };

tuner::TrainConfig config_from(const std::string& path) {
  return path.empty() ? tuner::TrainConfig{} : io::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FisherTune desk-scale pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  int seeds = 1;
  std::string out, data, checkpoint, scores, method = "fishertune";
  std::vector<std::string> inputs;
  bool direct = false, variational = false, zero_shift = false;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", config_path, "INI run configuration (defaults when omitted)")
        ->check(CLI::ExistingFile);
    c->add_option("--seed", seed, "base seed");
  };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic multi-domain corpus");
  common(gen);
  gen->add_option("--out", out, "output directory")->required();

  auto* pre = app.add_subcommand("pretrain", "generalist pretraining on the domain mixture");
  common(pre);
  pre->add_option("--data", data, "dataset directory")->required();
  pre->add_option("--out", out, "checkpoint file")->required();

  auto* est = app.add_subcommand("estimate", "DR-FIM and task Fisher scores");
  common(est);
  est->add_option("--data", data, "dataset directory")->required();
  est->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required();
  est->add_option("--out", out, "output directory")->required();
  auto* f_direct = est->add_flag("--direct", direct, "Fisher from per-sample gradients");
  est->add_flag("--variational", variational, "Fisher from the learned posterior precision")
      ->excludes(f_direct);
  est->add_flag("--zero-shift", zero_shift, "disable the domain perturbation");

  auto* ft = app.add_subcommand("finetune", "selective fine-tuning and evaluation");
  common(ft);
  ft->add_option("--data", data, "dataset directory")->required();
  ft->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required();
  ft->add_option("--scores", scores, "scores.ftck from estimate");
  ft->add_option("--method", method, "fishertune|full|freeze|random|taskfim");
  ft->add_option("--out", out, "output directory")->required();
  ft->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("report", "aggregate evaluation reports");
  rep->add_option("--inputs", inputs, "report JSON files")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", out, "output directory")->required();

  auto* exp = app.add_subcommand("experiment", "full pipeline over several seeds");
  common(exp);
  exp->add_option("--out", out, "output directory")->required();
  exp->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

  auto* pc = app.add_subcommand("print-config", "print the effective configuration");
  pc->add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    tuner::TrainConfig cfg = config_from(config_path);
    if (*gen) {
      // The corpus seed defaults to the config's data.seed.
      const std::uint64_t data_seed = gen->count("--seed") > 0 ? seed : cfg.data.seed;
      std::cout << io::cmd_gen_data({cfg, out, data_seed}) << "\n";
    } else if (*pre) {
      io::cmd_pretrain({cfg, data, out, seed});
    } else if (*est) {
      if (direct) cfg.estimation.mode = tuner::EstimationMode::Direct;
      if (variational) cfg.estimation.mode = tuner::EstimationMode::Variational;
      if (zero_shift) cfg.estimation.zero_shift = true;
      io::cmd_estimate({cfg, data, checkpoint, out, seed});
    } else if (*ft) {
      io::FinetuneArgs a{cfg, data, checkpoint, std::nullopt, tuner::parse_method(method), out, seed,
                         seeds};
      if (!scores.empty()) a.scores = scores;
      for (const auto& p : io::cmd_finetune(a)) std::cout << p.string() << "\n";
    } else if (*rep) {
      io::cmd_report({std::vector<fs::path>(inputs.begin(), inputs.end()), out});
    } else if (*exp) {
      std::cout << io::cmd_experiment({cfg, out, seed, seeds}).string() << "\n";
    } else if (*pc) {
      std::cout << io::serialize_config(cfg);
    }
  } catch (const NumericalError& e) {
    std::cerr << "ftune: numerical divergence: " << e.what() << "\n";
    return kNumerical;
  } catch (const FormatError& e) {
    std::cerr << "ftune: " << e.what() << "\n";
    return kFormat;
  } catch (const std::invalid_argument& e) {
    std::cerr << "ftune: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    // I/O failures and the like
    std::cerr << "ftune: " << e.what() << "\n";
    return kFormat;
  }
  return kOk;
}
