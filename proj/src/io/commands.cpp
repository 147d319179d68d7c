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

#include "ftune/io/commands.hpp"

#include <iostream>
#include <set>
#include <sstream>

#include "ftune/io/checkpoint.hpp"
#include "ftune/io/config_file.hpp"
#include "ftune/io/dataset_io.hpp"
#include "ftune/io/reports.hpp"

namespace ftune::io {

namespace {

using nlohmann::json;

void log(const std::string& msg) { std::cerr << "[ftune] " << msg << std::endl; }

void check_dataset(const tuner::TrainConfig& cfg, const data::Dataset& ds) {
  if (!(ds.scene == cfg.data.scene)) throw FormatError("dataset scene geometry differs from the config");
  std::vector<int> needed = cfg.data.mixture_ids();
  needed.push_back(tuner::kSourceDomain);
  for (int id : cfg.data.unseen_ids()) needed.push_back(id);
  for (int id : needed) {
    if (!ds.has_domain(id)) {
      throw FormatError("dataset has no domain " + std::to_string(id) + " required by the config");
    }
  }
}

data::Dataset load_checked(const tuner::TrainConfig& cfg, const fs::path& dir) {
  data::Dataset ds = load_dataset(dir);
  check_dataset(cfg, ds);
  return ds;
}

Checkpoint scores_checkpoint(const nn::ParamStore& store, const nn::Selection& selection,
                             const tuner::EstimationResult& est, json meta) {
  Checkpoint ck;
  ck.meta = std::move(meta);
  ck.meta["kind"] = "scores";
  ck.meta["draws"] = est.drfim.meta.draws;
  ck.meta["floored"] = est.floored;
  ck.meta["label_mode"] = fisher::label_mode_name(est.drfim.meta.label_mode);
  double wsum = 0.0;
  double wmax = 0.0;
  for (double w : est.weights) {
    wsum += w;
    wmax = std::max(wmax, w);
  }
  ck.meta["shift_weight_mean"] = est.weights.empty() ? 0.0 : wsum / static_cast<double>(est.weights.size());
  ck.meta["shift_weight_max"] = wmax;
  const auto entries = selection.entries();
  for (const char* role : {"drfim", "taskfim"}) {
    const Vector& v = std::string(role) == "drfim" ? est.drfim.scores : est.task.scores;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const nn::ParamEntry& e = store[entries[k]];
      Matrix m = v.segment(static_cast<Eigen::Index>(selection.offset(k)), e.value.size())
                     .reshaped(e.value.rows(), e.value.cols());
      ck.arrays.add(std::string(role) + "/" + e.name, e.group, e.layer, std::move(m));
    }
  }
  return ck;
}

tuner::EstimationResult scores_from_checkpoint(const Checkpoint& ck, const nn::ParamStore& store,
                                               const nn::Selection& selection) {
  if (ck.meta.value("kind", "") != "scores") throw FormatError("file does not hold Fisher scores");
  tuner::EstimationResult est;
  const auto n = static_cast<Eigen::Index>(selection.total_scalars());
  est.drfim.scores.resize(n);
  est.task.scores.resize(n);
  est.drfim.role = fisher::FisherRole::DRFIM;
  const auto entries = selection.entries();
  for (const char* role : {"drfim", "taskfim"}) {
    Vector& v = std::string(role) == "drfim" ? est.drfim.scores : est.task.scores;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const nn::ParamEntry& e = store[entries[k]];
      const std::string name = std::string(role) + "/" + e.name;
      const auto idx = ck.arrays.find(name);
      if (!idx || ck.arrays[*idx].value.rows() != e.value.rows() ||
          ck.arrays[*idx].value.cols() != e.value.cols()) {
        throw FormatError("scores do not align with the model: '" + name + "' missing or misshapen");
      }
      v.segment(static_cast<Eigen::Index>(selection.offset(k)), e.value.size()) =
          ck.arrays[*idx].value.reshaped();
    }
  }
  if (ck.arrays.size() != 2 * entries.size()) {
    throw FormatError("scores file holds arrays outside the configured selection");
  }
  return est;
}

Checkpoint posterior_checkpoint(const nn::ParamStore& store, const nn::Selection& selection,
                                const variational::GaussianPosterior& q, bool with_mean, json meta) {
  Checkpoint ck;
  ck.meta = std::move(meta);
  ck.meta["kind"] = "posterior";
  const auto entries = selection.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const nn::ParamEntry& e = store[entries[k]];
    const auto off = static_cast<Eigen::Index>(selection.offset(k));
    ck.arrays.add("log_precision/" + e.name, e.group, e.layer,
                  q.log_precision.segment(off, e.value.size()).reshaped(e.value.rows(), e.value.cols()));
    if (with_mean) {
      ck.arrays.add("mean/" + e.name, e.group, e.layer,
                    q.mean.segment(off, e.value.size()).reshaped(e.value.rows(), e.value.cols()));
    }
  }
  return ck;
}

void write_estimate(const fs::path& dir, const tuner::TrainConfig& cfg,
                    const tuner::WarmedModel& warm, const tuner::EstimationResult& est,
                    const json& meta) {
  const nn::Selection selection(warm.store, cfg.schedule.selection_groups);
  save_checkpoint(dir / "scores.ftck", scores_checkpoint(warm.store, selection, est, meta));
  write_atomic(dir / "scores.csv", scores_csv(warm.store, selection, est.drfim.scores, est.task.scores));
  write_atomic(dir / "profile.csv",
               profile_csv(tuner::sensitivity_profile(warm.store, selection, est, cfg.schedule)));
  if (est.q_x && est.q_xp) {
    json pm = meta;
    pm["mean_reference"] = "warmed checkpoint (means frozen at the pretrained values)";
    pm["gamma"] = cfg.estimation.var.gamma;
    pm["tau"] = cfg.estimation.var.tau;
    const bool with_mean = !cfg.estimation.var.freeze_mean;
    save_checkpoint(dir / "posterior_x.ftck", posterior_checkpoint(warm.store, selection, *est.q_x, with_mean, pm));
    save_checkpoint(dir / "posterior_xp.ftck", posterior_checkpoint(warm.store, selection, *est.q_xp, with_mean, pm));
  }
}

fs::path write_method(const fs::path& dir, const tuner::TrainConfig& cfg,
                      tuner::MethodOutcome& mo, const json& meta) {
  const std::string name(tuner::to_string(mo.method));
  json m = meta;
  m["stage"] = "finetuned";
  m["method"] = name;
  m["seed"] = mo.report.seed;
  const Checkpoint ck = make_model_checkpoint(cfg.model, mo.store, m);
  const Bytes bytes = encode_checkpoint(ck);
  write_atomic(dir / (name + ".ftck"), bytes);
  mo.report.checkpoint_digest = sha256_hex(bytes);
  mo.report.config_echo = serialize_config(cfg);
  const fs::path report = dir / (name + "_report.json");
  write_atomic(report, to_json(mo.report).dump(2) + "\n");
  write_atomic(dir / (name + "_report.csv"), eval_report_csv(mo.report));
  return report;
}

fs::path seed_dir(const fs::path& out, std::uint64_t seed) {
  return out / ("seed_" + std::to_string(seed));
}

std::pair<nn::SegmentationTransformer, nn::ParamStore> load_pretrained(
    const tuner::TrainConfig& cfg, const fs::path& path) {
  return restore_model(load_checkpoint(path), cfg.model);
}

tuner::PretrainResult run_pretrain(const tuner::TrainConfig& cfg, const data::Dataset& ds,
                                   std::uint64_t seed) {
  try {
    return tuner::pretrain(cfg, ds, derive_seed(seed, stream_tag("pretrain")));
  } catch (...) {
    tuner::rethrow_tagged("pretrain");
  }
}

json pretrain_meta(const tuner::PretrainResult& p, std::uint64_t seed, const tuner::TrainConfig& cfg) {
  return {{"stage", "pretrained"},
          {"seed", seed},
          {"task", tuner::to_string(cfg.schedule.pretrain_task)},
          {"initial_loss", p.initial_loss},
          {"final_loss", p.final_loss},
          {"mixture_accuracy", p.accuracy},
          {"majority_accuracy", p.majority_accuracy},
          {"config", serialize_config(cfg)}};
}

}  // namespace

std::string cmd_gen_data(const GenDataArgs& a) {
  tuner::TrainConfig cfg = a.config;
  cfg.data.seed = a.seed;
  const data::Dataset ds = tuner::build_dataset(cfg.data);
  const std::string digest = save_dataset(a.out, ds);
  log("dataset with " + std::to_string(ds.specs.size()) + " domains written to " + a.out.string() +
      " (sha256 " + digest + ")");
  return digest;
}

void cmd_pretrain(const PretrainArgs& a) {
  a.config.validate();
  const data::Dataset ds = load_checked(a.config, a.data);
  const tuner::PretrainResult p = run_pretrain(a.config, ds, a.seed);
  save_checkpoint(a.out, make_model_checkpoint(a.config.model, p.store, pretrain_meta(p, a.seed, a.config)));
  log("pretrained: mixture accuracy " + std::to_string(p.accuracy) + " (majority " +
      std::to_string(p.majority_accuracy) + ")");
}

void cmd_estimate(const EstimateArgs& a) {
  a.config.validate();
  const data::Dataset ds = load_checked(a.config, a.data);
  const auto [model, store] = load_pretrained(a.config, a.checkpoint);
  const tuner::WarmedModel warm = tuner::prepare_warm(a.config, ds, model, store, a.seed);
  const tuner::EstimationResult est = tuner::estimate_for_seed(a.config, ds, warm, a.seed);
  const json meta = {{"seed", a.seed},
                     {"mode", tuner::to_string(a.config.estimation.mode)},
                     {"zero_shift", a.config.estimation.zero_shift},
                     {"checkpoint_sha256", sha256_hex(read_file(a.checkpoint))},
                     {"config", serialize_config(a.config)}};
  write_estimate(a.out, a.config, warm, est, meta);
  log("scores written to " + a.out.string());
}

std::vector<fs::path> cmd_finetune(const FinetuneArgs& a) {
  a.config.validate();
  if (a.seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  const bool needs_scores =
      a.method == tuner::Method::FisherTune || a.method == tuner::Method::TaskFIMMask;
  if (needs_scores && !a.scores) throw std::invalid_argument("this method needs --scores");
  const data::Dataset ds = load_checked(a.config, a.data);
  const auto [model, store] = load_pretrained(a.config, a.checkpoint);
  const json meta = {{"pretrained_sha256", sha256_hex(read_file(a.checkpoint))}};
  std::optional<Checkpoint> scores;
  if (a.scores) scores = load_checkpoint(*a.scores);
  std::vector<fs::path> reports;
  for (int i = 0; i < a.seeds; ++i) {
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
    const tuner::WarmedModel warm = tuner::prepare_warm(a.config, ds, model, store, seed);
    const nn::Selection selection(warm.store, a.config.schedule.selection_groups);
    tuner::EstimationResult est;
    if (scores) {
      est = scores_from_checkpoint(*scores, warm.store, selection);
    } else {
      est.drfim.scores = est.task.scores = Vector::Zero(static_cast<Eigen::Index>(selection.total_scalars()));
    }
    tuner::MethodOutcome mo = tuner::finetune_method(a.config, ds, warm, est, a.method, seed);
    reports.push_back(write_method(seed_dir(a.out, seed), a.config, mo, meta));
    log("seed " + std::to_string(seed) + " " + std::string(tuner::to_string(a.method)) +
        ": unseen mIoU " + std::to_string(mo.report.mean_unseen_miou));
  }
  return reports;
}

void cmd_report(const ReportArgs& a) {
  if (a.inputs.empty()) throw std::invalid_argument("report needs at least one input");
  std::vector<tuner::EvalReport> reports;
  for (const auto& p : a.inputs) reports.push_back(load_eval_report(p));
  const auto rows = summarize(reports);
  write_atomic(a.out / "comparison.csv", summary_csv(rows));
  json j;
  j["reports"] = a.inputs.size();
  j["methods"] = summary_json(rows);
  write_atomic(a.out / "comparison.json", j.dump(2) + "\n");
  std::string groups = "seed,group,layer,count,mean_drfim,mean_taskfim,selected_fraction\n";
  std::set<fs::path> seen;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    const fs::path profile = a.inputs[i].parent_path() / "profile.csv";
    if (!seen.insert(profile).second || !fs::exists(profile)) continue;
    const Bytes raw = read_file(profile);
    std::istringstream in(std::string(raw.begin(), raw.end()));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.starts_with("group,")) continue;
      // level,name,group,layer,count,... -> drop level and name
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
      if (f.size() != 8) throw FormatError("malformed profile row in " + profile.string());
      groups += std::to_string(reports[i].seed) + "," + f[2] + "," + f[3] + "," + f[4] + "," + f[5] + "," + f[6] +
                "," + f[7] + "\n";
    }
  }
  if (!seen.empty()) write_atomic(a.out / "sensitivity_groups.csv", groups);
  try {
    const OrderingCheck c = ordering_check(reports);
    write_atomic(a.out / "ordering.json", to_json(c).dump(2) + "\n");
  } catch (const FormatError&) {
    // Not every method present; the comparison table is still complete.
  }
}

fs::path cmd_experiment(const ExperimentArgs& a) {
  a.config.validate();
  if (a.seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  const tuner::TrainConfig& cfg = a.config;
  const data::Dataset ds = tuner::build_dataset(cfg.data);
  save_dataset(a.out / "data", ds);
  std::vector<fs::path> reports;
  for (int i = 0; i < a.seeds; ++i) {
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
    const fs::path dir = seed_dir(a.out, seed);
    log("seed " + std::to_string(seed) + ": pretraining");
    const tuner::PretrainResult p = run_pretrain(cfg, ds, seed);
    const Bytes pre = encode_checkpoint(make_model_checkpoint(cfg.model, p.store, pretrain_meta(p, seed, cfg)));
    write_atomic(dir / "pretrained.ftck", pre);
    const json meta = {{"pretrained_sha256", sha256_hex(pre)}};

    log("seed " + std::to_string(seed) + ": warm-up and estimation");
    const tuner::WarmedModel warm = tuner::prepare_warm(cfg, ds, p.model, p.store, seed);
    const tuner::EstimationResult est = tuner::estimate_for_seed(cfg, ds, warm, seed);
    json emeta = {{"seed", seed},
                  {"mode", tuner::to_string(cfg.estimation.mode)},
                  {"zero_shift", cfg.estimation.zero_shift},
                  {"checkpoint_sha256", sha256_hex(pre)},
                  {"config", serialize_config(cfg)}};
    write_estimate(dir, cfg, warm, est, emeta);
    for (tuner::Method m : cfg.baselines.methods) {
      tuner::MethodOutcome mo = tuner::finetune_method(cfg, ds, warm, est, m, seed);
      reports.push_back(write_method(dir, cfg, mo, meta));
      log("seed " + std::to_string(seed) + " " + std::string(tuner::to_string(m)) +
          ": unseen mIoU " + std::to_string(mo.report.mean_unseen_miou) + ", source mIoU " +
          std::to_string(mo.report.source_miou));
    }
  }
  cmd_report({reports, a.out});
  return a.out / "ordering.json";
}

}  // namespace ftune::io
