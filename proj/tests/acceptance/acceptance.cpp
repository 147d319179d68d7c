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

// Acceptance suite: one PASS/FAIL line per criterion. The full run includes
// the 5-seed desk-scale experiment and takes on the order of 25 minutes.
//
//   acceptance [--work DIR] [--only N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "ftune/data/domain.hpp"
#include "ftune/fisher/diag_fisher.hpp"
#include "ftune/io/checkpoint.hpp"
#include "ftune/io/commands.hpp"
#include "ftune/io/config_file.hpp"
#include "ftune/io/dataset_io.hpp"
#include "ftune/nn/autodiff.hpp"
#include "ftune/tuner/tuner.hpp"
#include "ftune/variational/posterior.hpp"
#include "quadratic_source.hpp"
#include "test_util.hpp"
#include "tiny_pipeline.hpp"

namespace fs = std::filesystem;
using namespace ftune;

namespace {

// Pinned tolerances and limits.
constexpr double kGradRelTol = 1e-5;
constexpr double kGradAbsTol = 1e-10;  // for |g| < 1e-6
constexpr double kFdStep = 1e-4;
constexpr double kMcSigmas = 3.0;
constexpr double kKlIdentityTol = 1e-12;
constexpr double kRecoveryTol = 0.05;
constexpr double kIdentityTol = 1e-12;
constexpr double kTargetTol = 1e-9;
constexpr double kHandTol = 1e-9;
constexpr double kScheduleTol = 1e-12;
constexpr double kDivergenceSpearman = 0.999;
constexpr double kExperimentBudgetSeconds = 30.0 * 60.0;
constexpr int kExperimentSeeds = 5;
constexpr const char* kDefaultDatasetDigest =
    "aa599a044e2c446936ce415f85562d3731db5b65c78cc199fa1fb585c5d42ec0";
constexpr const char* kTinyScoreDigest =
    "485894786d7baedd1733646f33bde3fcaaa4e1bfe0c24e351071342b4510b61b";

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_work;

// 1 ---------------------------------------------------------------------------
Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(1, stream_tag("acceptance-gradient")));
  int checked = 0, failed = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    nn::ModelConfig c = testing::tiny_config();
    c.num_heads = 1 + trial % 3;
    c.head_dim = 2 + trial % 2;
    c.embed_dim = c.num_heads * c.head_dim;
    c.num_blocks = 1 + trial % 2;
    c.ffn_hidden = 4 + 2 * trial;
    c.num_classes = 2 + trial % 3;
    auto [model, store] = nn::SegmentationTransformer::build(c, 500 + static_cast<std::uint64_t>(trial));
    const data::Sample s = testing::random_sample(c, rng);
    auto loss_of = [&](const nn::ParamStore& st) {
      nn::Tape t;
      return t.scalar(nn::loss_ce(model.forward(t, st, s.image), s.labels));
    };
    nn::Tape tape;
    const nn::GradMap g =
        tape.backward(nn::loss_ce(model.forward(tape, store, s.image), s.labels), store.size());
    std::uniform_int_distribution<std::size_t> pick(0, store.total_scalars() - 1);
    for (int k = 0; k < 40; ++k) {
      const std::size_t flat = pick(rng);
      std::size_t e = store.size() - 1;
      while (store.offset(e) > flat) --e;
      const auto idx = static_cast<Eigen::Index>(flat - store.offset(e));
      const double analytic = g.dense(e, store).reshaped()(idx);
      const double fd = testing::central_difference(store, e, idx, loss_of, kFdStep);
      if (std::max(std::abs(analytic), std::abs(fd)) < 1e-6) {
        failed += std::abs(analytic - fd) > kGradAbsTol ? 1 : 0;
        continue;
      }
      const double err = testing::relative_error(analytic, fd);
      worst = std::max(worst, err);
      failed += err > kGradRelTol ? 1 : 0;
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && checked >= 100 && secs < 60.0,
          fmt("%d relative checks over 6 configs, worst %.2e, %d failures, %.1fs", checked, worst, failed,
              secs)};
}

// 2 ---------------------------------------------------------------------------
struct LogisticUnit {
  double x, w;
  std::size_t num_items() const { return 1; }
  std::size_t dimension() const { return 1; }
  Vector sample_gradient(std::size_t, fisher::LabelMode, Rng& rng) const {
    const double p = 1.0 / (1.0 + std::exp(-w * x));
    const double y = std::bernoulli_distribution(p)(rng) ? 1.0 : 0.0;
    return Vector::Constant(1, (p - y) * x);
  }
};

Outcome fisher_oracle() {
  const auto t0 = Clock::now();
  constexpr std::size_t kN = 50000;
  bool ok = true;
  std::string detail;
  for (auto [x, w] : {std::pair{2.0, 0.0}, std::pair{1.0, 1.0}, std::pair{0.5, -1.0}}) {
    const double p = 1.0 / (1.0 + std::exp(-w * x));
    const double f = x * x * p * (1.0 - p);
    const double m4 = std::pow(x, 4) * (p * std::pow(1.0 - p, 4) + (1.0 - p) * std::pow(p, 4));
    const double se = std::sqrt((m4 - f * f) / static_cast<double>(kN));
    const double est =
        fisher::estimate_diag_fim(LogisticUnit{x, w}, fisher::LabelMode::ModelSampled, kN, 2).scores(0);
    const double z = se > 0.0 ? std::abs(est - f) / se : (est == f ? 0.0 : INFINITY);
    ok = ok && z <= kMcSigmas;
    detail += fmt("(%.1f,%.0f): %.5f vs %.5f [%.2f se] ", x, w, est, f, z);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 60.0, detail + fmt("%.1fs", secs)};
}

// 3 ---------------------------------------------------------------------------
Outcome kl_oracle() {
  const auto t0 = Clock::now();
  using variational::GaussianPosterior;
  using variational::PriorSpec;
  Rng rng(derive_seed(3, stream_tag("acceptance-kl")));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 8);
  const PriorSpec same{Vector::Constant(5, 0.3), 0.49};
  const double identity = variational::kl_gaussian(GaussianPosterior::at_prior(same), same);
  bool ok = std::abs(identity) <= kKlIdentityTol;
  double worst_z = 0.0;
  constexpr int kDraws = 100000;
  for (int pair = 0; pair < 10; ++pair) {
    const int k = dim(rng);
    Vector mean(k), lam(k), theta(k);
    for (int i = 0; i < k; ++i) {
      mean(i) = normal(rng);
      theta(i) = normal(rng);
      lam(i) = std::exp(3.0 * unif(rng) - 1.0);
    }
    const double tau = 0.5 + 1.5 * unif(rng);
    const GaussianPosterior q{mean, lam.array().log().matrix()};
    const PriorSpec p{theta, tau * tau};
    const Vector sd = q.stddev();
    double sum = 0.0, sum2 = 0.0;
    for (int n = 0; n < kDraws; ++n) {
      double v = 0.0;
      for (int i = 0; i < k; ++i) {
        const double z = normal(rng);
        const double x = mean(i) + sd(i) * z;
        v += -0.5 * z * z + 0.5 * std::log(lam(i)) + 0.5 * (x - theta(i)) * (x - theta(i)) / (tau * tau) +
             std::log(tau);
      }
      sum += v;
      sum2 += v * v;
    }
    const double m = sum / kDraws;
    const double se = std::sqrt((sum2 / kDraws - m * m) / kDraws);
    const double z = std::abs(variational::kl_gaussian(q, p) - m) / se;
    worst_z = std::max(worst_z, z);
    ok = ok && z <= kMcSigmas;
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 60.0,
          fmt("identity %.1e, worst of 10 pairs %.2f se, %.1fs", identity, worst_z, secs)};
}

// 4 ---------------------------------------------------------------------------
Outcome precision_oracle() {
  const auto t0 = Clock::now();
  bool ok = true;
  double worst = 0.0;
  int cases = 0;
  for (double gamma : {0.5, 1.0, 2.0}) {
    for (double tau : {0.5, 1.0}) {
      for (Eigen::Index k : {Eigen::Index{4}, Eigen::Index{32}}) {
        Rng rng(derive_seed(4, stream_tag("acceptance-quadratic"), static_cast<std::uint64_t>(cases)));
        const Vector h = testing::random_curvatures(k, rng);
        std::normal_distribution<double> normal(0.0, 0.5);
        Vector a(k);
        for (Eigen::Index i = 0; i < k; ++i) a(i) = normal(rng);
        testing::QuadraticSource src{h, a};
        const variational::PriorSpec prior{Vector::Zero(k), tau * tau};
        Rng opt(derive_seed(4, stream_tag("acceptance-optimize"), static_cast<std::uint64_t>(cases)));
        const auto q = variational::optimize_precision(src, prior, testing::quadratic_oracle_config(gamma, tau), opt);
        const double err = testing::recovery_error(variational::fim_from_precision(q, gamma, tau).scores, h);
        worst = std::max(worst, err);
        ok = ok && err <= kRecoveryTol;
        ++cases;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 300.0, fmt("%d cases, worst per-coordinate error %.2f%%, %.1fs", cases, 100.0 * worst, secs)};
}

// 5 ---------------------------------------------------------------------------
Outcome perturbation_identity() {
  const tuner::TrainConfig cfg = testing::tiny_train_config();
  const data::Dataset ds = tuner::build_dataset(cfg.data);
  data::DomainBatch batch{tuner::kSourceDomain, {}};
  for (std::size_t i = 0; i < 8; ++i) batch.samples.push_back(ds.domain(tuner::kSourceDomain)[i]);
  const data::BatchUncertainty u = data::batch_uncertainty(batch.samples);
  double worst_id = 0.0, worst_target = 0.0;
  const data::DomainBatch id1 = data::perturb_statistics(batch, {0.0, 0.0, u.sigma_mu, u.sigma_sigma});
  const data::DomainBatch id2 =
      data::perturb_statistics(batch, {1.3, -0.7, RowVector::Zero(3), RowVector::Zero(3)});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    worst_id = std::max(worst_id, (id1.samples[i].image - batch.samples[i].image).cwiseAbs().maxCoeff());
    worst_id = std::max(worst_id, (id2.samples[i].image - batch.samples[i].image).cwiseAbs().maxCoeff());
  }
  Rng rng(5);
  bool labels_kept = true;
  for (int d = 0; d < 5; ++d) {
    const data::PerturbationDraw draw = data::sample_draw(u, rng);
    const data::DomainBatch p = data::perturb_statistics(batch, draw);
    const data::InstanceStats before = data::instance_stats(batch.samples);
    const data::InstanceStats after = data::instance_stats(p.samples);
    for (Eigen::Index i = 0; i < before.mu.rows(); ++i) {
      for (Eigen::Index c = 0; c < before.mu.cols(); ++c) {
        if (before.sigma(i, c) == 0.0) continue;
        const double alpha = before.mu(i, c) + draw.eps_mu * u.sigma_mu(c);
        const double beta = std::max(before.sigma(i, c) + draw.eps_sigma * u.sigma_sigma(c), data::kMinPerturbedStd);
        worst_target = std::max({worst_target, std::abs(after.mu(i, c) - alpha), std::abs(after.sigma(i, c) - beta)});
      }
    }
    for (std::size_t i = 0; i < batch.size(); ++i) labels_kept = labels_kept && p.samples[i].labels == batch.samples[i].labels;
  }
  return {worst_id <= kIdentityTol && worst_target <= kTargetTol && labels_kept,
          fmt("identity %.1e, statistic targeting %.1e, labels %s", worst_id, worst_target,
              labels_kept ? "unchanged" : "CHANGED")};
}

// 6 ---------------------------------------------------------------------------
Outcome combination_identities() {
  auto fim = [](double v) { return fisher::DiagFisher{Vector::Constant(1, v), fisher::FisherRole::TaskFIM, {}}; };
  // Hand values: relative change, direct combination, variational combination.
  const double d1 = fisher::delta_fim(fim(2.0), fim(1.0), 1e-8).scores(0);
  const double d2 = fisher::delta_fim(fim(0.0), fim(3.0), 1e-8).scores(0);
  const double c1 = fisher::drfim_direct(fim(1.0), fim(3.0), std::log(2.0), 0.0).scores(0);
  const variational::GaussianPosterior qx{Vector::Zero(1), Vector::Constant(1, std::log(3.0))};
  const variational::GaussianPosterior qxp{Vector::Zero(1), Vector::Constant(1, std::log(2.0))};
  const double v1 = variational::drfim_variational(qx, qxp, 1.0, 1.0, 0.0, 0.0).scores(0);
  double hand = std::max({std::abs(d1 - 0.9999999900000002), std::abs(d2 - 3e8) / 3e8, std::abs(c1 - 1.99999999),
                          std::abs(v1 - 2.4999999975)});
  // Zero-shift collapse through the estimation round, both modes.
  const tuner::TrainConfig cfg = testing::tiny_train_config();
  const data::Dataset ds = tuner::build_dataset(cfg.data);
  const tuner::PretrainResult pre = tuner::pretrain(cfg, ds, 1);
  const tuner::WarmedModel w = tuner::prepare_warm(cfg, ds, pre.model, pre.store, 1);
  const nn::Selection sel(w.store, cfg.schedule.selection_groups);
  bool exact = true;
  for (auto mode : {tuner::EstimationMode::Direct, tuner::EstimationMode::Variational}) {
    tuner::EstimationConfig ec = cfg.estimation;
    ec.mode = mode;
    ec.zero_shift = true;
    const auto r = tuner::estimate_drfim_round(w.model, w.store, sel, ds.domain(tuner::kSourceDomain), ec, 2);
    exact = exact && (r.drfim.scores.array() == r.task.scores.array()).all();
  }
  return {hand <= kHandTol && exact,
          fmt("hand values worst %.1e; zero-shift collapse %s in both modes", hand, exact ? "exact" : "NOT exact")};
}

// 7 ---------------------------------------------------------------------------
Outcome scheduler() {
  tuner::ScheduleConfig s;
  s.delta_min = 2.0;
  s.delta_max = 10.0;
  s.finetune_steps = 2000;
  bool endpoints = tuner::schedule_fraction(0, s).fraction == 0.02;
  bool monotone = true;
  double prev = 0.0;
  for (int t = 0; t <= s.finetune_steps; ++t) {
    const double f = tuner::schedule_fraction(t, s).fraction;
    monotone = monotone && f >= prev && f >= 0.02 && f <= 0.10;
    prev = f;
  }
  tuner::ScheduleConfig lit = s;
  lit.mode = tuner::ScheduleMode::Decay;
  endpoints = endpoints && tuner::schedule_fraction(0, lit).fraction == 0.10;
  double decay_err = 0.0;
  for (int t = 0; t <= lit.finetune_steps; t += 50) {
    const double formula = (2.0 + 8.0 * std::exp(-t / 2000.0)) / 100.0;
    decay_err = std::max(decay_err, std::abs(tuner::schedule_fraction(t, lit).fraction - formula));
  }
  // Reduction identities under shared seeds.
  const tuner::TrainConfig cfg = testing::tiny_train_config();
  const data::Dataset ds = tuner::build_dataset(cfg.data);
  const tuner::PretrainResult pre = tuner::pretrain(cfg, ds, 2);
  const tuner::WarmedModel w = tuner::prepare_warm(cfg, ds, pre.model, pre.store, 2);
  const tuner::EstimationResult est = tuner::estimate_for_seed(cfg, ds, w, 2);
  auto digest = [](const nn::ParamStore& st) { return io::store_digest(st); };
  tuner::TrainConfig zero = cfg, all = cfg;
  zero.schedule.delta_min = zero.schedule.delta_max = 0.0;
  all.schedule.delta_min = all.schedule.delta_max = 100.0;
  const bool freeze_eq =
      digest(tuner::finetune_method(zero, ds, w, est, tuner::Method::FisherTune, 2).store) ==
      digest(tuner::finetune_method(cfg, ds, w, est, tuner::Method::Freeze, 2).store);
  const bool full_eq =
      digest(tuner::finetune_method(all, ds, w, est, tuner::Method::FisherTune, 2).store) ==
      digest(tuner::finetune_method(cfg, ds, w, est, tuner::Method::Full, 2).store);
  return {endpoints && monotone && decay_err <= kScheduleTol && freeze_eq && full_eq,
          fmt("endpoints %s, monotone %s, decay form error %.1e, fraction 0 == freeze %s, fraction 100 == full %s",
              endpoints ? "ok" : "BAD", monotone ? "yes" : "NO", decay_err, freeze_eq ? "yes" : "NO",
              full_eq ? "yes" : "NO")};
}

// 9 (run before 8, which reuses its artifacts) -------------------------------
struct ExperimentRun {
  bool ran = false;
  double seconds = 0.0;
  nlohmann::json ordering;
  std::string error;
};
ExperimentRun g_experiment;

void run_experiment() {
  const auto t0 = Clock::now();
  try {
    const fs::path ordering =
        io::cmd_experiment({tuner::TrainConfig{}, g_work / "experiment", 1, kExperimentSeeds});
    const io::Bytes b = io::read_file(ordering);
    g_experiment.ordering = nlohmann::json::parse(b.begin(), b.end());
    g_experiment.ran = true;
  } catch (const std::exception& e) {
    g_experiment.error = e.what();
  }
  g_experiment.seconds = seconds_since(t0);
}

Outcome desk_ordering() {
  if (!g_experiment.ran) return {false, "experiment failed: " + g_experiment.error};
  const auto& o = g_experiment.ordering;
  const auto& m = o.at("mean_unseen_miou");
  const bool freeze = o.at("fishertune_ge_freeze").get<bool>();
  const bool random = o.at("fishertune_ge_random").get<bool>();
  const bool taskfim = o.at("fishertune_ge_taskfim_4_of_5").get<bool>();
  const bool in_budget = g_experiment.seconds < kExperimentBudgetSeconds;
  return {freeze && random && taskfim && in_budget,
          fmt("unseen mIoU fishertune %.4f freeze %.4f random %.4f taskfim %.4f full %.4f; "
              ">= taskfim in %d/%d seeds; %.0fs",
              m.at("fishertune").get<double>(), m.at("freeze").get<double>(), m.at("random").get<double>(),
              m.at("taskfim").get<double>(), m.at("full").get<double>(),
              o.at("fishertune_ge_taskfim_seeds").get<int>(), o.at("seeds").get<int>(), g_experiment.seconds)};
}

// 8 ---------------------------------------------------------------------------
Outcome ranking_divergence() {
  if (!g_experiment.ran) return {false, "needs the experiment artifacts: " + g_experiment.error};
  const tuner::TrainConfig cfg;
  const fs::path seed_dir = g_work / "experiment" / "seed_1";
  const auto [model, store] = io::restore_model(io::load_checkpoint(seed_dir / "pretrained.ftck"), cfg.model);
  const data::Dataset ds = io::load_dataset(g_work / "experiment" / "data");
  const tuner::WarmedModel w = tuner::prepare_warm(cfg, ds, model, store, 1);
  const nn::Selection sel(w.store, cfg.schedule.selection_groups);

  // Nonzero shift: the seed-1 scores written by the experiment.
  const io::Checkpoint sc = io::load_checkpoint(seed_dir / "scores.ftck");
  Vector drf(static_cast<Eigen::Index>(sel.total_scalars())), task(drf.size());
  const auto entries = sel.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = w.store[entries[k]];
    const auto off = static_cast<Eigen::Index>(sel.offset(k));
    drf.segment(off, e.value.size()) = sc.arrays[*sc.arrays.find("drfim/" + e.name)].value.reshaped();
    task.segment(off, e.value.size()) = sc.arrays[*sc.arrays.find("taskfim/" + e.name)].value.reshaped();
  }
  const double rho = fisher::spearman(drf, task);

  // Zero shift on the same warmed model.
  tuner::TrainConfig zs = cfg;
  zs.estimation.zero_shift = true;
  const tuner::EstimationResult z = tuner::estimate_for_seed(zs, ds, w, 1);
  bool identical = true;
  for (int pct = 0; pct <= 100; ++pct) {
    const double f = pct / 100.0;
    identical = identical && tuner::select_mask(z.drfim.scores, f) == tuner::select_mask(z.task.scores, f);
  }
  return {rho < kDivergenceSpearman && identical,
          fmt("nonzero shift spearman %.4f; zero-shift masks %s at fractions 0..1 step 0.01", rho,
              identical ? "identical" : "DIFFER")};
}

// 10 --------------------------------------------------------------------------
Outcome infrastructure() {
  bool ok = true;
  std::string detail;
  // Checkpoint round trip.
  const fs::path pre = g_work / "experiment" / "seed_1" / "pretrained.ftck";
  io::Bytes ck_bytes;
  if (fs::exists(pre)) {
    ck_bytes = io::read_file(pre);
  } else {
    auto [m, s] = nn::SegmentationTransformer::build(tuner::TrainConfig{}.model, 1);
    ck_bytes = io::encode_checkpoint(io::make_model_checkpoint(tuner::TrainConfig{}.model, s));
  }
  const bool ck = io::encode_checkpoint(io::decode_checkpoint(ck_bytes)) == ck_bytes;
  ok = ok && ck;
  detail += fmt("checkpoint round trip %s; ", ck ? "byte-identical" : "DIFFERS");
  // Config fixed point.
  const std::string text = io::serialize_config(tuner::TrainConfig{});
  const bool cf = io::serialize_config(io::parse_config(text)) == text;
  ok = ok && cf;
  detail += fmt("config fixed point %s; ", cf ? "yes" : "NO");
  // Pinned digests, two consecutive runs each.
  int stable = 0;
  for (int run = 0; run < 2; ++run) {
    const fs::path d = g_work / ("digest_run_" + std::to_string(run));
    fs::remove_all(d);
    const std::string data_digest = io::cmd_gen_data({tuner::TrainConfig{}, d / "data", tuner::TrainConfig{}.data.seed});
    const tuner::TrainConfig tiny = testing::tiny_train_config();
    io::cmd_gen_data({tiny, d / "tiny", tiny.data.seed});
    io::cmd_pretrain({tiny, d / "tiny", d / "tiny_pre.ftck", 1});
    io::cmd_estimate({tiny, d / "tiny", d / "tiny_pre.ftck", d / "tiny_est", 1});
    const std::string score_digest = io::sha256_hex(io::read_file(d / "tiny_est" / "scores.ftck"));
    stable += (data_digest == kDefaultDatasetDigest ? 1 : 0) + (score_digest == kTinyScoreDigest ? 1 : 0);
  }
  ok = ok && stable == 4;
  detail += fmt("pinned digests matched %d/4", stable);
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  g_work = fs::temp_directory_path() / "ftune_acceptance";
  int only = 0;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--work") g_work = argv[i + 1];
    if (flag == "--only") only = std::atoi(argv[i + 1]);
  }
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"fisher oracle", fisher_oracle},
      {"kl oracle", kl_oracle},
      {"precision recovery oracle", precision_oracle},
      {"perturbation identity", perturbation_identity},
      {"combination identities", combination_identities},
      {"scheduler", scheduler},
      {"ranking divergence", ranking_divergence},
      {"desk-scale ordering", desk_ordering},
      {"infrastructure", infrastructure},
  };
  if (only == 0 || only == 8 || only == 9) {
    std::cerr << "running the " << kExperimentSeeds << "-seed experiment in " << (g_work / "experiment") << "\n";
    run_experiment();
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (only != 0 && only != n) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
