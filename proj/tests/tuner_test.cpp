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

#include <gtest/gtest.h>

#include <cmath>

#include "ftune/tuner/tuner.hpp"
#include "tiny_pipeline.hpp"

namespace ftune::tuner {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::vector<std::size_t> selected(const nn::ParamMask& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) out.push_back(i);
  }
  return out;
}

bool backbone_equal(const nn::ParamStore& a, const nn::ParamStore& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].group != nn::Group::Decoder && a[i].value != b[i].value) return false;
  }
  return true;
}

bool stores_equal(const nn::ParamStore& a, const nn::ParamStore& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].value != b[i].value) return false;
  }
  return true;
}

/// Dataset and a pretrained model shared by the pipeline tests.
class TinyPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new TrainConfig(testing::tiny_train_config());
    data_ = new data::Dataset(build_dataset(cfg_->data));
    pre_ = new PretrainResult(pretrain(*cfg_, *data_, 5));
  }
  static void TearDownTestSuite() {
    delete pre_;
    delete data_;
    delete cfg_;
  }
  static WarmedModel warm(std::uint64_t seed) {
    return prepare_warm(*cfg_, *data_, pre_->model, pre_->store, seed);
  }
  static inline TrainConfig* cfg_ = nullptr;
  static inline data::Dataset* data_ = nullptr;
  static inline PretrainResult* pre_ = nullptr;
};

TEST(ScheduleTest, RampEndpointsAndMonotone) {
  ScheduleConfig cfg;
  cfg.delta_min = 2.0;
  cfg.delta_max = 10.0;
  cfg.finetune_steps = 2000;
  EXPECT_EQ(schedule_fraction(0, cfg).fraction, 0.02);
  // oracles/schedule_and_iou.py
  EXPECT_NEAR(schedule_fraction(2000, cfg).fraction, 7.056964470628461 / 100.0, 1e-12);
  double previous = 0.0;
  for (int t = 0; t <= 2000; ++t) {
    const double f = schedule_fraction(t, cfg).fraction;
    EXPECT_GE(f, previous);
    EXPECT_GE(f, 0.02);
    EXPECT_LE(f, 0.10);
    previous = f;
  }
}

TEST(ScheduleTest, DecayVariantFollowsTheFormula) {
  ScheduleConfig cfg;
  cfg.mode = ScheduleMode::Decay;
  cfg.delta_min = 2.0;
  cfg.delta_max = 10.0;
  cfg.finetune_steps = 2000;
  EXPECT_EQ(schedule_fraction(0, cfg).fraction, 0.10);
  const std::pair<int, double> pinned[] = {
      {500, 8.23040626457124}, {1000, 6.852245277701067}, {2000, 4.943035529371539}};
  for (const auto& [t, percent] : pinned) {
    EXPECT_NEAR(schedule_fraction(t, cfg).fraction, percent / 100.0, 1e-12) << "t=" << t;
  }
}

TEST(ScheduleTest, OutOfRangeStepIsRejected) {
  ScheduleConfig cfg;
  EXPECT_THROW(schedule_fraction(-1, cfg), std::out_of_range);
  EXPECT_THROW(schedule_fraction(cfg.finetune_steps + 1, cfg), std::out_of_range);
}

TEST(ScheduleTest, ZeroWarmupIsRejected) {
  ScheduleConfig cfg;
  cfg.warmup_steps = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(MaskTest, FractionEndpoints) {
  const Vector s = vec({0.3, 0.1, 0.9, 0.0});
  EXPECT_EQ(select_mask(s, 0.0).count(), 0u);
  EXPECT_EQ(select_mask(s, 1.0).count(), 4u);
}

TEST(MaskTest, TiesBreakByIndex) {
  // oracles/schedule_and_iou.py
  const nn::ParamMask m = select_mask(vec({5, 1, 3, 3, 2}), 0.6);
  EXPECT_EQ(selected(m), (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(select_mask(vec({5, 1, 3, 3, 2}), 0.6), m);
}

TEST(MaskTest, CeilingRule) {
  EXPECT_EQ(selected_count(0.6, 5), 3u);
  EXPECT_EQ(selected_count(0.01, 250), 3u);
  EXPECT_EQ(selected_count(0.0, 7), 0u);
  EXPECT_THROW(selected_count(1.5, 4), std::invalid_argument);
  EXPECT_THROW(select_mask(vec({1.0, std::nan("")}), 0.5), NumericalError);
}

TEST(MaskTest, RankedMaskMatchesFreshSelectionAtEveryFraction) {
  auto [model, store] = nn::SegmentationTransformer::build(testing::tiny_train_config().model, 1);
  const nn::Selection sel = nn::Selection::backbone_default(store);
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector scores(static_cast<Eigen::Index>(sel.total_scalars()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) scores(i) = std::floor(20.0 * u(rng));
  RankedMask ranked(store, sel, scores, Granularity::PerScalar);
  for (double f : {0.0, 0.05, 0.3, 0.3, 0.71, 1.0}) {
    ranked.set_fraction(f);
    EXPECT_EQ(ranked.selection_mask(), select_mask(scores, f)) << "fraction " << f;
    EXPECT_EQ(ranked.selected(), selected_count(f, sel.total_scalars()));
  }
}

TEST(MaskTest, PerTensorSelectsWholeTensors) {
  auto [model, store] = nn::SegmentationTransformer::build(testing::tiny_train_config().model, 1);
  const nn::Selection sel = nn::Selection::backbone_default(store);
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector scores(static_cast<Eigen::Index>(sel.total_scalars()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) scores(i) = u(rng);
  RankedMask ranked(store, sel, scores, Granularity::PerTensor);
  ranked.set_fraction(0.3);
  const nn::ParamMask m = ranked.selection_mask();
  EXPECT_GE(m.count(), selected_count(0.3, sel.total_scalars()));
  const auto entries = sel.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const std::size_t off = sel.offset(k);
    const auto len = static_cast<std::size_t>(store[entries[k]].value.size());
    std::size_t on = 0;
    for (std::size_t j = 0; j < len; ++j) on += m[off + j] ? 1 : 0;
    EXPECT_TRUE(on == 0 || on == len) << store[entries[k]].name;
  }
}

TEST(EvaluateTest, PerfectPredictionsScoreOne) {
  Eigen::MatrixXi conf = Eigen::MatrixXi::Zero(4, 4);
  conf(0, 0) = 7;
  conf(2, 2) = 3;
  const DomainEval d = domain_iou(conf);
  EXPECT_DOUBLE_EQ(d.miou, 1.0);
  EXPECT_FALSE(d.class_iou[1].has_value());
}

TEST(EvaluateTest, ConstantPredictionOnFourPatches) {
  // truth [0, 0, 1, 2], every patch predicted 0; oracles/schedule_and_iou.py
  Eigen::MatrixXi conf = Eigen::MatrixXi::Zero(4, 4);
  conf(0, 0) = 2;
  conf(1, 0) = 1;
  conf(2, 0) = 1;
  const DomainEval d = domain_iou(conf);
  EXPECT_DOUBLE_EQ(*d.class_iou[0], 0.5);
  EXPECT_DOUBLE_EQ(*d.class_iou[1], 0.0);
  EXPECT_DOUBLE_EQ(*d.class_iou[2], 0.0);
  EXPECT_FALSE(d.class_iou[3].has_value());
  EXPECT_NEAR(d.miou, 0.16666666666666666, 1e-15);
  EXPECT_EQ(d.patches, 4u);
}

TEST(EvaluateTest, ConstantModelOnToyDomain) {
  nn::ModelConfig mc = testing::tiny_train_config().model;
  mc.image_size = 8;  // 2x2 patches
  auto [model, store] = nn::SegmentationTransformer::build(mc, 3);
  const std::size_t dec_w = *store.find("decoder.weight");
  const std::size_t dec_b = *store.find("decoder.bias");
  store[dec_w].value.setZero();
  store[dec_b].value << 1.0, 0.0, 0.0, 0.0;
  data::Sample s;
  s.image = Matrix::Random(3, 64);
  s.labels = {0, 0, 1, 2};
  const std::vector<data::Sample> samples{s};
  const DomainEval d = domain_iou(confusion_matrix(model, store, samples, 4));
  EXPECT_NEAR(d.miou, 0.16666666666666666, 1e-15);
  EXPECT_THROW(domain_iou(Eigen::MatrixXi::Zero(4, 4)), std::invalid_argument);
}

TEST_F(TinyPipeline, EvaluationIgnoresDomainOrder) {
  const WarmedModel w = warm(1);
  const std::vector<int> unseen = cfg_->data.unseen_ids();
  const std::vector<int> fwd{kSourceDomain, unseen[0], unseen[1]};
  const std::vector<int> rev{unseen[1], unseen[0], kSourceDomain};
  const EvalReport a = evaluate(w.model, w.store, *data_, fwd, unseen);
  const EvalReport b = evaluate(w.model, w.store, *data_, rev, unseen);
  EXPECT_EQ(a.mean_unseen_miou, b.mean_unseen_miou);
  EXPECT_EQ(a.source_miou, b.source_miou);
  EXPECT_THROW(evaluate(w.model, w.store, *data_, std::vector<int>{}, unseen), std::invalid_argument);
}

TEST_F(TinyPipeline, PretrainingBeatsMajorityClass) {
  EXPECT_LT(pre_->final_loss, pre_->initial_loss);
  EXPECT_GE(pre_->accuracy, pre_->majority_accuracy);
}

TEST_F(TinyPipeline, WarmupMovesOnlyTheDecoder) {
  const WarmedModel w = warm(2);
  nn::ParamStore before = pre_->store;
  EXPECT_TRUE(backbone_equal(before, w.store));
  EXPECT_LT(w.warmup.final_loss, w.warmup.initial_loss);
  // Regression values from this seeded run.
  EXPECT_NEAR(w.warmup.initial_loss, 1.3348597253974133, 1e-9);
  EXPECT_NEAR(w.warmup.final_loss, 1.3092005245381912, 1e-9);
}

TEST_F(TinyPipeline, ZeroShiftCollapsesInBothModes) {
  const WarmedModel w = warm(3);
  const nn::Selection sel(w.store, cfg_->schedule.selection_groups);
  for (EstimationMode mode : {EstimationMode::Direct, EstimationMode::Variational}) {
    EstimationConfig ec = cfg_->estimation;
    ec.mode = mode;
    ec.zero_shift = true;
    const EstimationResult r =
        estimate_drfim_round(w.model, w.store, sel, data_->domain(kSourceDomain), ec, 9);
    EXPECT_EQ(r.drfim.scores, r.task.scores) << to_string(mode);
    for (double f : {0.02, 0.1, 0.5}) EXPECT_EQ(select_mask(r.drfim.scores, f), select_mask(r.task.scores, f));
  }
}

TEST_F(TinyPipeline, FractionZeroIsFreezeAndFractionHundredIsFull) {
  const WarmedModel w = warm(4);
  const EstimationResult est = estimate_for_seed(*cfg_, *data_, w, 4);
  const MethodOutcome freeze = finetune_method(*cfg_, *data_, w, est, Method::Freeze, 4);
  const MethodOutcome full = finetune_method(*cfg_, *data_, w, est, Method::Full, 4);
  EXPECT_TRUE(backbone_equal(freeze.store, w.store));

  TrainConfig zero = *cfg_;
  zero.schedule.delta_min = zero.schedule.delta_max = 0.0;
  const MethodOutcome ft0 = finetune_method(zero, *data_, w, est, Method::FisherTune, 4);
  EXPECT_TRUE(stores_equal(ft0.store, freeze.store));

  TrainConfig all = *cfg_;
  all.schedule.delta_min = all.schedule.delta_max = 100.0;
  const MethodOutcome ft100 = finetune_method(all, *data_, w, est, Method::FisherTune, 4);
  EXPECT_TRUE(stores_equal(ft100.store, full.store));
  EXPECT_FALSE(backbone_equal(full.store, w.store));
}

TEST_F(TinyPipeline, UnselectedCoordinatesNeverMove) {
  const WarmedModel w = warm(5);
  const EstimationResult est = estimate_for_seed(*cfg_, *data_, w, 5);
  const MethodOutcome ft = finetune_method(*cfg_, *data_, w, est, Method::FisherTune, 5);
  const nn::Selection sel(w.store, cfg_->schedule.selection_groups);
  const nn::ParamMask final_mask =
      select_mask(est.drfim.scores, schedule_fraction(cfg_->schedule.finetune_steps, cfg_->schedule).fraction);
  const Vector before = sel.gather(w.store);
  const Vector after = sel.gather(ft.store);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < final_mask.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    if (!final_mask[i]) EXPECT_EQ(before(e), after(e)) << "coordinate " << i;
    moved += before(e) != after(e) ? 1 : 0;
  }
  EXPECT_GT(moved, 0u);
  // Embedding is never tuned.
  for (std::size_t i = 0; i < w.store.size(); ++i) {
    if (w.store[i].group == nn::Group::Embed) EXPECT_EQ(w.store[i].value, ft.store[i].value);
  }
  // Regression value from this seeded run.
  EXPECT_NEAR(ft.finetune.final_loss, 1.0891388731005787, 1e-9);
}

TEST_F(TinyPipeline, RandomMaskRealizesTheRequestedCount) {
  const WarmedModel w = warm(6);
  const nn::Selection sel(w.store, cfg_->schedule.selection_groups);
  EstimationResult est;
  est.drfim.scores = est.task.scores = Vector::Zero(static_cast<Eigen::Index>(sel.total_scalars()));
  const MethodPlan plan = plan_method(Method::RandomMask, est, cfg_->schedule, 6);
  RankedMask m(w.store, sel, plan.scores, cfg_->schedule.granularity);
  for (double f : {0.1, 0.25, 0.4}) {
    m.set_fraction(f);
    const double want = f * static_cast<double>(sel.total_scalars());
    EXPECT_LE(std::abs(static_cast<double>(m.selected()) - want), 1.0);
  }
}

TEST_F(TinyPipeline, SameSeedSameReports) {
  const SeedOutcome a = run_from_pretrained(*cfg_, *data_, pre_->model, pre_->store, 7);
  const SeedOutcome b = run_from_pretrained(*cfg_, *data_, pre_->model, pre_->store, 7);
  ASSERT_EQ(a.methods.size(), b.methods.size());
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    EXPECT_EQ(a.methods[i].report.mean_unseen_miou, b.methods[i].report.mean_unseen_miou);
    EXPECT_EQ(a.methods[i].report.source_miou, b.methods[i].report.source_miou);
    EXPECT_TRUE(stores_equal(a.methods[i].store, b.methods[i].store));
  }
  EXPECT_GE(a.profile.jaccard_drfim_task, 0.0);
  EXPECT_LE(a.profile.jaccard_drfim_task, 1.0);
}

TEST(PipelineTest, StageFailureKeepsTypeAndNamesTheStage) {
  try {
    try {
      throw NumericalError("boom");
    } catch (...) {
      rethrow_tagged("estimate");
    }
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("estimate"), std::string::npos);
    return;
  }
  FAIL() << "type was not preserved";
}

}  // namespace
}  // namespace ftune::tuner
