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

#include <algorithm>
#include <numeric>

#include "ftune/data/domain.hpp"

namespace ftune::data {
namespace {

SceneConfig small_scene() {
  SceneConfig s;
  s.image_size = 12;
  s.patch_size = 4;
  s.channels = 3;
  return s;
}

DomainSpec identity_spec(int id) {
  return {id, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, 0.0, 0.5};
}

Sample constant_sample(int channels, int pixels, double value) {
  Sample s;
  s.image = Matrix::Constant(channels, pixels, value);
  s.pixel_labels.assign(static_cast<std::size_t>(pixels), 0);
  return s;
}

DomainBatch corpus_batch(std::size_t n, std::uint64_t seed) {
  const SceneConfig scene = small_scene();
  const std::vector<DomainSpec> specs{{3, {0.1, -0.2, 0.0}, {1.0, 0.8, 1.2}, 0.05, 0.7}};
  Dataset ds = gen_corpus(specs, n, scene, seed);
  return {3, ds.domain(3)};
}

TEST(CorpusTest, IdentitySpecGivesCanonicalScene) {
  const SceneConfig scene = small_scene();
  const std::vector<DomainSpec> specs{identity_spec(0)};
  const Dataset ds = gen_corpus(specs, 3, scene, 11);
  for (std::size_t i = 0; i < 3; ++i) {
    const CanonicalScene canon =
        render_scene(scene, 0.5, derive_seed(11, stream_tag("scene") ^ 0u, i));
    EXPECT_EQ(ds.domain(0)[i].image, canon.raw);
    EXPECT_EQ(ds.domain(0)[i].pixel_labels, canon.pixel_labels);
  }
}

TEST(CorpusTest, LabelsIgnorePhotometry) {
  const SceneConfig scene = small_scene();
  DomainSpec a = identity_spec(0);
  DomainSpec b = a;
  b.channel_mean_shift = {0.5, -0.4, 0.3};
  const Dataset da = gen_corpus(std::vector<DomainSpec>{a}, 4, scene, 5);
  const Dataset db = gen_corpus(std::vector<DomainSpec>{b}, 4, scene, 5);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(da.domain(0)[i].pixel_labels, db.domain(0)[i].pixel_labels);
    EXPECT_EQ(da.domain(0)[i].labels, db.domain(0)[i].labels);
    const RowVector diff = channel_means(db.domain(0)[i].image) - channel_means(da.domain(0)[i].image);
    EXPECT_NEAR(diff(0), 0.5, 1e-12);
    EXPECT_NEAR(diff(1), -0.4, 1e-12);
    EXPECT_NEAR(diff(2), 0.3, 1e-12);
  }
}

TEST(CorpusTest, SameSeedSameCorpusAndPinnedClassCounts) {
  const SceneConfig scene = small_scene();
  const std::vector<DomainSpec> specs{identity_spec(0), {1, {0.2, 0.2, 0.2}, {0.9, 1.1, 1.0}, 0.03, 1.0}};
  const Dataset a = gen_corpus(specs, 16, scene, 2024);
  const Dataset b = gen_corpus(specs, 16, scene, 2024);
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(a.domains[d][i].image, b.domains[d][i].image);
  }
  // Regression values, counted once from this generator.
  const std::vector<std::size_t> pinned{2055, 667, 1120, 766};
  EXPECT_EQ(class_frequencies(a), pinned);
}

TEST(CorpusTest, RejectsEmptySpecsAndDuplicateIds) {
  const SceneConfig scene = small_scene();
  EXPECT_THROW(gen_corpus(std::vector<DomainSpec>{}, 2, scene, 1), std::invalid_argument);
  const std::vector<DomainSpec> dup{identity_spec(4), identity_spec(4)};
  EXPECT_THROW(gen_corpus(dup, 2, scene, 1), std::invalid_argument);
  DomainSpec bad = identity_spec(0);
  bad.channel_scale = {1.0, -1.0, 1.0};
  EXPECT_THROW(gen_corpus(std::vector<DomainSpec>{bad}, 2, scene, 1), std::invalid_argument);
}

TEST(CorpusTest, PatchLabelsTieToLowerClass) {
  SceneConfig scene;
  scene.image_size = 2;
  scene.patch_size = 2;
  scene.channels = 1;
  const std::vector<std::uint8_t> px{2, 1, 1, 2};
  EXPECT_EQ(pool_patch_labels(scene, px), std::vector<int>{1});
  const std::vector<std::uint8_t> px3{3, 3, 0, 2};
  EXPECT_EQ(pool_patch_labels(scene, px3), std::vector<int>{3});
}

TEST(InstanceStatsTest, ConstantImageHasZeroSpread) {
  const std::vector<Sample> s{constant_sample(2, 9, 1.75)};
  const InstanceStats st = instance_stats(s);
  EXPECT_DOUBLE_EQ(st.mu(0, 0), 1.75);
  EXPECT_DOUBLE_EQ(st.mu(0, 1), 1.75);
  EXPECT_DOUBLE_EQ(st.sigma(0, 0), 0.0);
}

TEST(InstanceStatsTest, TwoPixelPopulationConvention) {
  Sample s = constant_sample(1, 2, 0.0);
  s.image(0, 1) = 2.0;
  const InstanceStats st = instance_stats(std::vector<Sample>{s});
  EXPECT_DOUBLE_EQ(st.mu(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(st.sigma(0, 0), 1.0);
}

TEST(InstanceStatsTest, PixelShuffleLeavesStatsUnchanged) {
  DomainBatch b = corpus_batch(1, 9);
  Sample shuffled = b.samples[0];
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(shuffled.image.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t j = 0; j < perm.size(); ++j) {
    shuffled.image.col(static_cast<Eigen::Index>(j)) = b.samples[0].image.col(perm[j]);
  }
  const InstanceStats a = instance_stats(b.samples);
  const InstanceStats c = instance_stats(std::vector<Sample>{shuffled});
  EXPECT_LT((a.mu - c.mu).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.sigma - c.sigma).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BatchUncertaintyTest, IdenticalImagesGiveZero) {
  DomainBatch b = corpus_batch(1, 4);
  const std::vector<Sample> twins{b.samples[0], b.samples[0], b.samples[0]};
  const BatchUncertainty u = batch_uncertainty(twins);
  // zero up to the rounding of the mean
  EXPECT_LT(u.sigma_mu.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(u.sigma_sigma.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BatchUncertaintyTest, TwoMeansZeroAndTwoGiveOne) {
  const std::vector<Sample> s{constant_sample(2, 4, 0.0), constant_sample(2, 4, 2.0)};
  const BatchUncertainty u = batch_uncertainty(s);
  EXPECT_DOUBLE_EQ(u.sigma_mu(0), 1.0);
  EXPECT_DOUBLE_EQ(u.sigma_mu(1), 1.0);
  EXPECT_DOUBLE_EQ(u.sigma_sigma(0), 0.0);
}

TEST(BatchUncertaintyTest, ScalesWithAbsoluteFactor) {
  DomainBatch b = corpus_batch(5, 8);
  const BatchUncertainty u = batch_uncertainty(b.samples);
  std::vector<Sample> scaled = b.samples;
  for (Sample& s : scaled) s.image *= -3.0;
  const BatchUncertainty v = batch_uncertainty(scaled);
  EXPECT_LT((v.sigma_mu - 3.0 * u.sigma_mu).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((v.sigma_sigma - 3.0 * u.sigma_sigma).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BatchUncertaintyTest, SingleSampleIsRejected) {
  DomainBatch b = corpus_batch(1, 4);
  EXPECT_THROW(batch_uncertainty(b.samples), std::invalid_argument);
}

TEST(PerturbTest, ZeroDrawIsIdentity) {
  DomainBatch b = corpus_batch(4, 21);
  PerturbationDraw d;
  const BatchUncertainty u = batch_uncertainty(b.samples);
  d.sigma_mu = u.sigma_mu;
  d.sigma_sigma = u.sigma_sigma;
  const DomainBatch p = perturb_statistics(b, d);
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_LT((p.samples[i].image - b.samples[i].image).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(p.samples[i].labels, b.samples[i].labels);
  }
}

TEST(PerturbTest, ZeroUncertaintyIgnoresNoise) {
  DomainBatch b = corpus_batch(3, 22);
  PerturbationDraw d{1.7, -0.9, RowVector::Zero(3), RowVector::Zero(3)};
  const DomainBatch p = perturb_statistics(b, d);
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_LT((p.samples[i].image - b.samples[i].image).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PerturbTest, HandEvaluatedMeanShift) {
  // One channel with mean 1 and std 2: pixels {-1, 3}.
  Sample s = constant_sample(1, 2, -1.0);
  s.image(0, 1) = 3.0;
  DomainBatch b{0, {s}};
  PerturbationDraw d{1.0, 0.0, RowVector::Constant(1, 0.5), RowVector::Zero(1)};
  const DomainBatch p = perturb_statistics(b, d);
  EXPECT_NEAR(p.samples[0].image(0, 0), -0.5, 1e-12);
  EXPECT_NEAR(p.samples[0].image(0, 1), 3.5, 1e-12);
}

TEST(PerturbTest, HitsTargetStatistics) {
  DomainBatch b = corpus_batch(4, 23);
  const BatchUncertainty u = batch_uncertainty(b.samples);
  PerturbationDraw d{0.8, 0.6, u.sigma_mu, u.sigma_sigma};
  const DomainBatch p = perturb_statistics(b, d);
  const InstanceStats before = instance_stats(b.samples);
  const InstanceStats after = instance_stats(p.samples);
  for (Eigen::Index i = 0; i < before.mu.rows(); ++i) {
    for (Eigen::Index c = 0; c < before.mu.cols(); ++c) {
      const double alpha = before.mu(i, c) + d.eps_mu * u.sigma_mu(c);
      const double beta = std::max(before.sigma(i, c) + d.eps_sigma * u.sigma_sigma(c), kMinPerturbedStd);
      EXPECT_NEAR(after.mu(i, c), alpha, 1e-9);
      EXPECT_NEAR(after.sigma(i, c), beta, 1e-9);
    }
  }
}

TEST(PerturbTest, ShapeMismatchIsRejected) {
  DomainBatch b = corpus_batch(2, 24);
  PerturbationDraw d{0.1, 0.1, RowVector::Zero(2), RowVector::Zero(3)};
  EXPECT_THROW(perturb_statistics(b, d), std::invalid_argument);
}

TEST(PerturbTest, DrawsAreSeedDeterministic) {
  DomainBatch b = corpus_batch(4, 25);
  Rng r1(77), r2(77);
  const PerturbationDraw a = sample_draw(b, r1);
  const PerturbationDraw c = sample_draw(b, r2);
  EXPECT_EQ(a.eps_mu, c.eps_mu);
  EXPECT_EQ(a.eps_sigma, c.eps_sigma);
  Rng r3(77);
  const PerturbationDraw z = sample_draw(b, r3, true);
  // zero shift keeps the noise stream but removes the spread
  EXPECT_EQ(z.eps_mu, a.eps_mu);
  EXPECT_EQ(z.sigma_mu.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(z.sigma_sigma.cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace ftune::data
