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

#include "ftune/nn/optimizer.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace ftune::nn {
namespace {

GradMap random_grads(const ParamStore& store, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  GradMap g(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    Matrix m(store[i].value.rows(), store[i].value.cols());
    for (Eigen::Index j = 0; j < m.size(); ++j) m.reshaped()(j) = normal(rng);
    g.raw(i) = m;
  }
  return g;
}

TEST(OptimizerTest, PlainStepArithmetic) {
  ParamStore store;
  store.add("w", Group::FFN, 0, Matrix::Constant(1, 1, 1.0));
  GradMap g(1);
  g.raw(0) = Matrix::Constant(1, 1, 2.0);
  SgdOptimizer opt({0.1, 0.0});
  opt.apply(store, g, nullptr);
  EXPECT_DOUBLE_EQ(store[0].value(0, 0), 0.8);
}

TEST(OptimizerTest, AllFalseMaskAndZeroLearningRateChangeNothing) {
  auto [model, store] = SegmentationTransformer::build(testing::tiny_config(), 1);
  Rng rng(1);
  const Vector before = store.flatten();
  SgdOptimizer frozen({0.5, 0.9});
  ParamMask none(store.total_scalars(), false);
  for (int i = 0; i < 3; ++i) frozen.apply(store, random_grads(store, rng), &none);
  EXPECT_TRUE((store.flatten().array() == before.array()).all());

  SgdOptimizer still({0.0, 0.9});
  ParamMask all(store.total_scalars(), true);
  for (int i = 0; i < 3; ++i) still.apply(store, random_grads(store, rng), &all);
  EXPECT_TRUE((store.flatten().array() == before.array()).all());
}

TEST(OptimizerTest, MaskedCoordinatesNeverMoveUnderMomentum) {
  auto [model, store] = SegmentationTransformer::build(testing::tiny_config(), 2);
  Rng rng(7);
  std::bernoulli_distribution coin(0.3);
  for (double momentum : {0.0, 0.9}) {
    SgdOptimizer opt({0.05, momentum});
    ParamMask mask(store.total_scalars(), false);
    for (std::size_t i = 0; i < mask.size(); ++i) mask.set(i, coin(rng));
    for (int step = 0; step < 5; ++step) {
      const Vector before = store.flatten();
      opt.apply(store, random_grads(store, rng), &mask);
      const Vector after = store.flatten();
      for (std::size_t i = 0; i < mask.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        if (!mask[i]) {
          EXPECT_EQ(before(j), after(j));
        } else {
          EXPECT_NE(before(j), after(j));
        }
      }
    }
  }
}

TEST(OptimizerTest, MisalignedMaskIsRejected) {
  auto [model, store] = SegmentationTransformer::build(testing::tiny_config(), 2);
  SgdOptimizer opt;
  ParamMask wrong(store.total_scalars() - 1, true);
  Rng rng(1);
  EXPECT_THROW(opt.apply(store, random_grads(store, rng), &wrong), std::invalid_argument);
}

TEST(ParamStoreTest, SelectionRoundTripAndLocate) {
  auto [model, store] = SegmentationTransformer::build(testing::tiny_config(), 2);
  const Selection sel = Selection::backbone_default(store);
  Vector v = sel.gather(store);
  EXPECT_EQ(static_cast<std::size_t>(v.size()), sel.total_scalars());
  v.array() += 1.0;
  sel.scatter(store, v);
  EXPECT_TRUE(sel.gather(store).isApprox(v));
  const auto [entry, index] = sel.locate(0);
  EXPECT_EQ(store[entry].name, "blocks.0.q.weight");
  EXPECT_EQ(index, 0u);
  EXPECT_FALSE(sel.contains_entry(*store.find("embed.weight")));
  EXPECT_FALSE(sel.contains_entry(*store.find("decoder.weight")));
  EXPECT_THROW(store.add("embed.weight", Group::Embed, -1, Matrix::Zero(1, 1)),
               std::invalid_argument);
}

}  // namespace
}  // namespace ftune::nn
