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

// A pipeline configuration small enough for unit tests: one encoder block
// on 12x12 scenes, a handful of scenes per domain and short stages.

#include "ftune/tuner/config.hpp"

namespace ftune::testing {

inline tuner::TrainConfig tiny_train_config() {
  tuner::TrainConfig c;
  c.model.image_size = 12;
  c.model.embed_dim = 8;
  c.model.num_heads = 2;
  c.model.head_dim = 4;
  c.model.num_blocks = 1;
  c.model.ffn_hidden = 16;
  c.data.scene.image_size = 12;
  c.data.mixture_domains = 3;
  c.data.mixture_scenes = 6;
  c.data.source_scenes = 12;
  c.data.eval_scenes = 6;
  c.estimation.draws = 3;
  c.estimation.batch_size = 4;
  c.estimation.var.steps = 30;
  c.schedule.warmup_steps = 10;
  c.schedule.finetune_steps = 20;
  c.schedule.batch_size = 4;
  c.schedule.pretrain_steps = 15;
  c.schedule.delta_min = 10.0;
  c.schedule.delta_max = 40.0;
  return c;
}

}  // namespace ftune::testing
