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

#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include "ftune/core.hpp"

namespace ftune {

/// Evaluates produce(i) for i in [0, n) on up to worker_count() threads and
/// hands each result to consume(i, result) strictly in index order, so any
/// reduction done in `consume` is identical to the sequential one.
template <typename Produce, typename Consume>
void ordered_parallel_for(std::size_t n, Produce&& produce, Consume&& consume) {
  using Result = decltype(produce(std::size_t{0}));
  const std::size_t workers = std::min(worker_count(), n == 0 ? std::size_t{1} : n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) consume(i, produce(i));
    return;
  }
  std::vector<std::optional<Result>> slots(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t base = 0; base < n; base += workers) {
    const std::size_t count = std::min(workers, n - base);
    {
      std::vector<std::jthread> pool;
      pool.reserve(count);
      for (std::size_t w = 0; w < count; ++w) {
        pool.emplace_back([&, w] {
          try {
            slots[w].emplace(produce(base + w));
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (std::size_t w = 0; w < count; ++w) {
      if (errors[w]) std::rethrow_exception(errors[w]);
      consume(base + w, std::move(*slots[w]));
      slots[w].reset();
    }
  }
}

}  // namespace ftune
