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
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ftune {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Random engine used by every stochastic stage. All streams are derived
/// from named seeds with `derive_seed` so that runs are reproducible.
using Rng = std::mt19937_64;

/// A malformed file, manifest or config document. Maps to CLI exit code 2.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf in a forward pass, or an optimizer that diverged. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mixes a base seed with a stream tag and index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t index = 0);

/// Stable 64-bit hash of a stream name, for `derive_seed` tags.
std::uint64_t stream_tag(const std::string& name);

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Worker count for batch-parallel loops, capped by FTUNE_THREADS.
std::size_t worker_count();

}  // namespace ftune
