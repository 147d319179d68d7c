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
#include <span>
#include <vector>

#include "ftune/core.hpp"

namespace ftune::data {

/// Photometric signature of one synthetic domain.
struct DomainSpec {
  int domain_id = 0;
  std::vector<double> channel_mean_shift;  // one per channel
  std::vector<double> channel_scale;       // one per channel, > 0
  double noise_std = 0.0;
  double texture_freq = 0.5;

  void validate(int channels) const;
  bool operator==(const DomainSpec&) const = default;
};

/// Geometry shared by every scene of a corpus.
struct SceneConfig {
  int image_size = 24;
  int channels = 3;
  int patch_size = 4;

  void validate() const;
  int num_patches() const { return (image_size / patch_size) * (image_size / patch_size); }
  bool operator==(const SceneConfig&) const = default;
};

/// Background plus three shape classes.
inline constexpr int kNumClasses = 4;
enum class ShapeClass : std::uint8_t { Background = 0, Disk = 1, Square = 2, Cross = 3 };

struct Sample {
  Matrix image;                             // channels x (H*W), row-major pixels
  std::vector<std::uint8_t> pixel_labels;   // H*W
  std::vector<int> labels;                  // per-patch majority label
};

struct DomainBatch {
  int domain_id = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

struct Dataset {
  SceneConfig scene;
  std::uint64_t seed = 0;
  std::size_t scenes_per_domain = 0;
  std::vector<DomainSpec> specs;
  std::vector<std::vector<Sample>> domains;  // aligned with specs

  /// Samples of the domain with this id; throws if absent.
  const std::vector<Sample>& domain(int domain_id) const;
  const DomainSpec& spec(int domain_id) const;
  bool has_domain(int domain_id) const;
};

/// Canonical (pre-photometry) scene: grayscale-tinted shapes on a textured
/// background.
struct CanonicalScene {
  Matrix raw;
  std::vector<std::uint8_t> pixel_labels;
};

CanonicalScene render_scene(const SceneConfig& scene, double texture_freq, std::uint64_t seed);

/// Per-patch majority vote; ties go to the lower class id.
std::vector<int> pool_patch_labels(const SceneConfig& scene,
                                   std::span<const std::uint8_t> pixel_labels);

/// Applies scale, shift and additive Gaussian noise channel by channel.
Matrix apply_photometry(const Matrix& raw, const DomainSpec& spec, Rng& rng);

/// Scene geometry depends only on (seed, domain_id, scene index); photometry
/// on the spec. Two specs with the same id therefore share label maps.
Dataset gen_corpus(std::span<const DomainSpec> specs, std::size_t scenes_per_domain,
                   const SceneConfig& scene, std::uint64_t seed);

/// Pixel counts per class over the whole corpus.
std::vector<std::size_t> class_frequencies(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Feature-statistics perturbation.

/// Per-sample per-channel mean and population standard deviation
/// (rows: samples, cols: channels).
struct InstanceStats {
  Matrix mu;
  Matrix sigma;
};

InstanceStats instance_stats(std::span<const Sample> samples);

template <typename Derived>
RowVector channel_means(const Eigen::MatrixBase<Derived>& image) {
  return image.rowwise().mean().transpose();
}

struct BatchUncertainty {
  RowVector sigma_mu;     // per channel
  RowVector sigma_sigma;  // per channel
};

/// Population std across the batch of per-sample means and stds.
BatchUncertainty batch_uncertainty(std::span<const Sample> samples);

struct PerturbationDraw {
  double eps_mu = 0.0;
  double eps_sigma = 0.0;
  RowVector sigma_mu;
  RowVector sigma_sigma;
};

/// Lower bound on the perturbed standard deviation.
inline constexpr double kMinPerturbedStd = 1e-3;

/// x' = beta * (x - mu) / sigma + alpha per sample and channel, with
/// alpha = mu + eps_mu * sigma_mu and beta = max(sigma + eps_sigma * sigma_sigma, 1e-3).
/// Channels with sigma == 0, or whose draw leaves (alpha, beta) == (mu, sigma),
/// are copied through unchanged. Labels are never touched.
DomainBatch perturb_statistics(const DomainBatch& batch, const PerturbationDraw& draw);

/// Draws scalar eps_mu, eps_sigma ~ N(0, 1) and takes the uncertainties from
/// the batch itself. With zero_shift the uncertainties are zero.
PerturbationDraw sample_draw(const DomainBatch& batch, Rng& rng, bool zero_shift = false);

/// Same, with externally estimated (e.g. corpus-level) uncertainties.
PerturbationDraw sample_draw(const BatchUncertainty& uncertainty, Rng& rng);

}  // namespace ftune::data
