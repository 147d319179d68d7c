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

#include "ftune/data/domain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ftune::data {

void DomainSpec::validate(int channels) const {
  if (static_cast<int>(channel_mean_shift.size()) != channels ||
      static_cast<int>(channel_scale.size()) != channels) {
    throw std::invalid_argument("DomainSpec " + std::to_string(domain_id) +
                                ": expected one shift and one scale per channel");
  }
  for (double s : channel_scale) {
    if (!(s > 0.0)) throw std::invalid_argument("DomainSpec: channel_scale must be > 0");
  }
  if (!(noise_std >= 0.0)) throw std::invalid_argument("DomainSpec: noise_std must be >= 0");
  if (!std::isfinite(texture_freq)) throw std::invalid_argument("DomainSpec: bad texture_freq");
}

void SceneConfig::validate() const {
  if (image_size < 8 || channels < 1 || patch_size < 1 || image_size % patch_size != 0) {
    throw std::invalid_argument("SceneConfig: invalid geometry");
  }
}

const std::vector<Sample>& Dataset::domain(int domain_id) const {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].domain_id == domain_id) return domains[i];
  }
  throw std::invalid_argument("dataset has no domain " + std::to_string(domain_id));
}

const DomainSpec& Dataset::spec(int domain_id) const {
  for (const DomainSpec& s : specs) {
    if (s.domain_id == domain_id) return s;
  }
  throw std::invalid_argument("dataset has no domain " + std::to_string(domain_id));
}

bool Dataset::has_domain(int domain_id) const {
  return std::any_of(specs.begin(), specs.end(),
                     [&](const DomainSpec& s) { return s.domain_id == domain_id; });
}

CanonicalScene render_scene(const SceneConfig& scene, double texture_freq, std::uint64_t seed) {
  const int n = scene.image_size;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CanonicalScene out;
  out.raw = Matrix(scene.channels, n * n);
  out.pixel_labels.assign(static_cast<std::size_t>(n * n), 0);

  const double phase_x = unit(rng) * 2.0 * M_PI;
  const double phase_y = unit(rng) * 2.0 * M_PI;
  const double base = 0.30 + 0.10 * unit(rng);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double tex = 0.12 * std::sin(texture_freq * x + phase_x) *
                         std::sin(texture_freq * y + phase_y);
      out.raw.col(y * n + x).setConstant(base + tex);
    }
  }

  const int shapes = 1 + static_cast<int>(unit(rng) * 3.0);
  for (int s = 0; s < shapes; ++s) {
    const auto cls = static_cast<std::uint8_t>(1 + std::min(2, static_cast<int>(unit(rng) * 3.0)));
    const double r = 3.5 + 3.0 * unit(rng);
    const double cx = r + (n - 2.0 * r) * unit(rng);
    const double cy = r + (n - 2.0 * r) * unit(rng);
    const double intensity = 0.6 + 0.35 * unit(rng);
    Vector tint(scene.channels);
    for (int c = 0; c < scene.channels; ++c) tint(c) = 0.6 + 0.4 * unit(rng);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double dx = std::abs(x + 0.5 - cx);
        const double dy = std::abs(y + 0.5 - cy);
        bool inside = false;
        switch (static_cast<ShapeClass>(cls)) {
          case ShapeClass::Disk: inside = dx * dx + dy * dy <= r * r; break;
          case ShapeClass::Square: inside = dx <= 0.85 * r && dy <= 0.85 * r; break;
          case ShapeClass::Cross:
            inside = (dx <= r / 3.0 && dy <= r) || (dy <= r / 3.0 && dx <= r);
            break;
          case ShapeClass::Background: break;
        }
        if (!inside) continue;
        out.raw.col(y * n + x) = intensity * tint;
        out.pixel_labels[static_cast<std::size_t>(y * n + x)] = cls;
      }
    }
  }
  return out;
}

std::vector<int> pool_patch_labels(const SceneConfig& scene,
                                   std::span<const std::uint8_t> pixel_labels) {
  const int n = scene.image_size;
  const int p = scene.patch_size;
  const int g = n / p;
  if (pixel_labels.size() != static_cast<std::size_t>(n * n)) {
    throw std::invalid_argument("pixel label map does not match scene size");
  }
  std::vector<int> labels(static_cast<std::size_t>(g * g));
  for (int py = 0; py < g; ++py) {
    for (int px = 0; px < g; ++px) {
      std::array<int, kNumClasses> votes{};
      for (int dy = 0; dy < p; ++dy) {
        for (int dx = 0; dx < p; ++dx) {
          const auto l = pixel_labels[static_cast<std::size_t>((py * p + dy) * n + px * p + dx)];
          if (l >= kNumClasses) throw std::out_of_range("pixel label out of range");
          ++votes[l];
        }
      }
      labels[static_cast<std::size_t>(py * g + px)] =
          static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
  }
  return labels;
}

Matrix apply_photometry(const Matrix& raw, const DomainSpec& spec, Rng& rng) {
  spec.validate(static_cast<int>(raw.rows()));
  Matrix out(raw.rows(), raw.cols());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index c = 0; c < raw.rows(); ++c) {
    const auto ci = static_cast<std::size_t>(c);
    out.row(c) = (raw.row(c).array() * spec.channel_scale[ci] + spec.channel_mean_shift[ci]).matrix();
  }
  if (spec.noise_std > 0.0) {
    for (Eigen::Index c = 0; c < out.rows(); ++c) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) out(c, j) += spec.noise_std * noise(rng);
    }
  }
  return out;
}

Dataset gen_corpus(std::span<const DomainSpec> specs, std::size_t scenes_per_domain,
                   const SceneConfig& scene, std::uint64_t seed) {
  if (specs.empty()) throw std::invalid_argument("gen_corpus: at least one DomainSpec required");
  scene.validate();
  Dataset ds;
  ds.scene = scene;
  ds.seed = seed;
  ds.scenes_per_domain = scenes_per_domain;
  for (const DomainSpec& spec : specs) {
    spec.validate(scene.channels);
    if (ds.has_domain(spec.domain_id)) {
      throw std::invalid_argument("gen_corpus: duplicate domain id " +
                                  std::to_string(spec.domain_id));
    }
    ds.specs.push_back(spec);
    std::vector<Sample> samples;
    samples.reserve(scenes_per_domain);
    const auto id = static_cast<std::uint64_t>(static_cast<std::int64_t>(spec.domain_id));
    for (std::size_t i = 0; i < scenes_per_domain; ++i) {
      const std::uint64_t scene_seed = derive_seed(seed, stream_tag("scene") ^ id, i);
      CanonicalScene canon = render_scene(scene, spec.texture_freq, scene_seed);
      Rng photo(derive_seed(seed, stream_tag("photometry") ^ id, i));
      Sample s;
      s.image = apply_photometry(canon.raw, spec, photo);
      s.labels = pool_patch_labels(scene, canon.pixel_labels);
      s.pixel_labels = std::move(canon.pixel_labels);
      samples.push_back(std::move(s));
    }
    ds.domains.push_back(std::move(samples));
  }
  return ds;
}

std::vector<std::size_t> class_frequencies(const Dataset& dataset) {
  std::vector<std::size_t> counts(kNumClasses, 0);
  for (const auto& domain : dataset.domains) {
    for (const Sample& s : domain) {
      for (std::uint8_t l : s.pixel_labels) ++counts[l];
    }
  }
  return counts;
}

InstanceStats instance_stats(std::span<const Sample> samples) {
  if (samples.empty()) return {};
  const Eigen::Index channels = samples.front().image.rows();
  InstanceStats st{Matrix(static_cast<Eigen::Index>(samples.size()), channels),
                   Matrix(static_cast<Eigen::Index>(samples.size()), channels)};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Matrix& img = samples[i].image;
    if (img.cols() == 0) throw std::invalid_argument("instance_stats: empty spatial extent");
    if (img.rows() != channels) throw std::invalid_argument("instance_stats: channel mismatch");
    const auto row = static_cast<Eigen::Index>(i);
    st.mu.row(row) = channel_means(img);
    const Matrix centered = img.colwise() - st.mu.row(row).transpose();
    st.sigma.row(row) =
        (centered.array().square().rowwise().mean().sqrt()).matrix().transpose();
  }
  return st;
}

BatchUncertainty batch_uncertainty(std::span<const Sample> samples) {
  if (samples.size() < 2) {
    throw std::invalid_argument("batch_uncertainty: batch size must be >= 2");
  }
  const InstanceStats st = instance_stats(samples);
  auto spread = [](const Matrix& m) -> RowVector {
    const RowVector mean = m.colwise().mean();
    return ((m.rowwise() - mean).array().square().colwise().mean().sqrt()).matrix();
  };
  return {spread(st.mu), spread(st.sigma)};
}

DomainBatch perturb_statistics(const DomainBatch& batch, const PerturbationDraw& draw) {
  DomainBatch out = batch;
  if (batch.samples.empty()) return out;
  const Eigen::Index channels = batch.samples.front().image.rows();
  if (draw.sigma_mu.size() != channels || draw.sigma_sigma.size() != channels) {
    throw std::invalid_argument("perturb_statistics: draw has wrong channel count");
  }
  const InstanceStats st = instance_stats(batch.samples);
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    Matrix& img = out.samples[i].image;
    if (img.rows() != channels) throw std::invalid_argument("perturb_statistics: shape mismatch");
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index c = 0; c < channels; ++c) {
      const double mu = st.mu(row, c);
      const double sigma = st.sigma(row, c);
      const double shift = draw.eps_mu * draw.sigma_mu(c);
      const double spread = draw.eps_sigma * draw.sigma_sigma(c);
      if (sigma == 0.0 || (shift == 0.0 && spread == 0.0)) continue;
      const double alpha = mu + shift;
      const double beta = std::max(sigma + spread, kMinPerturbedStd);
      img.row(c) = (((img.row(c).array() - mu) / sigma) * beta + alpha).matrix();
    }
  }
  return out;
}

PerturbationDraw sample_draw(const BatchUncertainty& uncertainty, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  PerturbationDraw draw;
  draw.eps_mu = normal(rng);
  draw.eps_sigma = normal(rng);
  draw.sigma_mu = uncertainty.sigma_mu;
  draw.sigma_sigma = uncertainty.sigma_sigma;
  return draw;
}

PerturbationDraw sample_draw(const DomainBatch& batch, Rng& rng, bool zero_shift) {
  BatchUncertainty u = batch_uncertainty(batch.samples);
  if (zero_shift) {
    u.sigma_mu.setZero();
    u.sigma_sigma.setZero();
  }
  return sample_draw(u, rng);
}

}  // namespace ftune::data
