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

#include "ftune/io/dataset_io.hpp"

#include <algorithm>

#include "io/binary.hpp"

namespace ftune::io {

namespace {

constexpr char kMagic[4] = {'F', 'T', 'D', 'S'};

nlohmann::json scene_json(const data::SceneConfig& s) {
  return {{"image_size", s.image_size}, {"channels", s.channels}, {"patch_size", s.patch_size}};
}

}  // namespace

nlohmann::json to_json(const data::DomainSpec& spec) {
  return {{"domain_id", spec.domain_id},
          {"channel_mean_shift", spec.channel_mean_shift},
          {"channel_scale", spec.channel_scale},
          {"noise_std", spec.noise_std},
          {"texture_freq", spec.texture_freq}};
}

data::DomainSpec domain_spec_from_json(const nlohmann::json& j) {
  try {
    data::DomainSpec s;
    s.domain_id = j.at("domain_id").get<int>();
    s.channel_mean_shift = j.at("channel_mean_shift").get<std::vector<double>>();
    s.channel_scale = j.at("channel_scale").get<std::vector<double>>();
    s.noise_std = j.at("noise_std").get<double>();
    s.texture_freq = j.at("texture_freq").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("domain spec: ") + e.what());
  }
}

Bytes encode_dataset(const data::Dataset& dataset) {
  detail::Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.le<std::uint16_t>(kDatasetVersion);
  nlohmann::json header;
  header["scene"] = scene_json(dataset.scene);
  header["seed"] = dataset.seed;
  header["scenes_per_domain"] = dataset.scenes_per_domain;
  header["specs"] = nlohmann::json::array();
  header["counts"] = nlohmann::json::array();
  for (std::size_t d = 0; d < dataset.specs.size(); ++d) {
    header["specs"].push_back(to_json(dataset.specs[d]));
    header["counts"].push_back(dataset.domains[d].size());
  }
  const std::string text = header.dump();
  w.le<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.raw(text.data(), text.size());
  for (const auto& domain : dataset.domains) {
    for (const auto& s : domain) {
      const auto flat = s.image.reshaped<Eigen::RowMajor>();
      for (Eigen::Index i = 0; i < flat.size(); ++i) w.f64(flat(i));
      w.raw(s.pixel_labels.data(), s.pixel_labels.size());
      for (int l : s.labels) w.le<std::uint8_t>(static_cast<std::uint8_t>(l));
    }
  }
  const Bytes digest = detail::sha256(w.bytes());
  w.raw(digest.data(), digest.size());
  return std::move(w.bytes());
}

data::Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + detail::kDigestSize) throw FormatError("dataset too short");
  const auto body = bytes.first(bytes.size() - detail::kDigestSize);
  const Bytes digest = detail::sha256(body);
  if (!std::equal(digest.begin(), digest.end(), bytes.end() - detail::kDigestSize)) {
    throw FormatError("dataset digest mismatch");
  }
  detail::Reader r(body);
  const auto magic = r.take(sizeof kMagic);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("not an FTDS file");
  if (r.le<std::uint16_t>() != kDatasetVersion) throw FormatError("unsupported dataset version");
  const auto text = r.take(r.le<std::uint32_t>());
  data::Dataset ds;
  std::vector<std::size_t> counts;
  try {
    const auto header = nlohmann::json::parse(text.begin(), text.end());
    ds.scene.image_size = header.at("scene").at("image_size").get<int>();
    ds.scene.channels = header.at("scene").at("channels").get<int>();
    ds.scene.patch_size = header.at("scene").at("patch_size").get<int>();
    ds.seed = header.at("seed").get<std::uint64_t>();
    ds.scenes_per_domain = header.at("scenes_per_domain").get<std::size_t>();
    for (const auto& s : header.at("specs")) ds.specs.push_back(domain_spec_from_json(s));
    counts = header.at("counts").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  }
  if (counts.size() != ds.specs.size()) throw FormatError("dataset header: counts/specs mismatch");
  try {
    ds.scene.validate();
    for (const auto& s : ds.specs) s.validate(ds.scene.channels);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  }
  const int pixels = ds.scene.image_size * ds.scene.image_size;
  const auto patches = static_cast<std::size_t>(ds.scene.num_patches());
  for (std::size_t count : counts) {
    std::vector<data::Sample> domain(count);
    for (auto& s : domain) {
      s.image.resize(ds.scene.channels, pixels);
      auto flat = s.image.reshaped<Eigen::RowMajor>();
      for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = r.f64();
      const auto px = r.take(static_cast<std::size_t>(pixels));
      s.pixel_labels.assign(px.begin(), px.end());
      s.labels.resize(patches);
      for (int& l : s.labels) {
        l = r.le<std::uint8_t>();
        if (l >= data::kNumClasses) throw FormatError("dataset: label out of range");
      }
    }
    ds.domains.push_back(std::move(domain));
  }
  if (r.pos() != body.size()) throw FormatError("trailing bytes in dataset");
  return ds;
}

nlohmann::json dataset_manifest(const data::Dataset& dataset, const std::string& digest) {
  nlohmann::json m;
  m["format"] = "ftune.dataset/1";
  m["file"] = kDatasetFile;
  m["sha256"] = digest;
  m["seed"] = dataset.seed;
  m["scene"] = scene_json(dataset.scene);
  m["domains"] = nlohmann::json::array();
  for (std::size_t d = 0; d < dataset.specs.size(); ++d) {
    nlohmann::json e = to_json(dataset.specs[d]);
    e["count"] = dataset.domains[d].size();
    m["domains"].push_back(std::move(e));
  }
  return m;
}

std::string save_dataset(const std::filesystem::path& dir, const data::Dataset& dataset) {
  const Bytes bytes = encode_dataset(dataset);
  const std::string digest = sha256_hex(bytes);
  write_atomic(dir / kDatasetFile, bytes);
  write_atomic(dir / kManifestFile, dataset_manifest(dataset, digest).dump(2) + "\n");
  return digest;
}

data::Dataset load_dataset(const std::filesystem::path& dir) {
  const Bytes bytes = read_file(dir / kDatasetFile);
  std::string expected;
  try {
    const Bytes text = read_file(dir / kManifestFile);
    expected = nlohmann::json::parse(text.begin(), text.end()).at("sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset manifest: ") + e.what());
  }
  if (sha256_hex(bytes) != expected) throw FormatError("dataset does not match its manifest digest");
  return decode_dataset(bytes);
}

}  // namespace ftune::io
