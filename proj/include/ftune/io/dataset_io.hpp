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

#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "ftune/data/domain.hpp"
#include "ftune/io/checkpoint.hpp"

namespace ftune::io {

inline constexpr std::uint16_t kDatasetVersion = 1;

/// "FTDS", u16 version, u32 header length, header JSON (scene, seed, specs,
/// per-domain counts), then per sample: image f64[C*H*W], pixel labels
/// u8[H*W], patch labels u8[P]; 32-byte SHA-256 trailer.
Bytes encode_dataset(const data::Dataset& dataset);
data::Dataset decode_dataset(std::span<const std::uint8_t> bytes);

nlohmann::json to_json(const data::DomainSpec& spec);
data::DomainSpec domain_spec_from_json(const nlohmann::json& j);

/// Human-readable listing of the specs, counts and file digest.
nlohmann::json dataset_manifest(const data::Dataset& dataset, const std::string& digest);

inline constexpr const char* kDatasetFile = "dataset.ftds";
inline constexpr const char* kManifestFile = "manifest.json";

/// Writes dataset.ftds and manifest.json into `dir`; returns the file digest.
std::string save_dataset(const std::filesystem::path& dir, const data::Dataset& dataset);
/// Loads and checks the container against its manifest digest.
data::Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace ftune::io
