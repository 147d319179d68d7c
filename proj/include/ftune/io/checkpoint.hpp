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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftune/nn/model.hpp"
#include "ftune/nn/param_store.hpp"

namespace ftune::io {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kDTypeF64 = 1;

/// Named arrays plus a JSON header. Holds model parameters, Fisher scores
/// or posterior precisions; `meta["kind"]` says which.
///
/// Layout (little endian): "FTCK", u16 version, u32 header length, header
/// JSON, u32 entry count, entries {u16 name length, name, u8 group,
/// i32 layer, u8 dtype, u64 byte offset, u64 element count, u64 rows,
/// u64 cols}, u64 payload length, f64 payload, 32-byte SHA-256 of all
/// preceding bytes.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  nn::ParamStore arrays;
};

Bytes encode_checkpoint(const Checkpoint& ck);
/// Throws FormatError on bad magic, version, truncation or digest mismatch.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameter checkpoint with the model config echoed into the header.
Checkpoint make_model_checkpoint(const nn::ModelConfig& config, const nn::ParamStore& store,
                                 nlohmann::json extra = nlohmann::json::object());
/// Rebinds a parameter checkpoint; throws FormatError if it does not fit `expected`.
std::pair<nn::SegmentationTransformer, nn::ParamStore> restore_model(
    const Checkpoint& ck, const nn::ModelConfig& expected);

nlohmann::json to_json(const nn::ModelConfig& c);
nn::ModelConfig model_config_from_json(const nlohmann::json& j);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
/// Digest of the raw little-endian values of the entries in these groups
/// (all entries when `groups` is empty).
std::string store_digest(const nn::ParamStore& store, std::span<const nn::Group> groups = {});

Bytes read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace ftune::io
