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

#include "ftune/io/checkpoint.hpp"

#include "io/binary.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace ftune::io {

using detail::Reader;
using detail::Writer;
using detail::sha256;

namespace {

constexpr char kMagic[4] = {'F', 'T', 'C', 'K'};

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (std::uint8_t b : sha256(bytes)) {
    hex.push_back(kHex[b >> 4]);
    hex.push_back(kHex[b & 15]);
  }
  return hex;
}

std::string store_digest(const nn::ParamStore& store, std::span<const nn::Group> groups) {
  Writer w;
  for (const auto& e : store.entries()) {
    if (!groups.empty() && std::find(groups.begin(), groups.end(), e.group) == groups.end()) continue;
    w.raw(e.name.data(), e.name.size());
    const auto flat = e.value.reshaped();
    for (Eigen::Index i = 0; i < flat.size(); ++i) w.f64(flat(i));
  }
  return sha256_hex(w.bytes());
}

Bytes encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.le<std::uint16_t>(kCheckpointVersion);
  const std::string header = ck.meta.dump();
  w.le<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
  w.raw(header.data(), header.size());
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ck.arrays.size()));
  std::uint64_t offset = 0;
  for (const auto& e : ck.arrays.entries()) {
    if (e.name.size() > 0xffff) throw std::invalid_argument("array name too long");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(e.group));
    w.le<std::int32_t>(e.layer);
    w.le<std::uint8_t>(kDTypeF64);
    const auto count = static_cast<std::uint64_t>(e.value.size());
    w.le<std::uint64_t>(offset);
    w.le<std::uint64_t>(count);
    w.le<std::uint64_t>(static_cast<std::uint64_t>(e.value.rows()));
    w.le<std::uint64_t>(static_cast<std::uint64_t>(e.value.cols()));
    offset += count * 8;
  }
  w.le<std::uint64_t>(offset);
  for (const auto& e : ck.arrays.entries()) {
    const auto flat = e.value.reshaped();
    for (Eigen::Index i = 0; i < flat.size(); ++i) w.f64(flat(i));
  }
  const Bytes digest = sha256(w.bytes());
  w.raw(digest.data(), digest.size());
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + detail::kDigestSize) throw FormatError("checkpoint too short");
  const auto body = bytes.first(bytes.size() - detail::kDigestSize);
  const Bytes digest = sha256(body);
  if (!std::equal(digest.begin(), digest.end(), bytes.end() - detail::kDigestSize)) {
    throw FormatError("checkpoint digest mismatch");
  }
  Reader r(body);
  const auto magic = r.take(sizeof kMagic);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("not an FTCK file");
  const auto version = r.le<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto header = r.take(r.le<std::uint32_t>());
  try {
    ck.meta = nlohmann::json::parse(header.begin(), header.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  struct Record {
    std::string name;
    nn::Group group;
    int layer;
    std::uint64_t offset, count, rows, cols;
  };
  std::vector<Record> records(r.le<std::uint32_t>());
  std::uint64_t expected_offset = 0;
  for (auto& rec : records) {
    const auto name = r.take(r.le<std::uint16_t>());
    rec.name.assign(name.begin(), name.end());
    const auto group = r.le<std::uint8_t>();
    if (group > static_cast<std::uint8_t>(nn::Group::Decoder)) throw FormatError("bad group tag");
    rec.group = static_cast<nn::Group>(group);
    rec.layer = r.le<std::int32_t>();
    if (r.le<std::uint8_t>() != kDTypeF64) throw FormatError("unsupported dtype in '" + rec.name + "'");
    rec.offset = r.le<std::uint64_t>();
    rec.count = r.le<std::uint64_t>();
    rec.rows = r.le<std::uint64_t>();
    rec.cols = r.le<std::uint64_t>();
    if (rec.offset != expected_offset || rec.rows * rec.cols != rec.count) {
      throw FormatError("inconsistent manifest entry '" + rec.name + "'");
    }
    expected_offset += rec.count * 8;
  }
  if (r.le<std::uint64_t>() != expected_offset) throw FormatError("payload length mismatch");
  for (const auto& rec : records) {
    Matrix m(static_cast<Eigen::Index>(rec.rows), static_cast<Eigen::Index>(rec.cols));
    auto flat = m.reshaped();
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = r.f64();
    try {
      ck.arrays.add(rec.name, rec.group, rec.layer, std::move(m));
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what());
    }
  }
  if (r.pos() != body.size()) throw FormatError("trailing bytes in checkpoint");
  return ck;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  write_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_atomic(path, encode_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const nn::ModelConfig& c) {
  return {{"image_size", c.image_size}, {"patch_size", c.patch_size}, {"channels", c.channels},
          {"embed_dim", c.embed_dim},   {"num_heads", c.num_heads},   {"head_dim", c.head_dim},
          {"num_blocks", c.num_blocks}, {"ffn_hidden", c.ffn_hidden}, {"num_classes", c.num_classes}};
}

nn::ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    nn::ModelConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.patch_size = j.at("patch_size").get<int>();
    c.channels = j.at("channels").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.head_dim = j.at("head_dim").get<int>();
    c.num_blocks = j.at("num_blocks").get<int>();
    c.ffn_hidden = j.at("ffn_hidden").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
}

Checkpoint make_model_checkpoint(const nn::ModelConfig& config, const nn::ParamStore& store,
                                 nlohmann::json extra) {
  Checkpoint ck;
  ck.meta = std::move(extra);
  ck.meta["kind"] = "params";
  ck.meta["model"] = to_json(config);
  ck.arrays = store;
  return ck;
}

std::pair<nn::SegmentationTransformer, nn::ParamStore> restore_model(
    const Checkpoint& ck, const nn::ModelConfig& expected) {
  if (ck.meta.value("kind", "") != "params") throw FormatError("checkpoint does not hold parameters");
  const nn::ModelConfig stored = model_config_from_json(ck.meta.at("model"));
  if (!(stored == expected)) {
    throw FormatError("checkpoint model config " + to_json(stored).dump() +
                      " does not match the run config " + to_json(expected).dump());
  }
  try {
    auto model = nn::SegmentationTransformer::bind(expected, ck.arrays);
    return {std::move(model), ck.arrays};
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint arrays: ") + e.what());
  }
}

}  // namespace ftune::io
