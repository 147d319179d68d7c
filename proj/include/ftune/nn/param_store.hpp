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
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftune/core.hpp"

namespace ftune::nn {

/// Block/group tag of a parameter tensor.
enum class Group : std::uint8_t { Q = 0, K = 1, V = 2, FFN = 3, Embed = 4, Decoder = 5 };

std::string_view group_name(Group g);
Group parse_group(std::string_view name);

struct ParamEntry {
  std::string name;
  Group group;
  int layer;  // 0-based block index, -1 for Embed/Decoder
  Matrix value;
};

/// Named, ordered registry of every trainable tensor of a model.
///
/// Iteration order is insertion order and is the canonical order for flat
/// views, masks, Fisher scores and checkpoints.
class ParamStore {
 public:
  std::size_t add(std::string name, Group group, int layer, Matrix value);

  std::size_t size() const { return entries_.size(); }
  const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }
  ParamEntry& operator[](std::size_t i) { return entries_[i]; }
  std::span<const ParamEntry> entries() const { return entries_; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t offset(std::size_t entry) const { return offsets_[entry]; }
  std::size_t total_scalars() const { return total_; }

  Vector flatten() const;
  void assign(const Vector& flat);

 private:
  std::vector<ParamEntry> entries_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

/// The subset of entries (by group) whose scalars are candidates for
/// Fisher scoring and selective tuning. Flat vectors over a selection are
/// the concatenation of its entries in store order.
class Selection {
 public:
  Selection() = default;
  Selection(const ParamStore& store, std::initializer_list<Group> groups);
  Selection(const ParamStore& store, std::span<const Group> groups);

  /// Q, K, V and FFN groups.
  static Selection backbone_default(const ParamStore& store);

  std::span<const std::size_t> entries() const { return entries_; }
  std::span<const Group> groups() const { return groups_; }
  bool contains_entry(std::size_t entry) const;
  std::size_t offset(std::size_t k) const { return offsets_[k]; }
  std::size_t total_scalars() const { return total_; }

  Vector gather(const ParamStore& store) const;
  void scatter(ParamStore& store, const Vector& flat) const;

  /// Maps a flat selection index to (entry index, scalar index in entry).
  std::pair<std::size_t, std::size_t> locate(std::size_t flat) const;

 private:
  std::vector<Group> groups_;
  std::vector<std::size_t> entries_;
  std::vector<std::size_t> offsets_;
  std::vector<bool> member_;
  std::size_t total_ = 0;
};

/// Per-entry gradients aligned with a ParamStore. An empty matrix means the
/// entry received no gradient, which reads as zero.
class GradMap {
 public:
  GradMap() = default;
  explicit GradMap(std::size_t entries) : grads_(entries) {}

  std::size_t size() const { return grads_.size(); }
  bool has(std::size_t i) const { return grads_[i].size() != 0; }
  const Matrix& raw(std::size_t i) const { return grads_[i]; }
  Matrix& raw(std::size_t i) { return grads_[i]; }
  Matrix dense(std::size_t i, const ParamStore& store) const;

  Vector flatten(const ParamStore& store) const;
  Vector flatten(const ParamStore& store, const Selection& sel) const;

  GradMap& operator+=(const GradMap& other);
  GradMap& operator*=(double s);

 private:
  std::vector<Matrix> grads_;
};

/// Per-scalar trainability flags aligned to ParamStore::total_scalars.
class ParamMask {
 public:
  ParamMask() = default;
  ParamMask(std::size_t n, bool value) : bits_(n, value ? 1 : 0), count_(value ? n : 0) {}
  explicit ParamMask(std::vector<std::uint8_t> bits);

  static ParamMask for_groups(const ParamStore& store, std::initializer_list<Group> groups);
  static ParamMask for_selection(const ParamStore& store, const Selection& sel);

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v);
  std::size_t count() const { return count_; }
  double selected_fraction() const {
    return bits_.empty() ? 0.0 : static_cast<double>(count_) / static_cast<double>(bits_.size());
  }
  std::span<const std::uint8_t> bits() const { return bits_; }

  ParamMask& operator|=(const ParamMask& other);
  bool operator==(const ParamMask& other) const { return bits_ == other.bits_; }

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t count_ = 0;
};

}  // namespace ftune::nn
