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

#include "ftune/nn/param_store.hpp"

#include <algorithm>
#include <stdexcept>

namespace ftune::nn {

std::string_view group_name(Group g) {
  switch (g) {
    case Group::Q: return "Q";
    case Group::K: return "K";
    case Group::V: return "V";
    case Group::FFN: return "FFN";
    case Group::Embed: return "Embed";
    case Group::Decoder: return "Decoder";
  }
  return "?";
}

Group parse_group(std::string_view name) {
  for (Group g : {Group::Q, Group::K, Group::V, Group::FFN, Group::Embed, Group::Decoder}) {
    if (group_name(g) == name) return g;
  }
  throw std::invalid_argument("unknown parameter group '" + std::string(name) + "'");
}

std::size_t ParamStore::add(std::string name, Group group, int layer, Matrix value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  offsets_.push_back(total_);
  total_ += static_cast<std::size_t>(value.size());
  entries_.push_back({std::move(name), group, layer, std::move(value)});
  return entries_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

Vector ParamStore::flatten() const {
  Vector flat(static_cast<Eigen::Index>(total_));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Matrix& m = entries_[i].value;
    flat.segment(static_cast<Eigen::Index>(offsets_[i]), m.size()) = m.reshaped();
  }
  return flat;
}

void ParamStore::assign(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != total_) {
    throw std::invalid_argument("flat parameter vector has wrong length");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    Matrix& m = entries_[i].value;
    m.reshaped() = flat.segment(static_cast<Eigen::Index>(offsets_[i]), m.size());
  }
}

Selection::Selection(const ParamStore& store, std::initializer_list<Group> groups)
    : Selection(store, std::span<const Group>(groups.begin(), groups.size())) {}

Selection::Selection(const ParamStore& store, std::span<const Group> groups)
    : groups_(groups.begin(), groups.end()), member_(store.size(), false) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (std::find(groups_.begin(), groups_.end(), store[i].group) == groups_.end()) continue;
    entries_.push_back(i);
    offsets_.push_back(total_);
    member_[i] = true;
    total_ += static_cast<std::size_t>(store[i].value.size());
  }
}

Selection Selection::backbone_default(const ParamStore& store) {
  return Selection(store, {Group::Q, Group::K, Group::V, Group::FFN});
}

bool Selection::contains_entry(std::size_t entry) const {
  return entry < member_.size() && member_[entry];
}

Vector Selection::gather(const ParamStore& store) const {
  Vector flat(static_cast<Eigen::Index>(total_));
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const Matrix& m = store[entries_[k]].value;
    flat.segment(static_cast<Eigen::Index>(offsets_[k]), m.size()) = m.reshaped();
  }
  return flat;
}

void Selection::scatter(ParamStore& store, const Vector& flat) const {
  if (static_cast<std::size_t>(flat.size()) != total_) {
    throw std::invalid_argument("selection vector has wrong length");
  }
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    Matrix& m = store[entries_[k]].value;
    m.reshaped() = flat.segment(static_cast<Eigen::Index>(offsets_[k]), m.size());
  }
}

std::pair<std::size_t, std::size_t> Selection::locate(std::size_t flat) const {
  if (flat >= total_) throw std::out_of_range("selection index out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  const auto k = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {entries_[k], flat - offsets_[k]};
}

Matrix GradMap::dense(std::size_t i, const ParamStore& store) const {
  if (has(i)) return grads_[i];
  return Matrix::Zero(store[i].value.rows(), store[i].value.cols());
}

Vector GradMap::flatten(const ParamStore& store) const {
  Vector flat = Vector::Zero(static_cast<Eigen::Index>(store.total_scalars()));
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (!has(i)) continue;
    flat.segment(static_cast<Eigen::Index>(store.offset(i)), grads_[i].size()) =
        grads_[i].reshaped();
  }
  return flat;
}

Vector GradMap::flatten(const ParamStore& store, const Selection& sel) const {
  Vector flat = Vector::Zero(static_cast<Eigen::Index>(sel.total_scalars()));
  const auto entries = sel.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const std::size_t i = entries[k];
    if (!has(i)) continue;
    flat.segment(static_cast<Eigen::Index>(sel.offset(k)), store[i].value.size()) =
        grads_[i].reshaped();
  }
  return flat;
}

GradMap& GradMap::operator+=(const GradMap& other) {
  if (grads_.empty()) grads_.resize(other.size());
  if (other.size() != grads_.size()) throw std::invalid_argument("GradMap size mismatch");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (!other.has(i)) continue;
    if (has(i)) {
      grads_[i] += other.grads_[i];
    } else {
      grads_[i] = other.grads_[i];
    }
  }
  return *this;
}

GradMap& GradMap::operator*=(double s) {
  for (Matrix& g : grads_) g *= s;
  return *this;
}

ParamMask::ParamMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  count_ = static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(),
                                                  [](std::uint8_t b) { return b != 0; }));
}

ParamMask ParamMask::for_groups(const ParamStore& store, std::initializer_list<Group> groups) {
  return for_selection(store, Selection(store, groups));
}

ParamMask ParamMask::for_selection(const ParamStore& store, const Selection& sel) {
  ParamMask mask(store.total_scalars(), false);
  for (std::size_t i : sel.entries()) {
    const std::size_t begin = store.offset(i);
    const auto n = static_cast<std::size_t>(store[i].value.size());
    for (std::size_t j = 0; j < n; ++j) mask.set(begin + j, true);
  }
  return mask;
}

void ParamMask::set(std::size_t i, bool v) {
  const bool old = bits_[i] != 0;
  if (old == v) return;
  bits_[i] = v ? 1 : 0;
  count_ = v ? count_ + 1 : count_ - 1;
}

ParamMask& ParamMask::operator|=(const ParamMask& other) {
  if (other.size() != size()) throw std::invalid_argument("mask size mismatch");
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (other.bits_[i] != 0) set(i, true);
  }
  return *this;
}

}  // namespace ftune::nn
