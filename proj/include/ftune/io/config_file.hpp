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
#include <string>

#include "ftune/tuner/config.hpp"

namespace ftune::io {

/// Parses the INI run configuration. Sections: [model], [data],
/// [estimation], [schedule], [baselines], [output]. Missing keys keep
/// their defaults; unknown sections or keys and malformed values raise
/// FormatError. The scene geometry of [data] is taken from [model].
tuner::TrainConfig parse_config(const std::string& text);
tuner::TrainConfig load_config(const std::filesystem::path& path);

/// Every field, defaults included, in a fixed order. parse_config of the
/// result reproduces the config exactly.
std::string serialize_config(const tuner::TrainConfig& cfg);

}  // namespace ftune::io
