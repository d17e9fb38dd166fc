// Copyright 2026 The Metakey Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace metakey {

/// Address of a node in the storage network. Opaque outside the simulator.
struct NodeId {
  std::uint64_t value = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

inline std::string to_string(NodeId id) { return std::to_string(id.value); }

}  // namespace metakey

template <>
struct std::hash<metakey::NodeId> {
  std::size_t operator()(metakey::NodeId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
