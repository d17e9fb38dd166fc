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

#include <stdexcept>
#include <string>
#include <string_view>

namespace metakey {

enum class ErrorCode {
  size,
  padding,
  invalid_argument,
  envelope,
  configuration,
  routing,
  not_found,
  authorization,
  corruption,
  verification,
  format,
  io,
  locked,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::size: return "size";
    case ErrorCode::padding: return "padding";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::envelope: return "envelope";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::routing: return "routing";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::authorization: return "authorization";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::verification: return "verification";
    case ErrorCode::format: return "format";
    case ErrorCode::io: return "io";
    case ErrorCode::locked: return "locked";
  }
  return "unknown";
}

/// The one exception type thrown by the library. Callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace metakey
