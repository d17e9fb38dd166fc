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

#include <boost/math/special_functions/gamma.hpp>

#include <span>

#include "metakey/error.hpp"

namespace metakey::stats {

struct ChiSquare {
  double statistic = 0;
  std::size_t dof = 0;
  double p_value = 0;
};

/// Pearson goodness-of-fit against equal expected counts in every bin.
inline ChiSquare chi_square_uniform(std::span<const std::uint64_t> counts) {
  if (counts.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "chi-square needs at least two bins");
  }
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw Error(ErrorCode::invalid_argument, "no observations");
  const double expected = static_cast<double>(total) / counts.size();
  ChiSquare out;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    out.statistic += d * d / expected;
  }
  out.dof = counts.size() - 1;
  out.p_value = boost::math::gamma_q(out.dof / 2.0, out.statistic / 2.0);
  return out;
}

}  // namespace metakey::stats
