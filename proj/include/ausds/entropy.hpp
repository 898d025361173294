// Copyright 2026 The AUSDS Authors
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

#include <cmath>
#include <span>

#include "ausds/error.hpp"
#include "ausds/linalg.hpp"
#include "ausds/log.hpp"

namespace ausds {

inline constexpr double kProbabilitySumTolerance = 1e-4;

// Max entropy, natural log, with 0 ln 0 = 0.
inline double entropy_me(std::span<const double> probs) {
  double sum = 0.0;
  double h = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw InputError("entropy: negative or NaN probability");
    sum += p;
    if (p > 0.0) h -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) throw InputError("entropy: probabilities do not sum to 1");
  return h;
}

// Total token entropy: sum of per-token max entropies.
inline double entropy_tte(std::span<const Vector> token_probs) {
  if (token_probs.empty()) {
    log_warn("entropy_tte: empty sequence, entropy is 0");
    return 0.0;
  }
  double h = 0.0;
  for (const auto& p : token_probs) h += entropy_me(p);
  return h;
}

}  // namespace ausds
