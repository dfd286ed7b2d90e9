// Copyright 2026 The fedrec-plgc Authors
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

#include "fedrec/common.hpp"
#include "fedrec/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace fedrec::testing {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

inline Vector random_vector(Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

/// Synthetic implicit ratings (tab format): every user rates `per_user`
/// distinct items, biased towards a user-specific block of the catalog so
/// there is signal to learn.
inline std::string synthetic_ratings(int users, int items, int per_user, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ostringstream text;
  for (int u = 0; u < users; ++u) {
    const int block = (u % 5) * (items / 5);
    std::vector<int> chosen;
    std::uniform_int_distribution<int> in_block(0, items / 5 - 1);
    std::uniform_int_distribution<int> any(0, items - 1);
    std::bernoulli_distribution near(0.8);
    while (static_cast<int>(chosen.size()) < per_user) {
      const int item = near(rng) ? block + in_block(rng) : any(rng);
      if (std::find(chosen.begin(), chosen.end(), item) == chosen.end()) chosen.push_back(item);
    }
    for (std::size_t k = 0; k < chosen.size(); ++k)
      text << u + 1 << '\t' << chosen[k] + 1 << "\t4\t" << 1000 + k << '\n';
  }
  return text.str();
}

inline data::InteractionSplit synthetic_split(int users, int items, int per_user,
                                              std::uint64_t seed) {
  std::istringstream in(synthetic_ratings(users, items, per_user, seed));
  const auto log = data::parse_ratings(in, data::RatingFormat::kTab);
  return data::leave_one_out(data::to_implicit(log, 3));
}

/// |a - b| relative to the larger magnitude, with a floor for entries that
/// are both near zero.
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace fedrec::testing
