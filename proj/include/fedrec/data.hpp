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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fedrec::data {

using UserId = std::int32_t;
using ItemId = std::int32_t;
using Rng = std::mt19937_64;

enum class RatingFormat { kTab, kDoubleColon };

RatingFormat parse_format(std::string_view name);
std::string_view format_name(RatingFormat format);

/// One explicit rating with ids already remapped to dense 0-based indices.
struct RawRating {
  UserId user_id = 0;
  ItemId item_id = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

/// Parsed rating file plus the dense-to-raw id tables. Dense ids follow
/// ascending raw id order.
struct RatingLog {
  std::vector<RawRating> ratings;
  std::vector<std::int64_t> raw_user_ids;
  std::vector<std::int64_t> raw_item_ids;
};

struct Interaction {
  ItemId item_id = 0;
  std::int64_t timestamp = 0;
};

/// Implicit-feedback dataset: every stored interaction is a positive.
struct Dataset {
  Index num_users = 0;
  Index num_items = 0;
  /// Per user, positives ordered by (timestamp, item_id).
  std::vector<std::vector<Interaction>> interactions;
  std::vector<std::int64_t> raw_user_ids;
  std::vector<std::int64_t> raw_item_ids;

  std::size_t num_interactions() const;
  double sparsity() const;
};

struct InteractionSplit {
  Index num_users = 0;
  Index num_items = 0;
  std::vector<std::vector<ItemId>> train;
  std::vector<ItemId> validation;
  std::vector<ItemId> test;
  /// Every positive of the user (train, validation and test), sorted by id.
  std::vector<std::vector<ItemId>> positives;

  bool is_positive(UserId user, ItemId item) const;
};

RatingLog parse_ratings(std::istream& in, RatingFormat format);
RatingLog load_ratings(const std::filesystem::path& path, RatingFormat format);

Dataset to_implicit(const RatingLog& log, std::size_t min_interactions);

InteractionSplit leave_one_out(const Dataset& dataset);

struct NegativeDraw {
  std::vector<ItemId> items;
  /// Set when the candidate pool was smaller than the ratio and items were
  /// drawn with replacement.
  bool with_replacement = false;
};

/// `ratio` distinct non-interacted items for every training positive, laid
/// out positive-major. Held-out items count as interacted.
NegativeDraw sample_train_negatives(const InteractionSplit& split, UserId user, std::size_t ratio,
                                    Rng& rng);

std::vector<ItemId> sample_eval_negatives(const InteractionSplit& split, UserId user,
                                          std::size_t k, Rng& rng);

/// Fixed validation and test negatives for every user, drawn independently.
struct EvalNegatives {
  std::vector<std::vector<ItemId>> validation;
  std::vector<std::vector<ItemId>> test;
};

EvalNegatives build_eval_negatives(const InteractionSplit& split, std::size_t k,
                                   std::uint64_t seed);

/// JSON lines {user, train, val, test}, one per user, raw ids when available.
void write_split_jsonl(const InteractionSplit& split, const Dataset& dataset, std::ostream& out);

}  // namespace fedrec::data
