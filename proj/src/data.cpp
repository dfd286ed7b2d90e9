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

#include "fedrec/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

namespace fedrec::data {

namespace {

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, std::string_view delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + delim.size();
  }
  return fields;
}

struct RawRow {
  std::int64_t user;
  std::int64_t item;
  double rating;
  std::int64_t timestamp;
};

std::vector<std::int64_t> dense_ids(const std::vector<RawRow>& rows, bool users) {
  std::vector<std::int64_t> ids;
  ids.reserve(rows.size());
  for (const auto& r : rows) ids.push_back(users ? r.user : r.item);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::int32_t lookup(const std::vector<std::int64_t>& sorted, std::int64_t raw) {
  return static_cast<std::int32_t>(std::lower_bound(sorted.begin(), sorted.end(), raw) -
                                   sorted.begin());
}

bool later(const Interaction& a, const Interaction& b) {
  return a.timestamp != b.timestamp ? a.timestamp > b.timestamp : a.item_id > b.item_id;
}

}  // namespace

RatingFormat parse_format(std::string_view name) {
  if (name == "tab") return RatingFormat::kTab;
  if (name == "double_colon") return RatingFormat::kDoubleColon;
  throw ConfigError("unknown rating format '" + std::string(name) + "'");
}

std::string_view format_name(RatingFormat format) {
  return format == RatingFormat::kTab ? "tab" : "double_colon";
}

std::size_t Dataset::num_interactions() const {
  std::size_t n = 0;
  for (const auto& u : interactions) n += u.size();
  return n;
}

double Dataset::sparsity() const {
  return 1.0 - static_cast<double>(num_interactions()) /
                   (static_cast<double>(num_users) * static_cast<double>(num_items));
}

bool InteractionSplit::is_positive(UserId user, ItemId item) const {
  const auto& pos = positives[static_cast<std::size_t>(user)];
  return std::binary_search(pos.begin(), pos.end(), item);
}

RatingLog parse_ratings(std::istream& in, RatingFormat format) {
  const std::string_view delim = format == RatingFormat::kTab ? "\t" : "::";
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view, delim);
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 fields separated by '" +
                                    std::string(format == RatingFormat::kTab ? "\\t" : "::") +
                                    "', got " + std::to_string(fields.size()));
    }
    RawRow row{};
    if (!parse_number(fields[0], row.user) || !parse_number(fields[1], row.item) ||
        !parse_number(fields[2], row.rating) || !parse_number(fields[3], row.timestamp)) {
      throw ParseError(line_no, "non-numeric field in '" + std::string(view) + "'");
    }
    if (row.user < 0 || row.item < 0) throw ParseError(line_no, "negative id");
    rows.push_back(row);
  }
  if (rows.empty()) throw EmptyDatasetError("rating file contains no ratings");

  RatingLog log;
  log.raw_user_ids = dense_ids(rows, true);
  log.raw_item_ids = dense_ids(rows, false);
  log.ratings.reserve(rows.size());
  for (const auto& r : rows) {
    log.ratings.push_back(RawRating{lookup(log.raw_user_ids, r.user),
                                    lookup(log.raw_item_ids, r.item), r.rating, r.timestamp});
  }
  return log;
}

RatingLog load_ratings(const std::filesystem::path& path, RatingFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rating file " + path.string());
  return parse_ratings(in, format);
}

Dataset to_implicit(const RatingLog& log, std::size_t min_interactions) {
  if (log.ratings.empty()) throw EmptyDatasetError("no ratings to convert");

  // Collapse duplicates per (user, item), keeping the latest timestamp.
  std::map<std::pair<UserId, ItemId>, std::int64_t> latest;
  for (const auto& r : log.ratings) {
    if (!(r.rating > 0.0)) continue;
    auto [it, inserted] = latest.try_emplace({r.user_id, r.item_id}, r.timestamp);
    if (!inserted) it->second = std::max(it->second, r.timestamp);
  }

  std::map<UserId, std::vector<Interaction>> per_user;
  for (const auto& [key, ts] : latest) per_user[key.first].push_back({key.second, ts});

  std::vector<UserId> kept_users;
  std::vector<char> item_used(log.raw_item_ids.size(), 0);
  ItemId max_item = 0;
  for (const auto& [user, items] : per_user) {
    if (items.size() < min_interactions) continue;
    kept_users.push_back(user);
    for (const auto& it : items) max_item = std::max(max_item, it.item_id);
  }
  if (kept_users.empty()) throw EmptyDatasetError("every user was filtered out");

  item_used.resize(std::max<std::size_t>(item_used.size(), static_cast<std::size_t>(max_item) + 1));
  for (UserId u : kept_users)
    for (const auto& it : per_user[u]) item_used[static_cast<std::size_t>(it.item_id)] = 1;

  std::vector<ItemId> item_remap(item_used.size(), -1);
  Dataset ds;
  for (std::size_t i = 0; i < item_used.size(); ++i) {
    if (!item_used[i]) continue;
    item_remap[i] = static_cast<ItemId>(ds.num_items++);
    ds.raw_item_ids.push_back(i < log.raw_item_ids.size() ? log.raw_item_ids[i]
                                                          : static_cast<std::int64_t>(i));
  }

  ds.num_users = static_cast<Index>(kept_users.size());
  ds.interactions.resize(kept_users.size());
  for (std::size_t k = 0; k < kept_users.size(); ++k) {
    const UserId u = kept_users[k];
    ds.raw_user_ids.push_back(static_cast<std::size_t>(u) < log.raw_user_ids.size()
                                  ? log.raw_user_ids[static_cast<std::size_t>(u)]
                                  : u);
    auto& out = ds.interactions[k];
    for (const auto& it : per_user[u])
      out.push_back({item_remap[static_cast<std::size_t>(it.item_id)], it.timestamp});
    std::sort(out.begin(), out.end(),
              [](const Interaction& a, const Interaction& b) { return later(b, a); });
  }
  return ds;
}

InteractionSplit leave_one_out(const Dataset& dataset) {
  InteractionSplit split;
  split.num_users = dataset.num_users;
  split.num_items = dataset.num_items;
  const auto n = static_cast<std::size_t>(dataset.num_users);
  split.train.resize(n);
  split.validation.resize(n);
  split.test.resize(n);
  split.positives.resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    auto ordered = dataset.interactions[u];
    if (ordered.size() < 3) {
      throw SplitError("user " + std::to_string(u) + " has " + std::to_string(ordered.size()) +
                       " positives; leave-one-out needs at least 3");
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const Interaction& a, const Interaction& b) { return later(b, a); });
    split.test[u] = ordered.back().item_id;
    split.validation[u] = ordered[ordered.size() - 2].item_id;
    for (std::size_t i = 0; i + 2 < ordered.size(); ++i) split.train[u].push_back(ordered[i].item_id);
    for (const auto& it : ordered) split.positives[u].push_back(it.item_id);
    std::sort(split.positives[u].begin(), split.positives[u].end());
  }
  return split;
}

NegativeDraw sample_train_negatives(const InteractionSplit& split, UserId user, std::size_t ratio,
                                    Rng& rng) {
  NegativeDraw draw;
  const auto& train = split.train[static_cast<std::size_t>(user)];
  if (ratio == 0 || train.empty()) return draw;

  const auto& pos = split.positives[static_cast<std::size_t>(user)];
  const auto pool = static_cast<std::size_t>(split.num_items) - pos.size();
  if (pool == 0) {
    throw SamplingError("user " + std::to_string(user) + " has no candidate negatives");
  }
  draw.with_replacement = pool < ratio;
  draw.items.reserve(train.size() * ratio);
  std::uniform_int_distribution<ItemId> pick(0, static_cast<ItemId>(split.num_items - 1));
  std::vector<ItemId> chosen;
  chosen.reserve(ratio);
  for (std::size_t p = 0; p < train.size(); ++p) {
    chosen.clear();
    while (chosen.size() < ratio) {
      const ItemId item = pick(rng);
      if (std::binary_search(pos.begin(), pos.end(), item)) continue;
      if (!draw.with_replacement &&
          std::find(chosen.begin(), chosen.end(), item) != chosen.end())
        continue;
      chosen.push_back(item);
    }
    draw.items.insert(draw.items.end(), chosen.begin(), chosen.end());
  }
  return draw;
}

std::vector<ItemId> sample_eval_negatives(const InteractionSplit& split, UserId user,
                                          std::size_t k, Rng& rng) {
  const auto& pos = split.positives[static_cast<std::size_t>(user)];
  std::vector<ItemId> pool;
  pool.reserve(static_cast<std::size_t>(split.num_items) - pos.size());
  for (ItemId i = 0; i < static_cast<ItemId>(split.num_items); ++i)
    if (!std::binary_search(pos.begin(), pos.end(), i)) pool.push_back(i);
  if (pool.size() < k) {
    throw SamplingError("user " + std::to_string(user) + " has only " +
                        std::to_string(pool.size()) + " non-interacted items, " +
                        std::to_string(k) + " evaluation negatives requested");
  }
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

EvalNegatives build_eval_negatives(const InteractionSplit& split, std::size_t k,
                                   std::uint64_t seed) {
  EvalNegatives out;
  const auto n = static_cast<std::size_t>(split.num_users);
  out.validation.resize(n);
  out.test.resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    Rng rng(mix_seed(seed, 0xE7A1'0000ULL + u));
    out.validation[u] = sample_eval_negatives(split, static_cast<UserId>(u), k, rng);
    out.test[u] = sample_eval_negatives(split, static_cast<UserId>(u), k, rng);
  }
  return out;
}

void write_split_jsonl(const InteractionSplit& split, const Dataset& dataset, std::ostream& out) {
  const auto raw_item = [&](ItemId i) -> std::int64_t {
    return static_cast<std::size_t>(i) < dataset.raw_item_ids.size()
               ? dataset.raw_item_ids[static_cast<std::size_t>(i)]
               : i;
  };
  for (std::size_t u = 0; u < static_cast<std::size_t>(split.num_users); ++u) {
    nlohmann::json row;
    row["user"] = u < dataset.raw_user_ids.size() ? dataset.raw_user_ids[u]
                                                  : static_cast<std::int64_t>(u);
    std::vector<std::int64_t> train;
    for (ItemId i : split.train[u]) train.push_back(raw_item(i));
    row["train"] = train;
    row["val"] = raw_item(split.validation[u]);
    row["test"] = raw_item(split.test[u]);
    out << row.dump() << '\n';
  }
}

}  // namespace fedrec::data
