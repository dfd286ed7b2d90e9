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

#include "fedrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace fedrec::eval {

namespace {

void check_candidate(data::ItemId item, Index num_items) {
  if (item < 0 || item >= num_items)
    throw ShapeError("candidate item " + std::to_string(item) + " outside [0, " +
                     std::to_string(num_items) + ")");
}

/// Does (score_a, id_a) come before (score_b, id_b)?
bool ranks_before(double score_a, data::ItemId id_a, double score_b, data::ItemId id_b) {
  return score_a != score_b ? score_a > score_b : id_a < id_b;
}

}  // namespace

std::vector<data::ItemId> rank_candidates(const UserVector& p, const Matrix& table,
                                          std::span<const data::ItemId> candidates) {
  if (table.cols() != p.size()) throw ShapeError("rank_candidates: dim mismatch");
  std::vector<std::pair<double, data::ItemId>> scored;
  scored.reserve(candidates.size());
  for (data::ItemId item : candidates) {
    check_candidate(item, table.rows());
    scored.emplace_back(table.row(item).dot(p.transpose()), item);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return ranks_before(a.first, a.second, b.first, b.second);
  });
  std::vector<data::ItemId> order;
  order.reserve(scored.size());
  for (const auto& [s, item] : scored) order.push_back(item);
  return order;
}

int held_out_rank(double held_out_score, data::ItemId held_out,
                  std::span<const double> negative_scores,
                  std::span<const data::ItemId> negatives) {
  int rank = 1;
  for (std::size_t i = 0; i < negatives.size(); ++i)
    if (ranks_before(negative_scores[i], negatives[i], held_out_score, held_out)) ++rank;
  return rank;
}

double hit_ratio_at_k(std::span<const int> ranks, int k) {
  if (ranks.empty()) return 0.0;
  std::size_t hits = 0;
  for (int r : ranks) hits += r <= k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at_k(std::span<const int> ranks, int k) {
  if (ranks.empty()) return 0.0;
  double total = 0.0;
  for (int r : ranks)
    if (r <= k) total += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return total / static_cast<double>(ranks.size());
}

EvalResult summarize(std::vector<int> ranks, int k) {
  EvalResult out;
  out.hr = hit_ratio_at_k(ranks, k);
  out.ndcg = ndcg_at_k(ranks, k);
  out.per_user_ranks = std::move(ranks);
  return out;
}

int evaluate_user(const UserVector& p, const Matrix& local, const Matrix& global,
                  const plgc::MixCoefficients& mix, data::ItemId held_out,
                  std::span<const data::ItemId> negatives) {
  const auto item_score = [&](data::ItemId item) {
    check_candidate(item, local.rows());
    return (mix.lambda_c * local.row(item) + mix.lambda_g * global.row(item)).dot(p.transpose());
  };
  const double target = item_score(held_out);
  std::vector<double> scores;
  scores.reserve(negatives.size());
  for (data::ItemId item : negatives) scores.push_back(item_score(item));
  return held_out_rank(target, held_out, scores, negatives);
}

void sort_ia_rows(std::vector<IaRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const IaRow& a, const IaRow& b) {
    return a.interactions != b.interactions ? a.interactions < b.interactions
                                            : a.user_id < b.user_id;
  });
}

void write_ia_csv(const IaReport& report, std::ostream& out) {
  out << "user_id,log10_interactions,ia_local,ia_personalized,ia_global\n";
  out << std::setprecision(10);
  for (const auto& row : report.rows) {
    out << row.user_id << ',' << row.log10_interactions << ',' << row.ia_local << ','
        << row.ia_personalized << ',' << report.ia_global << '\n';
  }
}

void write_spectrum_rows_csv(std::span<const SpectrumRow> rows, std::ostream& out) {
  out << "table_role,user_id,dim_index,log10_sigma\n";
  out << std::setprecision(10);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.singular_values.size(); ++i) {
      out << row.table_role << ',';
      if (row.user_id >= 0) out << row.user_id;
      out << ',' << i << ',' << std::log10(row.singular_values[i]) << '\n';
    }
  }
}

}  // namespace fedrec::eval
