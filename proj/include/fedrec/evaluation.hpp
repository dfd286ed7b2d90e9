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
#include "fedrec/embedding.hpp"
#include "fedrec/plgc.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fedrec::eval {

struct EvalResult {
  double hr = 0.0;
  double ndcg = 0.0;
  /// Rank (1-based) of each user's held-out item among its candidates.
  std::vector<int> per_user_ranks;
};

/// Candidates ordered by descending score, ties by ascending item id.
std::vector<data::ItemId> rank_candidates(const UserVector& p, const Matrix& table,
                                          std::span<const data::ItemId> candidates);

/// 1-based position of `held_out` under the rank_candidates ordering, from
/// precomputed scores (held-out score first, then the negatives).
int held_out_rank(double held_out_score, data::ItemId held_out,
                  std::span<const double> negative_scores,
                  std::span<const data::ItemId> negatives);

double hit_ratio_at_k(std::span<const int> ranks, int k);

/// Single relevant item per user: 1 / log2(rank + 1) inside the cutoff.
double ndcg_at_k(std::span<const int> ranks, int k);

EvalResult summarize(std::vector<int> ranks, int k);

/// Rank of the held-out item when scoring against
/// lambda_c * local + lambda_g * global (only candidate rows are formed).
int evaluate_user(const UserVector& p, const Matrix& local, const Matrix& global,
                  const plgc::MixCoefficients& mix, data::ItemId held_out,
                  std::span<const data::ItemId> negatives);

struct IaRow {
  data::UserId user_id = 0;
  std::size_t interactions = 0;
  double log10_interactions = 0.0;
  double ia_local = 0.0;
  double ia_personalized = 0.0;
};

struct IaReport {
  double ia_global = 0.0;
  /// Ascending by interaction count, ties by user id.
  std::vector<IaRow> rows;
};

void sort_ia_rows(std::vector<IaRow>& rows);

/// `user_id,log10_interactions,ia_local,ia_personalized,ia_global`.
void write_ia_csv(const IaReport& report, std::ostream& out);

struct SpectrumRow {
  std::string table_role;  // "global", "local", "personalized"
  int user_id = -1;        // -1 for the global table
  std::vector<double> singular_values;
};

/// `table_role,user_id,dim_index,log10_sigma`; user_id left empty for global.
void write_spectrum_rows_csv(std::span<const SpectrumRow> rows, std::ostream& out);

}  // namespace fedrec::eval
