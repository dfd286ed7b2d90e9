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
#include <string>
#include <vector>

namespace fedrec {

/// M x d item embedding table; row m is item m's vector. The shape is fixed
/// at construction.
class EmbeddingTable {
 public:
  EmbeddingTable(Index rows, Index dim);
  explicit EmbeddingTable(Matrix values);

  Index rows() const noexcept { return values_.rows(); }
  Index dim() const noexcept { return values_.cols(); }

  const Matrix& values() const noexcept { return values_; }
  /// Mutable access to entries; the shape cannot be changed through it.
  Eigen::Map<Matrix> values_mut() noexcept {
    return Eigen::Map<Matrix>(values_.data(), values_.rows(), values_.cols());
  }

  auto row(Index m) const { return values_.row(m); }
  auto row(Index m) { return values_.row(m); }

  bool same_shape(const EmbeddingTable& other) const noexcept {
    return rows() == other.rows() && dim() == other.dim();
  }
  bool all_finite() const { return values_.allFinite(); }

  /// Overwrite entries with another table of the same shape.
  void assign(const EmbeddingTable& other);

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.same_shape(b) && a.values_ == b.values_;
  }

 private:
  Matrix values_;
};

/// Private user representation; never part of any server-bound message.
using UserVector = Vector;

/// Entries i.i.d. N(0, scale^2), deterministic in `seed`.
EmbeddingTable init_table(Index rows, Index dim, double scale, std::uint64_t seed);

struct SpectrumReport {
  std::vector<double> singular_values;  // descending, length min(M, d)
  double information_abundance = 0.0;
};

/// Singular values, descending, from a QR-preconditioned Jacobi SVD so that
/// small values of a collapsed table keep their relative accuracy.
std::vector<double> singular_values(const Matrix& table);

/// Sum of singular values over the largest one, from the eigenvalues of the
/// smaller Gram matrix. Throws NumericError for an all-zero table.
double information_abundance(const Matrix& table);
inline double information_abundance(const EmbeddingTable& table) {
  return information_abundance(table.values());
}

SpectrumReport singular_spectrum(const Matrix& table);
inline SpectrumReport singular_spectrum(const EmbeddingTable& table) {
  return singular_spectrum(table.values());
}

/// CSV `dim_index,singular_value,log10_singular_value`.
void write_spectrum_csv(const SpectrumReport& report, std::ostream& out);

/// One row per item, tab-separated, round-trip precision.
void write_table_tsv(const Matrix& table, std::ostream& out);
Matrix read_table_tsv(std::istream& in);

/// Writes `<stem>.tsv` plus the `<stem>.json` sidecar {M, d, role, round}.
/// `role` is "global", "local:<n>" or "personalized:<n>".
void export_table(const Matrix& table, const std::filesystem::path& stem, const std::string& role,
                  int round);

}  // namespace fedrec
