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

#include "fedrec/embedding.hpp"

#include "fedrec/kernels.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace fedrec {

EmbeddingTable::EmbeddingTable(Index rows, Index dim) : values_(Matrix::Zero(rows, dim)) {
  if (rows < 1 || dim < 1) throw ShapeError("embedding table needs rows >= 1 and dim >= 1");
}

EmbeddingTable::EmbeddingTable(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1)
    throw ShapeError("embedding table needs rows >= 1 and dim >= 1");
  if (!values_.allFinite()) throw NumericError("embedding table has non-finite entries");
}

void EmbeddingTable::assign(const EmbeddingTable& other) {
  if (!same_shape(other)) throw ShapeError("assign: table shape mismatch");
  values_ = other.values_;
}

EmbeddingTable init_table(Index rows, Index dim, double scale, std::uint64_t seed) {
  if (!(scale > 0.0)) throw ShapeError("init_table: scale must be positive");
  EmbeddingTable table(rows, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  auto values = table.values_mut();
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < dim; ++c) values(r, c) = normal(rng);
  return table;
}

namespace {

/// sqrt of the eigenvalues of the smaller Gram matrix, descending. Cheap,
/// but values below ~1e-8 * sigma_max are lost to rounding.
std::vector<double> gram_singular_values(const Matrix& table) {
  Eigen::MatrixXd gram;
  if (table.rows() >= table.cols()) {
    gram = kernels::serial::column_gram(table);
  } else {
    gram = table * table.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("eigen-decomposition failed");
  const auto& eig = solver.eigenvalues();  // ascending
  // Eigenvalues below the rounding floor of the largest one are treated as zero.
  const double floor = eig.size() > 0 ? eig(eig.size() - 1) * static_cast<double>(gram.rows()) *
                                            std::numeric_limits<double>::epsilon()
                                      : 0.0;
  std::vector<double> sigma;
  sigma.reserve(static_cast<std::size_t>(eig.size()));
  for (Index i = eig.size() - 1; i >= 0; --i)
    sigma.push_back(eig(i) > floor ? std::sqrt(eig(i)) : 0.0);
  return sigma;
}

double abundance(const std::vector<double>& sigma) {
  if (sigma.empty() || !(sigma.front() > 0.0))
    throw NumericError("information abundance is undefined for an all-zero table");
  double sum = 0.0;
  for (double s : sigma) sum += s;
  return sum / sigma.front();
}

}  // namespace

std::vector<double> singular_values(const Matrix& table) {
  if (table.size() == 0) return {};
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(table);
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

double information_abundance(const Matrix& table) { return abundance(gram_singular_values(table)); }

SpectrumReport singular_spectrum(const Matrix& table) {
  SpectrumReport report;
  report.singular_values = singular_values(table);
  report.information_abundance = abundance(report.singular_values);
  return report;
}

void write_spectrum_csv(const SpectrumReport& report, std::ostream& out) {
  out << "dim_index,singular_value,log10_singular_value\n";
  out << std::setprecision(10);
  for (std::size_t i = 0; i < report.singular_values.size(); ++i) {
    const double s = report.singular_values[i];
    out << i << ',' << s << ',' << std::log10(s) << '\n';
  }
}

void write_table_tsv(const Matrix& table, std::ostream& out) {
  out << std::setprecision(17);
  for (Index r = 0; r < table.rows(); ++r) {
    for (Index c = 0; c < table.cols(); ++c) {
      if (c) out << '\t';
      out << table(r, c);
    }
    out << '\n';
  }
}

Matrix read_table_tsv(std::istream& in) {
  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string field;
    Index count = 0;
    while (std::getline(fields, field, '\t')) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size())
        throw ParseError(static_cast<std::size_t>(rows + 1), "bad table entry '" + field + "'");
      values.push_back(v);
      ++count;
    }
    if (cols < 0) cols = count;
    if (count != cols) throw ParseError(static_cast<std::size_t>(rows + 1), "ragged table row");
    ++rows;
  }
  if (rows == 0) throw EmptyDatasetError("empty table file");
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

void export_table(const Matrix& table, const std::filesystem::path& stem, const std::string& role,
                  int round) {
  std::ofstream tsv(stem.string() + ".tsv");
  if (!tsv) throw Error("cannot write " + stem.string() + ".tsv");
  write_table_tsv(table, tsv);
  nlohmann::json sidecar{{"M", table.rows()}, {"d", table.cols()}, {"role", role}, {"round", round}};
  std::ofstream json(stem.string() + ".json");
  if (!json) throw Error("cannot write " + stem.string() + ".json");
  json << sidecar.dump(2) << '\n';
}

}  // namespace fedrec
