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

#include "fedrec/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <vector>

namespace fedrec::kernels {

namespace {

void check_weighted_inputs(std::span<const Matrix* const> tables, std::span<const double> weights,
                           const Matrix& out) {
  if (tables.size() != weights.size()) throw ShapeError("weighted_sum: tables/weights size mismatch");
  for (const Matrix* t : tables) {
    if (t->rows() != out.rows() || t->cols() != out.cols())
      throw ShapeError("weighted_sum: table shape mismatch");
  }
}

}  // namespace

namespace serial {

double sum_squares(const Matrix& m) {
  double acc = 0.0;
  const double* data = m.data();
  const Index n = m.size();
  for (Index i = 0; i < n; ++i) acc += data[i] * data[i];
  return acc;
}

void weighted_sum(std::span<const Matrix* const> tables, std::span<const double> weights,
                  Matrix& out) {
  check_weighted_inputs(tables, weights, out);
  out.setZero();
  for (std::size_t k = 0; k < tables.size(); ++k) out.noalias() += weights[k] * (*tables[k]);
}

Eigen::MatrixXd column_gram(const Matrix& m) {
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m.cols(), m.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
  return gram.selfadjointView<Eigen::Lower>();
}

}  // namespace serial

namespace omp {

double sum_squares(const Matrix& m) {
  double acc = 0.0;
  const double* data = m.data();
  const Index n = m.size();
#pragma omp parallel for reduction(+ : acc) schedule(static)
  for (Index i = 0; i < n; ++i) acc += data[i] * data[i];
  return acc;
}

void weighted_sum(std::span<const Matrix* const> tables, std::span<const double> weights,
                  Matrix& out) {
  check_weighted_inputs(tables, weights, out);
  const Index rows = out.rows();
  constexpr Index kBlock = 64;
  const Index blocks = (rows + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index begin = b * kBlock;
    const Index len = std::min(kBlock, rows - begin);
    auto block = out.middleRows(begin, len);
    block.setZero();
    for (std::size_t k = 0; k < tables.size(); ++k)
      block.noalias() += weights[k] * tables[k]->middleRows(begin, len);
  }
}

Eigen::MatrixXd column_gram(const Matrix& m) {
  const Index d = m.cols();
  const Index rows = m.rows();
  constexpr Index kChunk = 256;
  const Index chunks = (rows + kChunk - 1) / kChunk;
  std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < chunks; ++c) {
    const Index begin = c * kChunk;
    const Index len = std::min(kChunk, rows - begin);
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(d, d);
    local.selfadjointView<Eigen::Lower>().rankUpdate(m.middleRows(begin, len).transpose());
    partial[static_cast<std::size_t>(c)] = std::move(local);
  }
  // Fixed-order reduction keeps the result independent of the thread count.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  for (const auto& p : partial) gram += p;
  return gram.selfadjointView<Eigen::Lower>();
}

}  // namespace omp

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace fedrec::kernels
