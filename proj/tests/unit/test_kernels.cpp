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

#include "doctest.h"

#include "fedrec/kernels.hpp"
#include "test_support.hpp"

#include <vector>

using namespace fedrec;

namespace {

Eigen::MatrixXd naive_gram(const Matrix& m) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m.cols(), m.cols());
  for (Index i = 0; i < m.cols(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      for (Index r = 0; r < m.rows(); ++r) g(i, j) += m(r, i) * m(r, j);
  return g;
}

}  // namespace

TEST_CASE("sum of squares matches a plain loop") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = testing::random_matrix(1 + trial * 37, 1 + trial % 9, rng);
    double expected = 0.0;
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) expected += m(i, j) * m(i, j);
    CHECK(kernels::serial::sum_squares(m) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(kernels::omp::sum_squares(m) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("column Gram kernels agree with the triple loop") {
  std::mt19937_64 rng(2);
  for (Index rows : {1, 3, 255, 256, 257, 1000}) {
    const Matrix m = testing::random_matrix(rows, 7, rng);
    const Eigen::MatrixXd expected = naive_gram(m);
    CHECK((kernels::serial::column_gram(m) - expected).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((kernels::omp::column_gram(m) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("parallel weighted sum is bitwise equal to the serial one") {
  std::mt19937_64 rng(3);
  std::vector<Matrix> tables;
  std::vector<const Matrix*> ptrs;
  std::vector<double> weights;
  for (int k = 0; k < 13; ++k) tables.push_back(testing::random_matrix(300, 8, rng));
  for (int k = 0; k < 13; ++k) {
    ptrs.push_back(&tables[static_cast<std::size_t>(k)]);
    weights.push_back(1.0 / (k + 2.0));
  }
  Matrix serial(300, 8);
  Matrix parallel(300, 8);
  kernels::serial::weighted_sum(ptrs, weights, serial);
  kernels::omp::weighted_sum(ptrs, weights, parallel);
  CHECK(serial == parallel);

  Matrix expected = Matrix::Zero(300, 8);
  for (int k = 0; k < 13; ++k) expected += weights[static_cast<std::size_t>(k)] * tables[static_cast<std::size_t>(k)];
  CHECK((serial - expected).cwiseAbs().maxCoeff() < 1e-12);

  Matrix wrong(2, 2);
  CHECK_THROWS_AS(kernels::serial::weighted_sum(ptrs, weights, wrong), ShapeError);
  weights.pop_back();
  CHECK_THROWS_AS(kernels::omp::weighted_sum(ptrs, weights, parallel), ShapeError);
}
