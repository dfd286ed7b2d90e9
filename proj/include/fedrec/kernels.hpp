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

// Data-parallel building blocks. Each kernel has a plain serial version that
// the tests treat as the reference and an OpenMP version used on the hot path.
// Both produce the same result up to floating-point reassociation.

#include "fedrec/common.hpp"

#include <span>

namespace fedrec::kernels {

namespace serial {

/// Sum of squared entries.
double sum_squares(const Matrix& m);

/// out = sum_k weights[k] * tables[k], accumulated in index order.
void weighted_sum(std::span<const Matrix* const> tables, std::span<const double> weights,
                  Matrix& out);

/// Column Gram matrix m^T m (d x d).
Eigen::MatrixXd column_gram(const Matrix& m);

}  // namespace serial

namespace omp {

double sum_squares(const Matrix& m);

/// Parallel over rows; each row is accumulated in table order, so the result
/// is bitwise identical to the serial kernel for any thread count.
void weighted_sum(std::span<const Matrix* const> tables, std::span<const double> weights,
                  Matrix& out);

Eigen::MatrixXd column_gram(const Matrix& m);

}  // namespace omp

int max_threads();

}  // namespace fedrec::kernels
