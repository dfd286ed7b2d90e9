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

#include "fedrec/backbone.hpp"
#include "test_support.hpp"

#include <vector>

using namespace fedrec;
using namespace fedrec::backbone;

namespace {

double batch_loss(const Vector& p, const Matrix& rows, const Vector& labels) {
  std::vector<Prediction> preds;
  for (Index b = 0; b < rows.rows(); ++b)
    preds.push_back({score(p, rows.row(b)), labels(b), static_cast<data::ItemId>(b)});
  return bce_loss(preds);
}

}  // namespace

TEST_CASE("score") {
  Vector p(2);
  p << 1.0, 0.0;
  RowVector q(2);
  q << 0.0, 3.0;
  CHECK(score(p, q) == 0.5);
  CHECK(score(Vector::Ones(4), RowVector::Ones(4)) == doctest::Approx(0.9820).epsilon(1e-4));
  CHECK(score(Vector::Zero(3), RowVector::Constant(3, 7.0)) == 0.5);
  CHECK_THROWS_AS(score(Vector::Ones(3), RowVector::Ones(4)), ShapeError);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const Vector a = testing::random_vector(8, rng, 3.0);
    const RowVector b = testing::random_vector(8, rng, 3.0).transpose();
    CHECK(std::abs(score(a, b) + score(a, -b) - 1.0) < 1e-12);
  }
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  CHECK(sigmoid(-1.0) < sigmoid(-0.5));
}

TEST_CASE("binary cross-entropy") {
  CHECK(bce_loss(std::vector<Prediction>{{0.5, 1.0, 0}}) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(bce_loss(std::vector<Prediction>{{1.0, 1.0, 0}, {0.0, 0.0, 1}}) < 1e-10);
  CHECK(bce_loss(std::vector<Prediction>{{0.9, 1.0, 0}, {0.1, 0.0, 1}}) ==
        doctest::Approx(0.1054).epsilon(1e-3));
  CHECK_THROWS(bce_loss(std::vector<Prediction>{}));
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(2);
  const double h = 1e-5;
  SUBCASE("single sample, d = 2") {
    const Vector p = testing::random_vector(2, rng);
    const Matrix rows = testing::random_matrix(1, 2, rng);
    const Vector labels = Vector::Ones(1);
    const auto g = bce_forward_backward(p, rows, labels);
    for (Index k = 0; k < 2; ++k) {
      Vector up = p, down = p;
      up(k) += h;
      down(k) -= h;
      const double fd = (batch_loss(up, rows, labels) - batch_loss(down, rows, labels)) / (2 * h);
      CHECK(testing::relative_error(g.d_user(k), fd) < 1e-6);
      Matrix r_up = rows, r_down = rows;
      r_up(0, k) += h;
      r_down(0, k) -= h;
      const double fd_q = (batch_loss(p, r_up, labels) - batch_loss(p, r_down, labels)) / (2 * h);
      CHECK(testing::relative_error(g.d_rows(0, k), fd_q) < 1e-6);
    }
  }
  SUBCASE("100 random instances, d = 8, batch = 16") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Vector p = testing::random_vector(8, rng);
      const Matrix rows = testing::random_matrix(16, 8, rng);
      Vector labels(16);
      for (Index b = 0; b < 16; ++b) labels(b) = b % 3 == 0 ? 1.0 : 0.0;
      std::vector<data::ItemId> items(16);
      for (int b = 0; b < 16; ++b) items[static_cast<std::size_t>(b)] = b;
      const auto g = bce_gradients(p, items, rows, labels);
      for (Index k = 0; k < 8; ++k) {
        Vector up = p, down = p;
        up(k) += h;
        down(k) -= h;
        const double fd = (batch_loss(up, rows, labels) - batch_loss(down, rows, labels)) / (2 * h);
        worst = std::max(worst, testing::relative_error(g.d_user(k), fd, 1e-6));
      }
      for (Index b = 0; b < 16; ++b) {
        for (Index k = 0; k < 8; ++k) {
          Matrix up = rows, down = rows;
          up(b, k) += h;
          down(b, k) -= h;
          const double fd = (batch_loss(p, up, labels) - batch_loss(p, down, labels)) / (2 * h);
          worst = std::max(worst, testing::relative_error(
                                     g.d_items.at(static_cast<data::ItemId>(b))(k), fd, 1e-6));
        }
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("gradient structure") {
  std::mt19937_64 rng(3);
  const Vector p = testing::random_vector(4, rng);
  const Matrix rows = testing::random_matrix(5, 4, rng);
  Vector labels(5);
  labels << 1, 0, 0, 1, 0;

  SUBCASE("duplicating the batch leaves gradients unchanged") {
    Matrix twice(10, 4);
    twice << rows, rows;
    Vector labels2(10);
    labels2 << labels, labels;
    const auto one = bce_forward_backward(p, rows, labels);
    const auto two = bce_forward_backward(p, twice, labels2);
    CHECK((one.d_user - two.d_user).norm() < 1e-14);
    CHECK((2.0 * two.d_rows.topRows(5) - one.d_rows).norm() < 1e-14);
    CHECK(one.loss == doctest::Approx(two.loss));
  }
  SUBCASE("labels equal to scores give zero gradient") {
    const auto g0 = bce_forward_backward(p, rows, labels);
    const auto g = bce_forward_backward(p, rows, g0.scores);
    CHECK(g.d_user.norm() < 1e-15);
    CHECK(g.d_rows.norm() < 1e-15);
  }
  SUBCASE("repeated item ids accumulate") {
    std::vector<data::ItemId> items{4, 4, 1, 1, 4};
    const auto sparse = bce_gradients(p, items, rows, labels);
    const auto dense = bce_forward_backward(p, rows, labels);
    CHECK(sparse.d_items.size() == 2);
    const Vector expected = (dense.d_rows.row(0) + dense.d_rows.row(1) + dense.d_rows.row(4)).transpose();
    CHECK((sparse.d_items.at(4) - expected).norm() < 1e-15);
  }
  SUBCASE("a small step decreases the loss") {
    for (int trial = 0; trial < 20; ++trial) {
      const Vector pp = testing::random_vector(6, rng);
      const Matrix rr = testing::random_matrix(12, 6, rng);
      Vector ll(12);
      for (Index b = 0; b < 12; ++b) ll(b) = b % 2;
      const auto g = bce_forward_backward(pp, rr, ll);
      const Vector p2 = pp - 1e-3 * g.d_user;
      const Matrix r2 = rr - 1e-3 * g.d_rows;
      CHECK(bce_forward_backward(p2, r2, ll).loss < g.loss);
    }
  }
}
