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

#include "fedrec/embedding.hpp"
#include "fedrec/plgc.hpp"
#include "plgc_oracle.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <numeric>

using namespace fedrec;
using namespace fedrec::plgc;
using fedrec::testing::Instance;
using fedrec::testing::backward;
using fedrec::testing::naive_correlation;
using fedrec::testing::naive_err;
using fedrec::testing::naive_loss;
using fedrec::testing::naive_project;
using fedrec::testing::random_instance;

namespace {

double off_diagonal_ssq(const Eigen::MatrixXd& h) {
  return h.squaredNorm() - h.diagonal().squaredNorm();
}

}  // namespace

TEST_CASE("gram trace") {
  CHECK(gram_trace(Matrix(Matrix::Identity(2, 2))) == 2.0);
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  CHECK(gram_trace(m) == 30.0);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix e = testing::random_matrix(50, 8, rng);
    const Eigen::MatrixXd full = e * e.transpose();
    CHECK(std::abs(gram_trace(e) - full.trace()) < 1e-10 * full.trace());
    double s2 = 0.0;
    for (double s : singular_values(e)) s2 += s * s;
    CHECK(testing::relative_error(gram_trace(e), s2) < 1e-8);
  }
}

TEST_CASE("mixing coefficients") {
  CHECK(mixing_coefficients(3.0, 3.0).lambda_c == 0.5);
  const auto pure_global = mixing_coefficients(0.0, 5.0);
  CHECK(pure_global.lambda_c == 0.0);
  CHECK(pure_global.lambda_g == 1.0);
  const auto m = mixing_coefficients(30.0, 10.0);
  CHECK(m.lambda_c == 0.75);
  CHECK(m.lambda_g == 0.25);
  CHECK_THROWS_AS(mixing_coefficients(0.0, 0.0), NumericError);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> trace(0.0, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double tl = trace(rng), tg = trace(rng) + 1e-6;
    const auto a = mixing_coefficients(tl, tg);
    const auto b = mixing_coefficients(tl + 1.0, tg);
    CHECK(a.lambda_c + a.lambda_g == 1.0);
    CHECK(a.lambda_c >= 0.0);
    CHECK(a.lambda_g >= 0.0);
    CHECK(b.lambda_c > a.lambda_c);
  }
}

TEST_CASE("mixed table") {
  const EmbeddingTable c(Matrix::Constant(1, 1, 4.0));
  const EmbeddingTable g(Matrix::Constant(1, 1, 0.0));
  CHECK(mix_tables(c, g, {0.75, 0.25}).values()(0, 0) == 3.0);
  CHECK(mix_tables(c, g, MixCoefficients::local_only()) == c);
  CHECK(mix_tables(c, c, {0.5, 0.5}) == c);
  CHECK_THROWS_AS(mix_tables(c, EmbeddingTable(2, 1), {0.5, 0.5}), ShapeError);

  std::mt19937_64 rng(3);
  const EmbeddingTable a(testing::random_matrix(20, 5, rng));
  const EmbeddingTable b(testing::random_matrix(20, 5, rng));
  const auto q = mix_tables(a, b, mixing_coefficients(2.0, 5.0));
  const Matrix lo = a.values().cwiseMin(b.values());
  const Matrix hi = a.values().cwiseMax(b.values());
  CHECK(((q.values() - lo).array() >= -1e-15).all());
  CHECK(((hi - q.values()).array() >= -1e-15).all());
}

TEST_CASE("projection network") {
  std::mt19937_64 rng(4);
  const Matrix nonneg = testing::random_matrix(6, 3, rng).cwiseAbs();
  CHECK((project_batch(nonneg, ErrNetwork::identity(3)) - nonneg).norm() < 1e-15);

  ErrNetwork net = ErrNetwork::random(3, 0.1, 7);
  net.predictor_b << 1.0, -2.0, 0.5;
  const Matrix z = project_batch(Matrix::Zero(4, 3), net);
  for (Index r = 0; r < 4; ++r) CHECK((z.row(r).transpose() - net.predictor_b).norm() < 1e-15);

  const Matrix x = testing::random_matrix(9, 3, rng);
  const Matrix out = project_batch(x, net);
  CHECK(out.rows() == 9);
  CHECK(out.allFinite());
  CHECK((out - naive_project(x, net)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(project_batch(testing::random_matrix(4, 5, rng), net), ShapeError);
}

TEST_CASE("correlation matrix") {
  Matrix z = Matrix::Zero(4, 3);
  z(0, 0) = 2.0;
  z(1, 1) = -1.0;
  z(2, 2) = 0.5;
  z(3, 2) = 0.5;
  Matrix expected = Matrix::Zero(3, 3);
  for (Index j = 0; j < 3; ++j) {
    const double n = z.col(j).norm();
    expected(j, j) = n * n / ((n + 1e-8) * (n + 1e-8));
  }
  CHECK((correlation_matrix(z, z) - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((correlation_matrix(z, -z) + expected).cwiseAbs().maxCoeff() < 1e-14);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = testing::random_matrix(16, 4, rng);
    const Matrix b = testing::random_matrix(16, 4, rng);
    const auto h = correlation_matrix(a, b);
    CHECK((h - naive_correlation(a, b)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(h.cwiseAbs().maxCoeff() <= 1.0);
  }
  const auto zero = correlation_matrix(Matrix::Zero(3, 2), Matrix::Zero(3, 2));
  CHECK(zero.allFinite());
  CHECK_THROWS_AS(correlation_matrix(Matrix::Zero(3, 2), Matrix::Zero(4, 2)), ShapeError);
}

TEST_CASE("redundancy loss") {
  for (Index d : {2, 8, 32}) CHECK(err_loss(Eigen::MatrixXd::Identity(d, d), 0.3) == 0.0);
  CHECK(err_loss(Eigen::MatrixXd::Zero(4, 4), 0.01) == doctest::Approx(1.0));
  Eigen::MatrixXd h(2, 2);
  h << 1, 0.5, 0.5, 1;
  CHECK(err_loss(h, 0.01) == doctest::Approx(0.0025));
  CHECK(total_loss(0.5, 1.0, 0.3) == doctest::Approx(0.8));
  CHECK(total_loss(0.5, 1.0, 0.0) == 0.5);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index d = 1 + trial % 10;
    Eigen::MatrixXd r(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) r(i, j) = entry(rng);
    const double loss = err_loss(r, 0.05);
    CHECK(loss >= 0.0);
    CHECK(loss == doctest::Approx(naive_err(r, 0.05)).epsilon(1e-12));
  }

  SUBCASE("shared column permutation leaves the loss unchanged") {
    const Matrix a = testing::random_matrix(12, 5, rng);
    const Matrix b = testing::random_matrix(12, 5, rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 3, 0, 4, 1, 2;
    const Matrix pa = a * perm;
    const Matrix pb = b * perm;
    CHECK(err_loss(correlation_matrix(pa, pb), 0.1) ==
          doctest::Approx(err_loss(correlation_matrix(a, b), 0.1)).epsilon(1e-12));
  }
}

TEST_CASE("backward pass matches central differences on every parameter") {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Instance in = random_instance(rng);
    CHECK(backward(in).loss == doctest::Approx(naive_loss(in)).epsilon(1e-10));
    worst = std::max(worst, testing::worst_gradient_error(in));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("backward pass conventions") {
  std::mt19937_64 rng(8);
  Instance in = random_instance(rng);

  SUBCASE("no local weight and no redundancy loss: C gets nothing") {
    in.mix = {0.0, 1.0};
    in.hyper.beta = 0.0;
    const auto g = backward(in);
    CHECK(g.d_local_rows.norm() == 0.0);
    CHECK_FALSE(g.err_active);
  }
  SUBCASE("no redundancy loss: network gradient is zero") {
    in.hyper.beta = 0.0;
    const auto g = backward(in);
    CHECK(g.d_net.projector_w.norm() == 0.0);
    CHECK(g.d_net.predictor_b.norm() == 0.0);
    CHECK(g.loss == g.rec_loss);
  }
  SUBCASE("recommendation gradient on C is scaled by the local weight") {
    in.hyper.beta = 0.0;
    Instance full = in;
    full.mix = {1.0, 0.0};
    full.local = in.mix.lambda_c * in.local + in.mix.lambda_g * in.global;
    const auto scaled = backward(in);
    const auto unscaled = backward(full);
    CHECK((scaled.d_local_rows - in.mix.lambda_c * unscaled.d_local_rows).norm() < 1e-14);
  }
  SUBCASE("a single-row batch skips the redundancy term") {
    const Instance one{in.p, in.local.topRows(1), in.global.topRows(1), in.labels.head(1),
                       in.mix, in.net, in.hyper};
    const auto g = backward(one);
    CHECK_FALSE(g.err_active);
    CHECK(g.err_loss == 0.0);
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(plgc_backward(in.p, BatchInput{in.local, in.global.topRows(3), in.labels},
                                  in.mix, in.net, in.hyper),
                    ShapeError);
  }
}

TEST_CASE("one redundancy step reduces off-diagonal correlation from a collapsed start") {
  double before = 0.0;
  double after = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const Index d = 8, b = 32;
    const Vector direction = testing::random_vector(d, rng);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    Matrix local(b, d);
    for (Index r = 0; r < b; ++r) local.row(r) = scale(rng) * direction.transpose();
    const Matrix global = local;
    ErrNetwork net = ErrNetwork::random(d, 0.1, 200 + seed);
    PLGCHyper hyper;
    hyper.beta = 1.0;
    const Vector p = Vector::Zero(d);
    const Vector labels = Vector::Zero(b);

    const auto h0 = correlation_matrix(project_batch(local, net), project_batch(global, net));
    before += off_diagonal_ssq(h0);
    const auto g = plgc_backward(p, BatchInput{local, global, labels}, {1.0, 0.0}, net, hyper);
    const Matrix stepped = local - 1e-2 * g.d_local_rows;
    net.add_scaled(g.d_net, -1e-2);
    after += off_diagonal_ssq(correlation_matrix(project_batch(stepped, net), project_batch(global, net)));
  }
  CHECK(after < before);
}
