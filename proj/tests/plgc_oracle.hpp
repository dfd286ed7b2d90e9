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

// Loop-level reference for the PLGC objective, written independently of the
// library, and a central-difference gradient check built on it.

#include "fedrec/plgc.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace fedrec::testing {

using plgc::BatchInput;
using plgc::ErrNetwork;
using plgc::MixCoefficients;
using plgc::PLGCGradients;
using plgc::PLGCHyper;

struct Instance {
  Vector p;
  Matrix local;
  Matrix global;
  Vector labels;
  MixCoefficients mix;
  ErrNetwork net;
  PLGCHyper hyper;
};

inline Instance random_instance(std::mt19937_64& rng, Index d = 4, Index b = 8) {
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  Instance in;
  in.p = testing::random_vector(d, rng);
  in.local = testing::random_matrix(b, d, rng);
  in.global = testing::random_matrix(b, d, rng);
  in.labels = Vector(b);
  for (Index i = 0; i < b; ++i) in.labels(i) = i % 3 == 0 ? 1.0 : 0.0;
  in.mix = plgc::mixing_coefficients(unit(rng), unit(rng));
  in.net = ErrNetwork::random(d, 0.5, rng());
  in.net.projector_b = testing::random_vector(d, rng, 0.3);
  in.net.predictor_b = testing::random_vector(d, rng, 0.3);
  in.hyper.beta = unit(rng);
  in.hyper.gamma = unit(rng) * 0.2;
  return in;
}

// Loop-level forward pass written independently of the library.
inline Matrix naive_project(const Matrix& x, const ErrNetwork& net) {
  const Index d = net.dim();
  Matrix z(x.rows(), d);
  for (Index r = 0; r < x.rows(); ++r) {
    std::vector<double> hidden(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) {
      double s = net.projector_b(j);
      for (Index k = 0; k < d; ++k) s += x(r, k) * net.projector_w(k, j);
      hidden[static_cast<std::size_t>(j)] = std::max(0.0, s);
    }
    for (Index j = 0; j < d; ++j) {
      double s = net.predictor_b(j);
      for (Index k = 0; k < d; ++k) s += hidden[static_cast<std::size_t>(k)] * net.predictor_w(k, j);
      z(r, j) = s;
    }
  }
  return z;
}

inline Eigen::MatrixXd naive_correlation(const Matrix& zc, const Matrix& zg) {
  const Index d = zc.cols();
  Eigen::MatrixXd h(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      double dot = 0.0, nc = 0.0, ng = 0.0;
      for (Index r = 0; r < zc.rows(); ++r) {
        dot += zc(r, i) * zg(r, j);
        nc += zc(r, i) * zc(r, i);
        ng += zg(r, j) * zg(r, j);
      }
      h(i, j) = dot / ((std::sqrt(nc) + 1e-8) * (std::sqrt(ng) + 1e-8));
    }
  }
  return h;
}

inline double naive_err(const Eigen::MatrixXd& h, double gamma) {
  const Index d = h.rows();
  double total = 0.0;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      total += i == j ? (1 - h(i, i)) * (1 - h(i, i)) : gamma * h(i, j) * h(i, j);
  return total / static_cast<double>(d);
}

inline double naive_loss(const Instance& in) {
  double rec = 0.0;
  const Index b = in.local.rows();
  for (Index r = 0; r < b; ++r) {
    double x = 0.0;
    for (Index k = 0; k < in.p.size(); ++k)
      x += in.p(k) * (in.mix.lambda_c * in.local(r, k) + in.mix.lambda_g * in.global(r, k));
    const double s = 1.0 / (1.0 + std::exp(-x));
    rec -= in.labels(r) * std::log(s) + (1 - in.labels(r)) * std::log(1 - s);
  }
  rec /= static_cast<double>(b);
  if (b < 2) return rec;
  const auto h = naive_correlation(naive_project(in.local, in.net), naive_project(in.global, in.net));
  return rec + in.hyper.beta * naive_err(h, in.hyper.gamma);
}

template <typename Get>
double central_difference(Instance in, Get&& entry, double h = 1e-5) {
  double& x = entry(in);
  const double saved = x;
  x = saved + h;
  const double up = naive_loss(in);
  x = saved - h;
  const double down = naive_loss(in);
  x = saved;
  return (up - down) / (2 * h);
}

inline PLGCGradients backward(const Instance& in) {
  return plgc::plgc_backward(in.p, BatchInput{in.local, in.global, in.labels}, in.mix, in.net,
                             in.hyper);
}

/// Largest relative error between the analytic gradient and central
/// differences over p, the batch rows of C and both network layers.
inline double worst_gradient_error(const Instance& in) {
  const auto g = backward(in);
  const Index d = in.p.size();
  double worst = 0.0;
  const auto track = [&](double analytic, double numeric) {
    worst = std::max(worst, relative_error(analytic, numeric, 1e-6));
  };
  for (Index k = 0; k < d; ++k)
    track(g.d_user(k), central_difference(in, [k](Instance& x) -> double& { return x.p(k); }));
  for (Index r = 0; r < in.local.rows(); ++r)
    for (Index k = 0; k < d; ++k)
      track(g.d_local_rows(r, k),
            central_difference(in, [r, k](Instance& x) -> double& { return x.local(r, k); }));
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      track(g.d_net.projector_w(i, j),
            central_difference(in, [i, j](Instance& x) -> double& { return x.net.projector_w(i, j); }));
      track(g.d_net.predictor_w(i, j),
            central_difference(in, [i, j](Instance& x) -> double& { return x.net.predictor_w(i, j); }));
    }
    track(g.d_net.projector_b(i),
          central_difference(in, [i](Instance& x) -> double& { return x.net.projector_b(i); }));
    track(g.d_net.predictor_b(i),
          central_difference(in, [i](Instance& x) -> double& { return x.net.predictor_b(i); }));
  }
  return worst;
}

}  // namespace fedrec::testing
