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

// Personalized local-global collaboration: trace-ratio mixing of the local
// and frozen global item tables, and the feature-wise redundancy-reduction
// loss computed between the two views of a batch.

#include "fedrec/common.hpp"
#include "fedrec/embedding.hpp"

#include <cstdint>

namespace fedrec::plgc {

/// Convex pair with lambda_c + lambda_g == 1.
struct MixCoefficients {
  double lambda_c = 1.0;
  double lambda_g = 0.0;

  static MixCoefficients local_only() { return {1.0, 0.0}; }
};

/// Projector (linear + ReLU) followed by a linear predictor, both d -> d.
/// Weights map row vectors: y = x W + b. Lives on the client only.
struct ErrNetwork {
  Eigen::MatrixXd projector_w;
  Vector projector_b;
  Eigen::MatrixXd predictor_w;
  Vector predictor_b;

  static ErrNetwork zeros(Index dim);
  static ErrNetwork identity(Index dim);
  /// Gaussian weights with standard deviation `scale`, zero biases.
  static ErrNetwork random(Index dim, double scale, std::uint64_t seed);

  Index dim() const noexcept { return projector_w.rows(); }
  bool all_finite() const;
  Index parameter_count() const { return 2 * dim() * dim() + 2 * dim(); }
  void scale(double alpha);
  /// axpy over every parameter: this += alpha * other.
  void add_scaled(const ErrNetwork& other, double alpha);
};

struct PLGCHyper {
  double beta = 0.5;
  double gamma = 0.01;
  int local_epochs = 10;
  int batch_size = 2048;
  double learning_rate = 100.0;
  double lr_decay = 0.98;

  void validate() const;
};

inline constexpr double kNormEpsilon = 1e-8;

/// Squared Frobenius norm, i.e. tr(E E^T) = tr(E^T E).
double gram_trace(const Matrix& table);
inline double gram_trace(const EmbeddingTable& table) { return gram_trace(table.values()); }

MixCoefficients mixing_coefficients(double trace_local, double trace_global);

EmbeddingTable mix_tables(const EmbeddingTable& local, const EmbeddingTable& global,
                          const MixCoefficients& mix);

/// Intermediate activations kept for the backward pass.
struct Projection {
  Matrix pre_activation;  // X W1 + b1
  Matrix hidden;          // relu(pre_activation)
  Matrix output;          // hidden W2 + b2
};

Projection project_batch_cached(const Eigen::Ref<const Matrix>& rows, const ErrNetwork& net);

/// Z = predictor(relu(projector(rows))). Throws ShapeError on a dim mismatch;
/// callers skip the redundancy term for batches with fewer than 2 rows.
Matrix project_batch(const Eigen::Ref<const Matrix>& rows, const ErrNetwork& net);

/// H_ij = cos(Zc[:, i], Zg[:, j]) with kNormEpsilon added to each column norm.
Eigen::MatrixXd correlation_matrix(const Eigen::Ref<const Matrix>& z_local,
                                   const Eigen::Ref<const Matrix>& z_global);

double err_loss(const Eigen::Ref<const Eigen::MatrixXd>& h, double gamma);

inline double total_loss(double rec, double err, double beta) { return rec + beta * err; }

struct BatchInput {
  Eigen::Ref<const Matrix> local_rows;   // B x d, gathered from C
  Eigen::Ref<const Matrix> global_rows;  // B x d, gathered from the frozen G
  Eigen::Ref<const Vector> labels;       // B
};

struct PLGCGradients {
  Vector d_user;
  Matrix d_local_rows;  // B x d, one row per batch sample
  ErrNetwork d_net;
  double rec_loss = 0.0;
  double err_loss = 0.0;
  double loss = 0.0;
  bool err_active = false;
};

/// Loss L = BCE(p, lambda_c C_b + lambda_g G_b) + beta * L_eRR(C_b, G_b).
/// Mixing coefficients are constants, G receives no gradient, and the
/// global branch of the redundancy term only reaches the network.
PLGCGradients plgc_backward(const UserVector& p, const BatchInput& batch,
                            const MixCoefficients& mix, const ErrNetwork& net,
                            const PLGCHyper& hyper);

/// Forward-only value of the same objective.
double plgc_loss(const UserVector& p, const BatchInput& batch, const MixCoefficients& mix,
                 const ErrNetwork& net, const PLGCHyper& hyper);

}  // namespace fedrec::plgc
