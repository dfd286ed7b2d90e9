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

#include "fedrec/plgc.hpp"

#include "fedrec/backbone.hpp"
#include "fedrec/kernels.hpp"

#include <cmath>
#include <random>

namespace fedrec::plgc {

ErrNetwork ErrNetwork::zeros(Index dim) {
  return ErrNetwork{Eigen::MatrixXd::Zero(dim, dim), Vector::Zero(dim),
                    Eigen::MatrixXd::Zero(dim, dim), Vector::Zero(dim)};
}

ErrNetwork ErrNetwork::identity(Index dim) {
  return ErrNetwork{Eigen::MatrixXd::Identity(dim, dim), Vector::Zero(dim),
                    Eigen::MatrixXd::Identity(dim, dim), Vector::Zero(dim)};
}

ErrNetwork ErrNetwork::random(Index dim, double scale, std::uint64_t seed) {
  ErrNetwork net = zeros(dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) net.projector_w(i, j) = normal(rng);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) net.predictor_w(i, j) = normal(rng);
  return net;
}

bool ErrNetwork::all_finite() const {
  return projector_w.allFinite() && projector_b.allFinite() && predictor_w.allFinite() &&
         predictor_b.allFinite();
}

void ErrNetwork::scale(double alpha) {
  projector_w *= alpha;
  projector_b *= alpha;
  predictor_w *= alpha;
  predictor_b *= alpha;
}

void ErrNetwork::add_scaled(const ErrNetwork& other, double alpha) {
  projector_w += alpha * other.projector_w;
  projector_b += alpha * other.projector_b;
  predictor_w += alpha * other.predictor_w;
  predictor_b += alpha * other.predictor_b;
}

void PLGCHyper::validate() const {
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (local_epochs < 0) throw ConfigError("local_epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
}

double gram_trace(const Matrix& table) { return kernels::serial::sum_squares(table); }

MixCoefficients mixing_coefficients(double trace_local, double trace_global) {
  if (!(trace_local >= 0.0) || !(trace_global >= 0.0))
    throw NumericError("mixing_coefficients: traces must be nonnegative");
  const double total = trace_local + trace_global;
  if (!(total > 0.0)) throw NumericError("mixing_coefficients: both traces are zero");
  const double lambda_c = trace_local / total;
  return {lambda_c, 1.0 - lambda_c};
}

EmbeddingTable mix_tables(const EmbeddingTable& local, const EmbeddingTable& global,
                          const MixCoefficients& mix) {
  if (!local.same_shape(global)) throw ShapeError("mix_tables: table shape mismatch");
  return EmbeddingTable(Matrix(mix.lambda_c * local.values() + mix.lambda_g * global.values()));
}

Projection project_batch_cached(const Eigen::Ref<const Matrix>& rows, const ErrNetwork& net) {
  if (rows.cols() != net.dim()) throw ShapeError("project_batch: row dim does not match network");
  Projection out;
  out.pre_activation = rows * net.projector_w;
  out.pre_activation.rowwise() += net.projector_b.transpose();
  out.hidden = out.pre_activation.cwiseMax(0.0);
  out.output = out.hidden * net.predictor_w;
  out.output.rowwise() += net.predictor_b.transpose();
  return out;
}

Matrix project_batch(const Eigen::Ref<const Matrix>& rows, const ErrNetwork& net) {
  return project_batch_cached(rows, net).output;
}

Eigen::MatrixXd correlation_matrix(const Eigen::Ref<const Matrix>& z_local,
                                   const Eigen::Ref<const Matrix>& z_global) {
  if (z_local.rows() != z_global.rows() || z_local.cols() != z_global.cols())
    throw ShapeError("correlation_matrix: shape mismatch");
  const Vector a = z_local.colwise().norm().transpose().array() + kNormEpsilon;
  const Vector b = z_global.colwise().norm().transpose().array() + kNormEpsilon;
  Eigen::MatrixXd h = z_local.transpose() * z_global;
  h.array().colwise() /= a.array();
  h.array().rowwise() /= b.transpose().array();
  return h;
}

double err_loss(const Eigen::Ref<const Eigen::MatrixXd>& h, double gamma) {
  const Index d = h.rows();
  double self = 0.0;
  double inter = 0.0;
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      if (i == j) {
        self += (1.0 - h(i, i)) * (1.0 - h(i, i));
      } else {
        inter += h(i, j) * h(i, j);
      }
    }
  }
  return (self + gamma * inter) / static_cast<double>(d);
}

namespace {

struct RedundancyTerm {
  double loss = 0.0;
  Matrix d_local_rows;
  ErrNetwork d_net;
};

/// Accumulates the network gradient for one branch and returns dL/dX.
Matrix backprop_network(const Eigen::Ref<const Matrix>& rows, const Projection& proj,
                        const Matrix& d_output, const ErrNetwork& net, ErrNetwork& grad) {
  grad.predictor_w.noalias() += proj.hidden.transpose() * d_output;
  grad.predictor_b += d_output.colwise().sum().transpose();
  Matrix d_hidden = d_output * net.predictor_w.transpose();
  d_hidden = (proj.pre_activation.array() > 0.0).select(d_hidden, 0.0);
  grad.projector_w.noalias() += rows.transpose() * d_hidden;
  grad.projector_b += d_hidden.colwise().sum().transpose();
  return d_hidden * net.projector_w.transpose();
}

RedundancyTerm redundancy_term(const Eigen::Ref<const Matrix>& local_rows,
                               const Eigen::Ref<const Matrix>& global_rows, const ErrNetwork& net,
                               double gamma) {
  const Index d = net.dim();
  const auto proj_c = project_batch_cached(local_rows, net);
  const auto proj_g = project_batch_cached(global_rows, net);
  const Matrix& zc = proj_c.output;
  const Matrix& zg = proj_g.output;

  const Vector norm_c = zc.colwise().norm().transpose();
  const Vector norm_g = zg.colwise().norm().transpose();
  const Vector a = norm_c.array() + kNormEpsilon;
  const Vector b = norm_g.array() + kNormEpsilon;
  const Eigen::MatrixXd h = correlation_matrix(zc, zg);

  RedundancyTerm term;
  term.loss = err_loss(h, gamma);

  // dL/dH
  const double inv_d = 1.0 / static_cast<double>(d);
  Eigen::MatrixXd dh = (2.0 * gamma * inv_d) * h;
  for (Index i = 0; i < d; ++i) dh(i, i) = -2.0 * (1.0 - h(i, i)) * inv_d;

  // H_ij = <zc_i, zg_j> / (a_i b_j), a_i = |zc_i| + eps.
  Eigen::MatrixXd scaled = dh;
  scaled.array().colwise() /= a.array();
  scaled.array().rowwise() /= b.transpose().array();
  const Vector dh_h_rows = (dh.array() * h.array()).rowwise().sum();
  const Vector dh_h_cols = (dh.array() * h.array()).colwise().sum().transpose();

  Matrix d_zc = zg * scaled.transpose();
  Matrix d_zg = zc * scaled;
  for (Index i = 0; i < d; ++i) {
    if (norm_c(i) > 0.0) d_zc.col(i) -= (dh_h_rows(i) / (a(i) * norm_c(i))) * zc.col(i);
    if (norm_g(i) > 0.0) d_zg.col(i) -= (dh_h_cols(i) / (b(i) * norm_g(i))) * zg.col(i);
  }

  term.d_net = ErrNetwork::zeros(d);
  term.d_local_rows = backprop_network(local_rows, proj_c, d_zc, net, term.d_net);
  // The global branch trains the network only; G stays frozen.
  backprop_network(global_rows, proj_g, d_zg, net, term.d_net);
  return term;
}

void check_batch(const UserVector& p, const BatchInput& batch, const ErrNetwork& net) {
  const Index d = p.size();
  if (batch.local_rows.cols() != d || batch.global_rows.cols() != d || net.dim() != d)
    throw ShapeError("plgc: dimension mismatch");
  if (batch.local_rows.rows() != batch.global_rows.rows() ||
      batch.local_rows.rows() != batch.labels.size())
    throw ShapeError("plgc: batch size mismatch");
  if (batch.labels.size() == 0) throw ShapeError("plgc: empty batch");
}

}  // namespace

PLGCGradients plgc_backward(const UserVector& p, const BatchInput& batch,
                            const MixCoefficients& mix, const ErrNetwork& net,
                            const PLGCHyper& hyper) {
  check_batch(p, batch, net);
  const Matrix q_rows = mix.lambda_c * batch.local_rows + mix.lambda_g * batch.global_rows;
  auto rec = backbone::bce_forward_backward(p, q_rows, batch.labels);

  PLGCGradients out;
  out.rec_loss = rec.loss;
  out.d_user = std::move(rec.d_user);
  out.d_local_rows = mix.lambda_c * rec.d_rows;
  out.err_active = hyper.beta > 0.0 && batch.local_rows.rows() >= 2;
  if (out.err_active) {
    auto term = redundancy_term(batch.local_rows, batch.global_rows, net, hyper.gamma);
    out.err_loss = term.loss;
    out.d_local_rows += hyper.beta * term.d_local_rows;
    out.d_net = std::move(term.d_net);
    out.d_net.scale(hyper.beta);
  } else {
    out.d_net = ErrNetwork::zeros(p.size());
  }
  out.loss = total_loss(out.rec_loss, out.err_loss, out.err_active ? hyper.beta : 0.0);
  return out;
}

double plgc_loss(const UserVector& p, const BatchInput& batch, const MixCoefficients& mix,
                 const ErrNetwork& net, const PLGCHyper& hyper) {
  check_batch(p, batch, net);
  const Matrix q_rows = mix.lambda_c * batch.local_rows + mix.lambda_g * batch.global_rows;
  const double rec = backbone::bce_forward_backward(p, q_rows, batch.labels).loss;
  if (!(hyper.beta > 0.0) || batch.local_rows.rows() < 2) return rec;
  const Matrix zc = project_batch(batch.local_rows, net);
  const Matrix zg = project_batch(batch.global_rows, net);
  return total_loss(rec, err_loss(correlation_matrix(zc, zg), hyper.gamma), hyper.beta);
}

}  // namespace fedrec::plgc
