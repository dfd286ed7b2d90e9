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

#include "fedrec/backbone.hpp"

#include <algorithm>
#include <cmath>

namespace fedrec::backbone {

namespace {

double clamp_score(double s) { return std::clamp(s, kScoreEpsilon, 1.0 - kScoreEpsilon); }

double bce_term(double score, double label) {
  const double s = clamp_score(score);
  return -(label * std::log(s) + (1.0 - label) * std::log(1.0 - s));
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double score(const UserVector& p, const Eigen::Ref<const RowVector>& q) {
  if (p.size() != q.size())
    throw ShapeError("score: user dim " + std::to_string(p.size()) + " vs item dim " +
                     std::to_string(q.size()));
  return sigmoid(q.dot(p.transpose()));
}

double bce_loss(std::span<const Prediction> batch) {
  if (batch.empty()) throw ShapeError("bce_loss: empty batch");
  double total = 0.0;
  for (const auto& pred : batch) total += bce_term(pred.score, pred.label);
  return total / static_cast<double>(batch.size());
}

BatchGradients bce_forward_backward(const UserVector& p, const Eigen::Ref<const Matrix>& rows,
                                    const Eigen::Ref<const Vector>& labels) {
  if (rows.cols() != p.size()) throw ShapeError("bce_forward_backward: dim mismatch");
  if (rows.rows() != labels.size()) throw ShapeError("bce_forward_backward: label count mismatch");
  if (rows.rows() == 0) throw ShapeError("bce_forward_backward: empty batch");

  const Index batch = rows.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);
  BatchGradients out;
  out.scores = rows * p;
  Vector delta(batch);
  double loss = 0.0;
  for (Index b = 0; b < batch; ++b) {
    const double s = sigmoid(out.scores(b));
    out.scores(b) = s;
    loss += bce_term(s, labels(b));
    delta(b) = (s - labels(b)) * inv_b;
  }
  out.loss = loss * inv_b;
  out.d_user = rows.transpose() * delta;
  out.d_rows = delta * p.transpose();
  return out;
}

BackboneGradients bce_gradients(const UserVector& p, std::span<const data::ItemId> items,
                                const Eigen::Ref<const Matrix>& rows,
                                const Eigen::Ref<const Vector>& labels) {
  if (static_cast<Index>(items.size()) != rows.rows())
    throw ShapeError("bce_gradients: item id count mismatch");
  auto dense = bce_forward_backward(p, rows, labels);
  BackboneGradients out;
  out.d_user = std::move(dense.d_user);
  for (std::size_t b = 0; b < items.size(); ++b) {
    const Vector g = dense.d_rows.row(static_cast<Index>(b)).transpose();
    auto [it, inserted] = out.d_items.try_emplace(items[b], g);
    if (!inserted) it->second += g;
  }
  return out;
}

}  // namespace fedrec::backbone
