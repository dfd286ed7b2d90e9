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

// Matrix-factorization scoring (dot product + logistic) with the binary
// cross-entropy objective and its analytic gradients.

#include "fedrec/common.hpp"
#include "fedrec/data.hpp"
#include "fedrec/embedding.hpp"

#include <map>
#include <span>

namespace fedrec::backbone {

inline constexpr double kScoreEpsilon = 1e-12;

struct Prediction {
  double score = 0.5;
  double label = 0.0;
  data::ItemId item_id = 0;
};

struct BackboneGradients {
  Vector d_user;
  std::map<data::ItemId, Vector> d_items;
};

/// Dense per-sample form: row b of `d_rows` is dL/dq for sample b.
struct BatchGradients {
  Vector d_user;
  Matrix d_rows;
  Vector scores;
  double loss = 0.0;
};

double sigmoid(double x);

double score(const UserVector& p, const Eigen::Ref<const RowVector>& q);

/// Mean binary cross-entropy; scores are clamped to [eps, 1 - eps].
double bce_loss(std::span<const Prediction> batch);

/// Scores, mean BCE and gradients for a batch whose item vectors are the
/// rows of `rows`. dL/d(p.q_b) = (sigmoid(p.q_b) - r_b) / B.
BatchGradients bce_forward_backward(const UserVector& p, const Eigen::Ref<const Matrix>& rows,
                                    const Eigen::Ref<const Vector>& labels);

/// Same gradients keyed by item id; repeated items accumulate.
BackboneGradients bce_gradients(const UserVector& p, std::span<const data::ItemId> items,
                                const Eigen::Ref<const Matrix>& rows,
                                const Eigen::Ref<const Vector>& labels);

}  // namespace fedrec::backbone
