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

// Synchronous FedAVG simulation: every round the server samples clients,
// each client trains its local item table against the frozen global one,
// and the server averages the uploaded tables.

#include "fedrec/common.hpp"
#include "fedrec/data.hpp"
#include "fedrec/embedding.hpp"
#include "fedrec/evaluation.hpp"
#include "fedrec/plgc.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace fedrec::fed {

/// vanilla: replacement FedMF. dlgm_only: trace mixing, no redundancy loss.
/// err_only: local table only, redundancy loss on. plgc: both.
enum class Strategy { kVanilla, kDlgmOnly, kErrOnly, kPlgc };

Strategy parse_strategy(std::string_view name);
std::string_view strategy_name(Strategy strategy);

bool uses_mixing(Strategy strategy);
bool uses_redundancy_loss(Strategy strategy);

/// Which local tables enter the average when only S < N clients train.
enum class AggregateMode { kParticipantsOnly, kAllClients };

AggregateMode parse_aggregate_mode(std::string_view name);
std::string_view aggregate_mode_name(AggregateMode mode);

struct ClientState {
  data::UserId user_id = 0;
  UserVector p;
  /// C, created from G on first participation.
  std::optional<EmbeddingTable> local;
  plgc::ErrNetwork net;
  double cached_trace_global = 0.0;
  data::Rng rng;
  bool participated = false;
  /// |D_n|: training positives.
  std::size_t sample_count = 0;
};

struct ServerState {
  EmbeddingTable global;
  int round = 0;
  std::vector<ClientState> clients;
};

/// The only client -> server message. Holds no user vector and no network
/// parameters.
struct ClientUpload {
  data::UserId user_id = 0;
  const EmbeddingTable* table = nullptr;
  std::size_t sample_count = 0;
};

struct DecodedUpload {
  data::UserId user_id = 0;
  EmbeddingTable table;
  std::size_t sample_count = 0;
};

/// Little-endian: magic "FRUP", u32 version, i32 user_id, u64 sample_count,
/// u64 rows, u64 dim, rows*dim f64 row-major.
std::vector<std::uint8_t> encode_upload(const ClientUpload& upload);
DecodedUpload decode_upload(std::span<const std::uint8_t> bytes);

std::vector<data::UserId> select_clients(Index num_clients, Index count, data::Rng& rng);

/// alpha_n = count_n / sum(count).
std::vector<double> aggregation_weights(std::span<const std::size_t> counts);

/// G = sum_n alpha_n C_n over the uploads, in the given order.
EmbeddingTable aggregate(std::span<const ClientUpload> uploads);

struct SimulationConfig {
  Index dim = 32;
  plgc::PLGCHyper hyper;
  Strategy strategy = Strategy::kPlgc;
  /// 0 means every client (S = N).
  Index clients_per_round = 0;
  AggregateMode aggregate_mode = AggregateMode::kParticipantsOnly;
  std::size_t train_negatives = 4;
  std::size_t eval_negatives = 99;
  int top_k = 10;
  double init_scale = 0.01;
  double user_init_scale = 0.01;
  double net_init_scale = 0.1;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  int workers = 1;
  bool trace_mixing = false;

  void validate() const;
};

struct EpochTrace {
  data::UserId client = 0;
  int round = 0;
  int epoch = 0;
  double lambda_c = 0.0;
  double trace_local = 0.0;
  double trace_global = 0.0;
  double rec_loss = 0.0;
  double err_loss = 0.0;
};

struct RoundReport {
  int round = 0;
  Strategy strategy = Strategy::kPlgc;
  bool evaluated = false;
  double hr = 0.0;  // validation
  double ndcg = 0.0;
  double test_hr = 0.0;
  double test_ndcg = 0.0;
  double mean_rec_loss = 0.0;
  double mean_err_loss = 0.0;
  double mean_lambda_c = 0.0;
  double ia_global = 0.0;
  double mean_ia_local = 0.0;
  double mean_ia_personalized = 0.0;
  double seconds = 0.0;
};

enum class Phase { kValidation, kTest };

struct Diagnostics {
  eval::IaReport ia;
  std::vector<eval::SpectrumRow> spectra;
  Matrix global;
};

class Simulator {
 public:
  Simulator(const data::InteractionSplit& split, SimulationConfig config);

  /// One communication round: sample, train locally, aggregate. Fills the
  /// loss and mixing fields of the report.
  RoundReport run_round();

  eval::EvalResult evaluate(Phase phase) const;

  /// Mean IA over local and personalized tables plus IA(G).
  void fill_ia_summary(RoundReport& report) const;

  /// Coefficients used to score for a client under the current G.
  plgc::MixCoefficients personal_mix(const ClientState& client) const;
  Matrix personalized_table(const ClientState& client) const;
  const Matrix& local_values(const ClientState& client) const;

  eval::IaReport ia_report() const;
  std::vector<eval::SpectrumRow> spectrum_rows() const;

  const ServerState& server() const noexcept { return server_; }
  ServerState& server() noexcept { return server_; }
  const SimulationConfig& config() const noexcept { return config_; }
  const data::InteractionSplit& split() const noexcept { return split_; }
  const data::EvalNegatives& eval_negatives() const noexcept { return negatives_; }
  int round() const noexcept { return server_.round; }

  std::vector<EpochTrace> take_mixing_trace();

  /// Aggregation weights of the most recent round keyed by position in the
  /// upload list (ascending user id).
  const std::vector<double>& last_weights() const noexcept { return last_weights_; }

 private:
  struct ClientRoundStats {
    double rec_loss = 0.0;
    double err_loss = 0.0;
    double lambda_c = 0.0;
    std::vector<EpochTrace> trace;
  };

  ClientRoundStats train_client(ClientState& client, double learning_rate) const;

  const data::InteractionSplit& split_;
  SimulationConfig config_;
  data::EvalNegatives negatives_;
  ServerState server_;
  data::Rng server_rng_;
  double trace_global_ = 0.0;
  std::vector<EpochTrace> mixing_trace_;
  std::vector<double> last_weights_;
};

struct Snapshot {
  int round = 0;
  Matrix global;
  std::vector<std::pair<data::UserId, Matrix>> locals;
};

struct TrainingOptions {
  int rounds = 100;
  int eval_every = 1;
  bool diagnostics = true;
  bool timing = true;
  bool keep_snapshot = false;
  std::function<void(const RoundReport&)> on_round;
};

struct TrainingResult {
  std::vector<RoundReport> rounds;
  int best_round = 0;
  double best_validation_hr = 0.0;
  double test_hr = 0.0;
  double test_ndcg = 0.0;
  /// State diagnostics at the best validation round.
  std::optional<Diagnostics> best_diagnostics;
  std::optional<Snapshot> best_snapshot;
  std::vector<EpochTrace> mixing_trace;
};

TrainingResult run_training(const data::InteractionSplit& split, const SimulationConfig& config,
                            const TrainingOptions& options);

}  // namespace fedrec::fed
