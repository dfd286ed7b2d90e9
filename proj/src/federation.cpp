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

#include "fedrec/federation.hpp"

#include "fedrec/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <numeric>

namespace fedrec::fed {

namespace {

constexpr std::uint64_t kServerStream = 0x5E4E'0000'0000ULL;
constexpr std::uint64_t kGlobalInitStream = 0x6100'0000'0000ULL;
constexpr std::uint64_t kUserInitStream = 0x7000'0000'0000ULL;
constexpr std::uint64_t kNetInitStream = 0x8000'0000'0000ULL;
constexpr std::uint64_t kClientStream = 0x9000'0000'0000ULL;
constexpr std::uint64_t kEvalStream = 0xA000'0000'0000ULL;

constexpr char kUploadMagic[4] = {'F', 'R', 'U', 'P'};
constexpr std::uint32_t kUploadVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw ParseError(offset, "truncated upload message");
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

/// Runs body(i) for i in [0, count) on `workers` threads; the first failure
/// by index is rethrown after all iterations finish.
template <typename Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1) if (workers > 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Strategy parse_strategy(std::string_view name) {
  if (name == "vanilla") return Strategy::kVanilla;
  if (name == "dlgm_only") return Strategy::kDlgmOnly;
  if (name == "err_only") return Strategy::kErrOnly;
  if (name == "plgc") return Strategy::kPlgc;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

std::string_view strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kVanilla:
      return "vanilla";
    case Strategy::kDlgmOnly:
      return "dlgm_only";
    case Strategy::kErrOnly:
      return "err_only";
    case Strategy::kPlgc:
      return "plgc";
  }
  return "unknown";
}

bool uses_mixing(Strategy strategy) {
  return strategy == Strategy::kDlgmOnly || strategy == Strategy::kPlgc;
}

bool uses_redundancy_loss(Strategy strategy) {
  return strategy == Strategy::kErrOnly || strategy == Strategy::kPlgc;
}

AggregateMode parse_aggregate_mode(std::string_view name) {
  if (name == "participants_only") return AggregateMode::kParticipantsOnly;
  if (name == "all_clients") return AggregateMode::kAllClients;
  throw ConfigError("unknown aggregate mode '" + std::string(name) + "'");
}

std::string_view aggregate_mode_name(AggregateMode mode) {
  return mode == AggregateMode::kParticipantsOnly ? "participants_only" : "all_clients";
}

std::vector<std::uint8_t> encode_upload(const ClientUpload& upload) {
  if (upload.table == nullptr) throw ShapeError("encode_upload: missing table");
  const Matrix& values = upload.table->values();
  std::vector<std::uint8_t> out;
  out.reserve(40 + static_cast<std::size_t>(values.size()) * sizeof(double));
  out.insert(out.end(), std::begin(kUploadMagic), std::end(kUploadMagic));
  put<std::uint32_t>(out, kUploadVersion);
  put<std::int32_t>(out, upload.user_id);
  put<std::uint64_t>(out, upload.sample_count);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(values.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(values.cols()));
  const auto* raw = reinterpret_cast<const std::uint8_t*>(values.data());
  out.insert(out.end(), raw, raw + values.size() * static_cast<Index>(sizeof(double)));
  return out;
}

DecodedUpload decode_upload(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kUploadMagic, 4) != 0)
    throw ParseError(0, "bad upload magic");
  offset = 4;
  if (get<std::uint32_t>(bytes, offset) != kUploadVersion)
    throw ParseError(offset, "unsupported upload version");
  const auto user = get<std::int32_t>(bytes, offset);
  const auto count = get<std::uint64_t>(bytes, offset);
  const auto rows = get<std::uint64_t>(bytes, offset);
  const auto cols = get<std::uint64_t>(bytes, offset);
  const std::size_t payload = rows * cols * sizeof(double);
  if (bytes.size() - offset != payload) throw ParseError(offset, "upload payload size mismatch");
  Matrix values(static_cast<Index>(rows), static_cast<Index>(cols));
  std::memcpy(values.data(), bytes.data() + offset, payload);
  return DecodedUpload{user, EmbeddingTable(std::move(values)), count};
}

std::vector<data::UserId> select_clients(Index num_clients, Index count, data::Rng& rng) {
  if (count < 1 || count > num_clients)
    throw ConfigError("clients per round must be in [1, " + std::to_string(num_clients) +
                      "], got " + std::to_string(count));
  std::vector<data::UserId> ids(static_cast<std::size_t>(num_clients));
  std::iota(ids.begin(), ids.end(), 0);
  if (count == num_clients) return ids;
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, num_clients - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> aggregation_weights(std::span<const std::size_t> counts) {
  double total = 0.0;
  for (auto c : counts) {
    if (c == 0) throw NumericError("aggregation: client with zero samples");
    total += static_cast<double>(c);
  }
  if (!(total > 0.0)) throw NumericError("aggregation: zero total samples");
  std::vector<double> weights;
  weights.reserve(counts.size());
  for (auto c : counts) weights.push_back(static_cast<double>(c) / total);
  return weights;
}

EmbeddingTable aggregate(std::span<const ClientUpload> uploads) {
  if (uploads.empty()) throw ShapeError("aggregate: no uploads");
  std::vector<const Matrix*> tables;
  std::vector<std::size_t> counts;
  for (const auto& u : uploads) {
    if (u.table == nullptr) throw ShapeError("aggregate: upload without table");
    if (!u.table->same_shape(*uploads.front().table)) throw ShapeError("aggregate: shape mismatch");
    tables.push_back(&u.table->values());
    counts.push_back(u.sample_count);
  }
  const auto weights = aggregation_weights(counts);
  Matrix out(uploads.front().table->rows(), uploads.front().table->dim());
  kernels::omp::weighted_sum(tables, weights, out);
  return EmbeddingTable(std::move(out));
}

void SimulationConfig::validate() const {
  hyper.validate();
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (clients_per_round < 0) throw ConfigError("clients_per_round must be >= 0");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (!(init_scale > 0.0) || !(user_init_scale > 0.0) || !(net_init_scale > 0.0))
    throw ConfigError("init scales must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

Simulator::Simulator(const data::InteractionSplit& split, SimulationConfig config)
    : split_(split),
      config_(std::move(config)),
      negatives_(data::build_eval_negatives(split, config_.eval_negatives,
                                            mix_seed(config_.seed, kEvalStream))),
      server_{init_table(split.num_items, config_.dim, config_.init_scale,
                         mix_seed(config_.seed, kGlobalInitStream)),
              0,
              {}},
      server_rng_(mix_seed(config_.seed, kServerStream)) {
  config_.validate();
  if (config_.clients_per_round > split.num_users)
    throw ConfigError("clients_per_round exceeds the number of users");
  std::normal_distribution<double> normal(0.0, config_.user_init_scale);
  server_.clients.reserve(static_cast<std::size_t>(split.num_users));
  for (Index u = 0; u < split.num_users; ++u) {
    ClientState c;
    c.user_id = static_cast<data::UserId>(u);
    data::Rng init_rng(mix_seed(config_.seed, kUserInitStream + static_cast<std::uint64_t>(u)));
    c.p = Vector(config_.dim);
    for (Index k = 0; k < config_.dim; ++k) c.p(k) = normal(init_rng);
    c.net = plgc::ErrNetwork::random(
        config_.dim, config_.net_init_scale,
        mix_seed(config_.seed, kNetInitStream + static_cast<std::uint64_t>(u)));
    c.rng.seed(mix_seed(config_.seed, kClientStream + static_cast<std::uint64_t>(u)));
    c.sample_count = split.train[static_cast<std::size_t>(u)].size();
    server_.clients.push_back(std::move(c));
  }
}

Simulator::ClientRoundStats Simulator::train_client(ClientState& client,
                                                    double learning_rate) const {
  const auto& global = server_.global;
  if (!client.local) {
    client.local.emplace(global);
  } else if (config_.strategy == Strategy::kVanilla) {
    client.local->assign(global);
  }
  client.participated = true;
  client.cached_trace_global = trace_global_;

  plgc::PLGCHyper hyper = config_.hyper;
  if (!uses_redundancy_loss(config_.strategy)) hyper.beta = 0.0;

  const auto user = client.user_id;
  const auto& positives = split_.train[static_cast<std::size_t>(user)];
  const Index d = config_.dim;
  const int epochs = hyper.local_epochs;
  auto local = client.local->values_mut();
  const Matrix& global_values = global.values();

  ClientRoundStats stats;
  std::vector<data::ItemId> items;
  std::vector<double> labels;
  std::vector<std::size_t> order;
  Matrix local_rows;
  Matrix global_rows;
  Vector batch_labels;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double trace_local = plgc::gram_trace(client.local->values());
    const plgc::MixCoefficients mix = uses_mixing(config_.strategy)
                                          ? plgc::mixing_coefficients(trace_local, trace_global_)
                                          : plgc::MixCoefficients::local_only();

    const auto negatives =
        data::sample_train_negatives(split_, user, config_.train_negatives, client.rng);
    items.assign(positives.begin(), positives.end());
    labels.assign(positives.size(), 1.0);
    items.insert(items.end(), negatives.items.begin(), negatives.items.end());
    labels.resize(items.size(), 0.0);
    order.resize(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), client.rng);

    double epoch_rec = 0.0;
    double epoch_err = 0.0;
    const std::size_t batch_size = static_cast<std::size_t>(hyper.batch_size);
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      local_rows.resize(static_cast<Index>(len), d);
      global_rows.resize(static_cast<Index>(len), d);
      batch_labels.resize(static_cast<Index>(len));
      for (std::size_t b = 0; b < len; ++b) {
        const auto idx = order[start + b];
        local_rows.row(static_cast<Index>(b)) = local.row(items[idx]);
        global_rows.row(static_cast<Index>(b)) = global_values.row(items[idx]);
        batch_labels(static_cast<Index>(b)) = labels[idx];
      }
      const plgc::BatchInput input{local_rows, global_rows, batch_labels};
      auto grads = plgc::plgc_backward(client.p, input, mix, client.net, hyper);
      if (!grads.d_user.allFinite() || !grads.d_local_rows.allFinite() ||
          !grads.d_net.all_finite() || !std::isfinite(grads.loss)) {
        throw DivergenceError(server_.round, epoch + 1, batch_index + 1,
                              "non-finite gradient for client " + std::to_string(user));
      }

      if (config_.weight_decay > 0.0) grads.d_user += config_.weight_decay * client.p;
      client.p -= learning_rate * grads.d_user;
      for (std::size_t b = 0; b < len; ++b) {
        const auto item = items[order[start + b]];
        local.row(item) -= learning_rate * grads.d_local_rows.row(static_cast<Index>(b));
      }
      if (config_.weight_decay > 0.0) {
        std::vector<data::ItemId> touched;
        touched.reserve(len);
        for (std::size_t b = 0; b < len; ++b) touched.push_back(items[order[start + b]]);
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (auto item : touched)
          local.row(item) -= learning_rate * config_.weight_decay * local.row(item);
      }
      if (grads.err_active) client.net.add_scaled(grads.d_net, -learning_rate);

      epoch_rec += grads.rec_loss * static_cast<double>(len);
      epoch_err += grads.err_loss * static_cast<double>(len);
    }
    const double n = std::max<double>(1.0, static_cast<double>(order.size()));
    epoch_rec /= n;
    epoch_err /= n;
    stats.rec_loss += epoch_rec;
    stats.err_loss += epoch_err;
    stats.lambda_c += mix.lambda_c;
    if (config_.trace_mixing) {
      stats.trace.push_back(EpochTrace{user, server_.round, epoch + 1, mix.lambda_c, trace_local,
                                       trace_global_, epoch_rec, epoch_err});
    }
  }
  if (epochs > 0) {
    stats.rec_loss /= epochs;
    stats.err_loss /= epochs;
    stats.lambda_c /= epochs;
  }
  return stats;
}

RoundReport Simulator::run_round() {
  ++server_.round;
  RoundReport report;
  report.round = server_.round;
  report.strategy = config_.strategy;

  const Index count =
      config_.clients_per_round == 0 ? split_.num_users : config_.clients_per_round;
  const auto selected = select_clients(split_.num_users, count, server_rng_);
  trace_global_ = plgc::gram_trace(server_.global);
  const double learning_rate =
      config_.hyper.learning_rate * std::pow(config_.hyper.lr_decay, server_.round - 1);

  std::vector<ClientRoundStats> stats(selected.size());
  parallel_for(selected.size(), config_.workers, [&](std::size_t i) {
    stats[i] = train_client(server_.clients[static_cast<std::size_t>(selected[i])], learning_rate);
  });

  std::vector<ClientUpload> uploads;
  if (config_.aggregate_mode == AggregateMode::kParticipantsOnly) {
    for (auto id : selected) {
      const auto& c = server_.clients[static_cast<std::size_t>(id)];
      uploads.push_back(ClientUpload{c.user_id, &*c.local, c.sample_count});
    }
  } else {
    for (const auto& c : server_.clients)
      if (c.local) uploads.push_back(ClientUpload{c.user_id, &*c.local, c.sample_count});
  }
  if (!uploads.empty()) {
    std::vector<std::size_t> counts;
    for (const auto& u : uploads) counts.push_back(u.sample_count);
    last_weights_ = aggregation_weights(counts);
    server_.global = aggregate(uploads);
  }
  if (config_.strategy == Strategy::kVanilla) {
    for (auto& c : server_.clients)
      if (c.local) c.local->assign(server_.global);
  }

  for (std::size_t i = 0; i < stats.size(); ++i) {
    report.mean_rec_loss += stats[i].rec_loss;
    report.mean_err_loss += stats[i].err_loss;
    report.mean_lambda_c += stats[i].lambda_c;
    if (config_.trace_mixing)
      mixing_trace_.insert(mixing_trace_.end(), stats[i].trace.begin(), stats[i].trace.end());
  }
  if (!stats.empty()) {
    const auto n = static_cast<double>(stats.size());
    report.mean_rec_loss /= n;
    report.mean_err_loss /= n;
    report.mean_lambda_c /= n;
  }
  return report;
}

const Matrix& Simulator::local_values(const ClientState& client) const {
  return client.local ? client.local->values() : server_.global.values();
}

plgc::MixCoefficients Simulator::personal_mix(const ClientState& client) const {
  if (!uses_mixing(config_.strategy) || !client.local) return plgc::MixCoefficients::local_only();
  return plgc::mixing_coefficients(plgc::gram_trace(*client.local),
                                   plgc::gram_trace(server_.global));
}

Matrix Simulator::personalized_table(const ClientState& client) const {
  const auto mix = personal_mix(client);
  if (mix.lambda_g == 0.0) return local_values(client);
  return mix.lambda_c * local_values(client) + mix.lambda_g * server_.global.values();
}

eval::EvalResult Simulator::evaluate(Phase phase) const {
  const auto n = static_cast<std::size_t>(split_.num_users);
  std::vector<int> ranks(n);
  const auto& held = phase == Phase::kValidation ? split_.validation : split_.test;
  const auto& negs = phase == Phase::kValidation ? negatives_.validation : negatives_.test;
  parallel_for(n, config_.workers, [&](std::size_t u) {
    const auto& c = server_.clients[u];
    ranks[u] = eval::evaluate_user(c.p, local_values(c), server_.global.values(), personal_mix(c),
                                   held[u], negs[u]);
  });
  return eval::summarize(std::move(ranks), config_.top_k);
}

void Simulator::fill_ia_summary(RoundReport& report) const {
  const auto n = static_cast<std::size_t>(split_.num_users);
  const double ia_global = information_abundance(server_.global);
  std::vector<double> ia_local(n);
  std::vector<double> ia_personal(n);
  parallel_for(n, config_.workers, [&](std::size_t u) {
    const auto& c = server_.clients[u];
    ia_local[u] = c.local ? information_abundance(*c.local) : ia_global;
    ia_personal[u] = information_abundance(personalized_table(c));
  });
  report.ia_global = ia_global;
  report.mean_ia_local = std::accumulate(ia_local.begin(), ia_local.end(), 0.0) / double(n);
  report.mean_ia_personalized =
      std::accumulate(ia_personal.begin(), ia_personal.end(), 0.0) / double(n);
}

eval::IaReport Simulator::ia_report() const {
  const auto n = static_cast<std::size_t>(split_.num_users);
  eval::IaReport report;
  report.ia_global = information_abundance(server_.global);
  report.rows.resize(n);
  parallel_for(n, config_.workers, [&](std::size_t u) {
    const auto& c = server_.clients[u];
    auto& row = report.rows[u];
    row.user_id = c.user_id;
    row.interactions = split_.positives[u].size();
    row.log10_interactions = std::log10(static_cast<double>(row.interactions));
    try {
      row.ia_local = information_abundance(local_values(c));
      row.ia_personalized = information_abundance(personalized_table(c));
    } catch (const NumericError& e) {
      throw NumericError("user " + std::to_string(c.user_id) + ": " + e.what());
    }
  });
  eval::sort_ia_rows(report.rows);
  return report;
}

std::vector<eval::SpectrumRow> Simulator::spectrum_rows() const {
  const auto n = static_cast<std::size_t>(split_.num_users);
  std::vector<eval::SpectrumRow> rows(1 + 2 * n);
  rows[0] = {"global", -1, singular_values(server_.global.values())};
  parallel_for(n, config_.workers, [&](std::size_t u) {
    const auto& c = server_.clients[u];
    rows[1 + 2 * u] = {"local", c.user_id, singular_values(local_values(c))};
    rows[2 + 2 * u] = {"personalized", c.user_id, singular_values(personalized_table(c))};
  });
  return rows;
}

std::vector<EpochTrace> Simulator::take_mixing_trace() {
  std::vector<EpochTrace> out;
  out.swap(mixing_trace_);
  return out;
}

namespace {

Snapshot take_snapshot(const Simulator& sim) {
  Snapshot snap;
  snap.round = sim.round();
  snap.global = sim.server().global.values();
  for (const auto& c : sim.server().clients)
    if (c.local) snap.locals.emplace_back(c.user_id, c.local->values());
  return snap;
}

}  // namespace

TrainingResult run_training(const data::InteractionSplit& split, const SimulationConfig& config,
                            const TrainingOptions& options) {
  if (options.rounds < 0) throw ConfigError("rounds must be >= 0");
  if (options.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  using Clock = std::chrono::steady_clock;

  Simulator sim(split, config);
  TrainingResult result;
  bool have_best = false;

  const auto evaluate_round = [&](RoundReport& report) {
    report.evaluated = true;
    const auto val = sim.evaluate(Phase::kValidation);
    const auto test = sim.evaluate(Phase::kTest);
    report.hr = val.hr;
    report.ndcg = val.ndcg;
    report.test_hr = test.hr;
    report.test_ndcg = test.ndcg;
    if (options.diagnostics) sim.fill_ia_summary(report);
    if (!have_best || val.hr > result.best_validation_hr) {
      have_best = true;
      result.best_round = report.round;
      result.best_validation_hr = val.hr;
      result.test_hr = test.hr;
      result.test_ndcg = test.ndcg;
      if (options.diagnostics)
        result.best_diagnostics =
            Diagnostics{sim.ia_report(), sim.spectrum_rows(), sim.server().global.values()};
      if (options.keep_snapshot) result.best_snapshot = take_snapshot(sim);
    }
  };

  {
    const auto start = Clock::now();
    RoundReport initial;
    initial.round = 0;
    initial.strategy = config.strategy;
    evaluate_round(initial);
    if (options.timing)
      initial.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (options.on_round) options.on_round(initial);
    result.rounds.push_back(initial);
  }

  for (int t = 1; t <= options.rounds; ++t) {
    const auto start = Clock::now();
    RoundReport report = sim.run_round();
    if (t % options.eval_every == 0 || t == options.rounds) evaluate_round(report);
    if (options.timing)
      report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (options.on_round) options.on_round(report);
    result.rounds.push_back(report);
  }
  result.mixing_trace = sim.take_mixing_trace();
  return result;
}

}  // namespace fedrec::fed
