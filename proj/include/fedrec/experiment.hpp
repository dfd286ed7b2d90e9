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

// Experiment runner: configuration, repeated/swept runs and report files.

#include "fedrec/data.hpp"
#include "fedrec/federation.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fedrec::cli {

enum class Backbone { kMf, kNcf };

Backbone parse_backbone(std::string_view name);
std::string_view backbone_name(Backbone backbone);

struct SweepSpec {
  std::string parameter;  // beta, gamma, d, eta
  std::vector<double> values;

  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

SweepSpec parse_sweep(std::string_view text);
std::string format_sweep(const SweepSpec& sweep);

struct ExperimentConfig {
  std::string data_path;
  data::RatingFormat format = data::RatingFormat::kTab;
  std::size_t min_interactions = 5;
  fed::Strategy strategy = fed::Strategy::kPlgc;
  Backbone backbone = Backbone::kMf;
  long dim = 32;
  int rounds = 100;
  int local_epochs = 10;
  int batch = 2048;
  double eta = 100.0;
  double lr_decay = 0.98;
  double beta = 0.5;
  double gamma = 0.01;
  double weight_decay = 0.0;
  double init_scale = 0.01;
  long clients_per_round = 0;
  std::string aggregate = "participants_only";
  std::size_t train_negatives = 4;
  std::size_t eval_negatives = 99;
  int top_k = 10;
  std::uint64_t seed = 42;
  int workers = 1;
  int eval_every = 1;
  int repeats = 1;
  std::optional<SweepSpec> sweep;
  bool trace_mixing = false;
  bool diagnostics = true;
  bool percent = false;
  bool timing = true;
  bool checkpoint = false;
  std::string out = "runs";

  void validate() const;
  fed::SimulationConfig simulation() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// `$FEDREC_DATA_DIR/ml-100k/u.data`, or `data/ml-100k/u.data` when unset.
std::string default_data_path();

/// Applies flat `key=value` lines (# comments, blank lines allowed) onto
/// `config`. Keys match the long flag names; '-' and '_' are equivalent.
void apply_config_text(std::string_view text, ExperimentConfig& config);

/// Inverse of apply_config_text: every field, one key per line.
std::string to_config_text(const ExperimentConfig& config);

/// Defaults, then `--config FILE`, then command-line flags. Throws
/// ConfigError naming the offending key. Returns std::nullopt when help was
/// requested (help text written to `out`).
std::optional<ExperimentConfig> parse_config(int argc, const char* const* argv, std::ostream& out);

struct RunOutput {
  ExperimentConfig config;
  fed::TrainingResult result;
  double wall_seconds = 0.0;
};

/// One training run on an already prepared split.
RunOutput run_once(const ExperimentConfig& config, const data::InteractionSplit& split);

struct LoadedData {
  data::Dataset dataset;
  data::InteractionSplit split;
};

LoadedData load_data(const ExperimentConfig& config);

/// Writes metrics.csv and manifest.json, plus ia.csv, spectrum.csv and the
/// global table export unless diagnostics are off, and mixing_trace.csv when
/// tracing. Returns the files written.
std::vector<std::filesystem::path> emit_reports(const RunOutput& run,
                                                const std::filesystem::path& dir);

void write_metrics_csv(const fed::TrainingResult& result, fed::Strategy strategy, std::ostream& out);
void write_mixing_trace_csv(const std::vector<fed::EpochTrace>& trace, std::ostream& out);

struct SummaryRow {
  std::string label;
  std::string sweep_parameter;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  int best_round = 0;
  double validation_hr = 0.0;
  double test_hr = 0.0;
  double test_ndcg = 0.0;
};

/// One run per sweep value (and per repeat seed), shared seed schedule.
std::vector<SummaryRow> run_sweep(const ExperimentConfig& config, const SweepSpec& sweep,
                                  const data::InteractionSplit& split,
                                  const std::filesystem::path& dir);

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);

/// Creates `<root>/<UTC timestamp>` (suffixing on collision).
std::filesystem::path make_run_directory(const std::filesystem::path& root);

/// Full CLI flow; returns the process exit code.
int run_main(int argc, const char* const* argv);

}  // namespace fedrec::cli
