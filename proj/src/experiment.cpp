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

#include "fedrec/experiment.hpp"

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#ifndef FEDREC_GIT_DESCRIBE
#define FEDREC_GIT_DESCRIBE "unknown"
#endif

namespace fedrec::cli {

namespace {

std::string normalize_key(std::string_view key) {
  std::string out(key);
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_value(const std::string& key, std::string_view text) {
  text = trim(text);
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError(key + ": cannot parse '" + std::string(text) + "'");
  return value;
}

bool parse_bool(const std::string& key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + std::string(text) + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto end = std::to_chars(buf, buf + sizeof(buf), v).ptr;
  return std::string(buf, end);
}

struct KeySpec {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
KeySpec number_key(std::string key, T ExperimentConfig::*field) {
  return KeySpec{key,
                 [key, field](ExperimentConfig& c, std::string_view v) {
                   c.*field = parse_value<T>(key, v);
                 },
                 [field](const ExperimentConfig& c) {
                   if constexpr (std::is_floating_point_v<T>) {
                     return format_double(c.*field);
                   } else {
                     return std::to_string(c.*field);
                   }
                 }};
}

KeySpec bool_key(std::string key, bool ExperimentConfig::*field) {
  return KeySpec{key,
                 [key, field](ExperimentConfig& c, std::string_view v) {
                   c.*field = parse_bool(key, v);
                 },
                 [field](const ExperimentConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"data", [](ExperimentConfig& c, std::string_view v) { c.data_path = std::string(trim(v)); },
       [](const ExperimentConfig& c) { return c.data_path; }},
      {"format",
       [](ExperimentConfig& c, std::string_view v) {
         try {
           c.format = data::parse_format(trim(v));
         } catch (const ConfigError& e) {
           throw ConfigError(std::string("format: ") + e.what());
         }
       },
       [](const ExperimentConfig& c) { return std::string(data::format_name(c.format)); }},
      number_key("min_interactions", &ExperimentConfig::min_interactions),
      {"strategy",
       [](ExperimentConfig& c, std::string_view v) {
         try {
           c.strategy = fed::parse_strategy(trim(v));
         } catch (const ConfigError& e) {
           throw ConfigError(std::string("strategy: ") + e.what());
         }
       },
       [](const ExperimentConfig& c) { return std::string(fed::strategy_name(c.strategy)); }},
      {"backbone",
       [](ExperimentConfig& c, std::string_view v) { c.backbone = parse_backbone(trim(v)); },
       [](const ExperimentConfig& c) { return std::string(backbone_name(c.backbone)); }},
      number_key("dim", &ExperimentConfig::dim),
      number_key("rounds", &ExperimentConfig::rounds),
      number_key("local_epochs", &ExperimentConfig::local_epochs),
      number_key("batch", &ExperimentConfig::batch),
      number_key("eta", &ExperimentConfig::eta),
      number_key("lr_decay", &ExperimentConfig::lr_decay),
      number_key("beta", &ExperimentConfig::beta),
      number_key("gamma", &ExperimentConfig::gamma),
      number_key("weight_decay", &ExperimentConfig::weight_decay),
      number_key("init_scale", &ExperimentConfig::init_scale),
      number_key("clients_per_round", &ExperimentConfig::clients_per_round),
      {"aggregate",
       [](ExperimentConfig& c, std::string_view v) {
         try {
           c.aggregate = std::string(fed::aggregate_mode_name(fed::parse_aggregate_mode(trim(v))));
         } catch (const ConfigError& e) {
           throw ConfigError(std::string("aggregate: ") + e.what());
         }
       },
       [](const ExperimentConfig& c) { return c.aggregate; }},
      number_key("train_negatives", &ExperimentConfig::train_negatives),
      number_key("eval_negatives", &ExperimentConfig::eval_negatives),
      number_key("top_k", &ExperimentConfig::top_k),
      number_key("seed", &ExperimentConfig::seed),
      number_key("workers", &ExperimentConfig::workers),
      number_key("eval_every", &ExperimentConfig::eval_every),
      number_key("repeats", &ExperimentConfig::repeats),
      {"sweep",
       [](ExperimentConfig& c, std::string_view v) {
         v = trim(v);
         if (v.empty()) {
           c.sweep.reset();
         } else {
           c.sweep = parse_sweep(v);
         }
       },
       [](const ExperimentConfig& c) { return c.sweep ? format_sweep(*c.sweep) : std::string(); }},
      bool_key("trace_mixing", &ExperimentConfig::trace_mixing),
      bool_key("diagnostics", &ExperimentConfig::diagnostics),
      bool_key("percent", &ExperimentConfig::percent),
      bool_key("timing", &ExperimentConfig::timing),
      bool_key("checkpoint", &ExperimentConfig::checkpoint),
      {"out", [](ExperimentConfig& c, std::string_view v) { c.out = std::string(trim(v)); },
       [](const ExperimentConfig& c) { return c.out; }},
  };
  return specs;
}

const KeySpec& find_key(const std::string& raw_key) {
  const std::string key = normalize_key(raw_key);
  for (const auto& spec : key_specs())
    if (spec.key == key) return spec;
  throw ConfigError("unknown key '" + raw_key + "'");
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

nlohmann::json config_json(const ExperimentConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& spec : key_specs()) j[spec.key] = spec.get(config);
  return j;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

Backbone parse_backbone(std::string_view name) {
  if (name == "mf") return Backbone::kMf;
  if (name == "ncf") return Backbone::kNcf;
  throw ConfigError("backbone: unknown backbone '" + std::string(name) + "'");
}

std::string_view backbone_name(Backbone backbone) {
  return backbone == Backbone::kMf ? "mf" : "ncf";
}

SweepSpec parse_sweep(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError("sweep: expected NAME=v1,v2,...");
  SweepSpec spec;
  spec.parameter = normalize_key(trim(text.substr(0, eq)));
  if (spec.parameter == "eta" || spec.parameter == "beta" || spec.parameter == "gamma" ||
      spec.parameter == "d" || spec.parameter == "dim") {
    if (spec.parameter == "dim") spec.parameter = "d";
  } else {
    throw ConfigError("sweep: parameter must be one of beta, gamma, d, eta; got '" +
                      spec.parameter + "'");
  }
  std::string_view rest = text.substr(eq + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    spec.values.push_back(parse_value<double>("sweep", item));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (spec.values.empty()) throw ConfigError("sweep: no values");
  return spec;
}

std::string format_sweep(const SweepSpec& sweep) {
  std::string out = sweep.parameter + "=";
  for (std::size_t i = 0; i < sweep.values.size(); ++i) {
    if (i) out += ',';
    out += format_double(sweep.values[i]);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (dim < 1) throw ConfigError("dim: must be >= 1");
  if (rounds < 0) throw ConfigError("rounds: must be >= 0");
  if (local_epochs < 0) throw ConfigError("local_epochs: must be >= 0");
  if (batch < 1) throw ConfigError("batch: must be >= 1");
  if (!(eta > 0.0)) throw ConfigError("eta: must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay: must be in (0, 1]");
  if (!(beta >= 0.0)) throw ConfigError("beta: must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("gamma: must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay: must be >= 0");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale: must be > 0");
  if (clients_per_round < 0) throw ConfigError("clients_per_round: must be >= 0");
  if (top_k < 1) throw ConfigError("top_k: must be >= 1");
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every: must be >= 1");
  if (repeats < 1) throw ConfigError("repeats: must be >= 1");
  if (backbone == Backbone::kNcf)
    throw ConfigError("backbone: 'ncf' is not available in this build; use 'mf'");
}

fed::SimulationConfig ExperimentConfig::simulation() const {
  fed::SimulationConfig sim;
  sim.dim = dim;
  sim.hyper.beta = beta;
  sim.hyper.gamma = gamma;
  sim.hyper.local_epochs = local_epochs;
  sim.hyper.batch_size = batch;
  sim.hyper.learning_rate = eta;
  sim.hyper.lr_decay = lr_decay;
  sim.strategy = strategy;
  sim.clients_per_round = clients_per_round;
  sim.aggregate_mode = fed::parse_aggregate_mode(aggregate);
  sim.train_negatives = train_negatives;
  sim.eval_negatives = eval_negatives;
  sim.top_k = top_k;
  sim.init_scale = init_scale;
  sim.user_init_scale = init_scale;
  sim.weight_decay = weight_decay;
  sim.seed = seed;
  sim.workers = workers;
  sim.trace_mixing = trace_mixing;
  return sim;
}

std::string default_data_path() {
  const char* root = std::getenv("FEDREC_DATA_DIR");
  const std::filesystem::path base = root && *root ? std::filesystem::path(root) : "data";
  return (base / "ml-100k" / "u.data").string();
}

void apply_config_text(std::string_view text, ExperimentConfig& config) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    find_key(key).set(config, line.substr(eq + 1));
  }
}

std::string to_config_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& spec : key_specs()) out += spec.key + "=" + spec.get(config) + "\n";
  return out;
}

std::optional<ExperimentConfig> parse_config(int argc, const char* const* argv,
                                             std::ostream& out) {
  ExperimentConfig config;
  config.data_path = default_data_path();

  CLI::App app{"Federated recommendation simulator with local-global embedding mixing"};
  app.set_help_flag("-h,--help", "Print help");
  std::string config_file;
  app.add_option("--config", config_file, "Flat key=value configuration file");

  struct FlagValue {
    std::string key;
    CLI::Option* option;
    std::string value;
  };
  std::vector<std::unique_ptr<FlagValue>> values;
  const auto add_value = [&](const std::string& flag, const std::string& key,
                             const std::string& help) {
    auto fv = std::make_unique<FlagValue>();
    fv->key = key;
    const std::string fallback = find_key(key).get(ExperimentConfig{});
    fv->option = app.add_option(flag, fv->value, help)->type_name("VALUE");
    if (!fallback.empty() && key != "data") fv->option->default_str(fallback);
    values.push_back(std::move(fv));
  };
  add_value("--data", "data", "Rating file");
  add_value("--format", "format", "tab | double_colon");
  add_value("--min-interactions", "min_interactions", "Drop users with fewer positives");
  add_value("--strategy", "strategy", "vanilla | dlgm_only | err_only | plgc");
  add_value("--backbone", "backbone", "mf | ncf");
  add_value("--dim", "dim", "Embedding dimension d");
  add_value("--rounds", "rounds", "Communication rounds T");
  add_value("--local-epochs", "local_epochs", "Local epochs E");
  add_value("--batch", "batch", "Local batch size B");
  add_value("--eta", "eta", "Learning rate");
  add_value("--lr-decay", "lr_decay", "Per-round exponential decay");
  add_value("--beta", "beta", "Redundancy-loss weight");
  add_value("--gamma", "gamma", "Off-diagonal weight in the redundancy loss");
  add_value("--weight-decay", "weight_decay", "L2 weight decay on touched parameters");
  add_value("--init-scale", "init_scale", "Std of the Gaussian embedding init");
  add_value("--clients-per-round", "clients_per_round", "S (0 = all clients)");
  add_value("--aggregate", "aggregate", "participants_only | all_clients");
  add_value("--train-negatives", "train_negatives", "Negatives per training positive");
  add_value("--eval-negatives", "eval_negatives", "Negatives per evaluation user");
  add_value("--top-k", "top_k", "Cutoff K for HR/NDCG");
  add_value("--seed", "seed", "Global seed");
  add_value("--workers", "workers", "Client worker threads");
  add_value("--eval-every", "eval_every", "Evaluate every N rounds");
  add_value("--repeats", "repeats", "Runs with seeds seed, seed+1, ...");
  add_value("--sweep", "sweep", "NAME=v1,v2,... with NAME in beta, gamma, d, eta");
  add_value("--out", "out", "Output root directory");
  bool trace_mixing = false;
  bool no_diagnostics = false;
  bool percent = false;
  bool no_timing = false;
  bool checkpoint = false;
  auto* trace_opt = app.add_flag("--trace-mixing", trace_mixing, "Write per-epoch mixing trace");
  auto* nodiag_opt = app.add_flag("--no-diagnostics", no_diagnostics, "Metrics and manifest only");
  auto* percent_opt = app.add_flag("--percent", percent, "Print metrics as percentages");
  auto* notiming_opt = app.add_flag("--no-timing", no_timing, "Write 0 in the seconds column");
  auto* ckpt_opt = app.add_flag("--checkpoint", checkpoint, "Write the best-validation checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw ConfigError("config: cannot open '" + config_file + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    apply_config_text(buffer.str(), config);
  }
  for (const auto& fv : values)
    if (fv->option->count() > 0) find_key(fv->key).set(config, fv->value);
  if (trace_opt->count() > 0) config.trace_mixing = true;
  if (nodiag_opt->count() > 0) config.diagnostics = false;
  if (percent_opt->count() > 0) config.percent = true;
  if (notiming_opt->count() > 0) config.timing = false;
  if (ckpt_opt->count() > 0) config.checkpoint = true;
  config.validate();
  return config;
}

LoadedData load_data(const ExperimentConfig& config) {
  LoadedData out;
  const auto log = data::load_ratings(config.data_path, config.format);
  out.dataset = data::to_implicit(log, config.min_interactions);
  out.split = data::leave_one_out(out.dataset);
  return out;
}

RunOutput run_once(const ExperimentConfig& config, const data::InteractionSplit& split) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  fed::TrainingOptions options;
  options.rounds = config.rounds;
  options.eval_every = config.eval_every;
  options.diagnostics = config.diagnostics;
  options.timing = config.timing;
  options.keep_snapshot = config.checkpoint;
  RunOutput run;
  run.config = config;
  run.result = fed::run_training(split, config.simulation(), options);
  run.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

void write_metrics_csv(const fed::TrainingResult& result, fed::Strategy strategy,
                       std::ostream& out) {
  out << "round,strategy,hr@10,ndcg@10,mean_rec_loss,mean_err_loss,mean_lambda_c,ia_global,"
         "mean_ia_local,mean_ia_personalized,seconds\n";
  out << std::setprecision(10);
  for (const auto& r : result.rounds) {
    if (!r.evaluated) continue;
    out << r.round << ',' << fed::strategy_name(strategy) << ',' << r.hr << ',' << r.ndcg << ','
        << r.mean_rec_loss << ',' << r.mean_err_loss << ',' << r.mean_lambda_c << ','
        << r.ia_global << ',' << r.mean_ia_local << ',' << r.mean_ia_personalized << ','
        << r.seconds << '\n';
  }
}

void write_mixing_trace_csv(const std::vector<fed::EpochTrace>& trace, std::ostream& out) {
  out << "client,round,epoch,lambda_c,tr_local,tr_global,rec_loss,err_loss\n";
  out << std::setprecision(10);
  for (const auto& t : trace) {
    out << t.client << ',' << t.round << ',' << t.epoch << ',' << t.lambda_c << ','
        << t.trace_local << ',' << t.trace_global << ',' << t.rec_loss << ',' << t.err_loss
        << '\n';
  }
}

std::vector<std::filesystem::path> emit_reports(const RunOutput& run,
                                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const auto& result = run.result;

  {
    const auto path = dir / "metrics.csv";
    auto out = open_out(path);
    write_metrics_csv(result, run.config.strategy, out);
    written.push_back(path);
  }
  if (run.config.diagnostics && result.best_diagnostics) {
    const auto ia_path = dir / "ia.csv";
    auto ia = open_out(ia_path);
    eval::write_ia_csv(result.best_diagnostics->ia, ia);
    written.push_back(ia_path);

    const auto spec_path = dir / "spectrum.csv";
    auto spec = open_out(spec_path);
    eval::write_spectrum_rows_csv(result.best_diagnostics->spectra, spec);
    written.push_back(spec_path);

    const auto stem = dir / "global_table";
    export_table(result.best_diagnostics->global, stem, "global", result.best_round);
    written.push_back(stem.string() + ".tsv");
  }
  if (run.config.trace_mixing) {
    const auto path = dir / "mixing_trace.csv";
    auto out = open_out(path);
    write_mixing_trace_csv(result.mixing_trace, out);
    written.push_back(path);
  }
  if (result.best_snapshot) {
    const auto ckpt = dir / "checkpoint";
    std::filesystem::create_directories(ckpt);
    const auto& snap = *result.best_snapshot;
    export_table(snap.global, ckpt / "global", "global", snap.round);
    for (const auto& [user, table] : snap.locals)
      export_table(table, ckpt / ("local_" + std::to_string(user)), "local:" + std::to_string(user),
                   snap.round);
    nlohmann::json manifest{{"round", snap.round},
                            {"config_hash", std::hash<std::string>{}(to_config_text(run.config))},
                            {"seed", run.config.seed}};
    auto out = open_out(ckpt / "manifest.json");
    out << manifest.dump(2) << '\n';
    written.push_back(ckpt);
  }
  nlohmann::json manifest;
  manifest["config"] = config_json(run.config);
  manifest["config_text"] = to_config_text(run.config);
  manifest["git_describe"] = FEDREC_GIT_DESCRIBE;
  manifest["wall_seconds"] = run.wall_seconds;
  manifest["best_round"] = result.best_round;
  manifest["best_validation_hr"] = result.best_validation_hr;
  manifest["test_hr"] = result.test_hr;
  manifest["test_ndcg"] = result.test_ndcg;
  {
    const auto path = dir / "manifest.json";
    auto out = open_out(path);
    out << manifest.dump(2) << '\n';
    written.push_back(path);
  }
  return written;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "label,sweep_parameter,sweep_value,seed,best_round,validation_hr@10,test_hr@10,"
         "test_ndcg@10\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.label << ',' << r.sweep_parameter << ',' << r.sweep_value << ',' << r.seed << ','
        << r.best_round << ',' << r.validation_hr << ',' << r.test_hr << ',' << r.test_ndcg
        << '\n';
  }
}

namespace {

ExperimentConfig with_sweep_value(ExperimentConfig config, const std::string& parameter,
                                  double value) {
  if (parameter == "beta") {
    config.beta = value;
  } else if (parameter == "gamma") {
    config.gamma = value;
  } else if (parameter == "eta") {
    config.eta = value;
  } else if (parameter == "d") {
    config.dim = static_cast<long>(value);
    if (static_cast<double>(config.dim) != value) throw ConfigError("sweep: d must be an integer");
  }
  config.sweep.reset();
  return config;
}

/// Runs the repeats of one configuration, writing one subdirectory per seed
/// when there is more than one, and appends per-seed rows plus a mean row.
void run_repeats(const ExperimentConfig& config, const data::InteractionSplit& split,
                 const std::filesystem::path& dir, const std::string& label,
                 const std::string& parameter, double value, std::vector<SummaryRow>& rows) {
  SummaryRow mean{label + ":mean", parameter, value, config.seed, 0, 0.0, 0.0, 0.0};
  for (int r = 0; r < config.repeats; ++r) {
    ExperimentConfig run_config = config;
    run_config.seed = config.seed + static_cast<std::uint64_t>(r);
    run_config.repeats = 1;
    const auto run_dir =
        config.repeats > 1 ? dir / ("seed_" + std::to_string(run_config.seed)) : dir;
    RunOutput run;
    try {
      run = run_once(run_config, split);
    } catch (const Error& e) {
      throw Error(label + " (seed " + std::to_string(run_config.seed) + "): " + e.what());
    }
    emit_reports(run, run_dir);
    rows.push_back(SummaryRow{label, parameter, value, run_config.seed, run.result.best_round,
                              run.result.best_validation_hr, run.result.test_hr,
                              run.result.test_ndcg});
    mean.validation_hr += run.result.best_validation_hr / config.repeats;
    mean.test_hr += run.result.test_hr / config.repeats;
    mean.test_ndcg += run.result.test_ndcg / config.repeats;
  }
  if (config.repeats > 1) rows.push_back(mean);
}

}  // namespace

std::vector<SummaryRow> run_sweep(const ExperimentConfig& config, const SweepSpec& sweep,
                                  const data::InteractionSplit& split,
                                  const std::filesystem::path& dir) {
  std::vector<SummaryRow> rows;
  for (double value : sweep.values) {
    const auto run_config = with_sweep_value(config, sweep.parameter, value);
    const std::string label = sweep.parameter + "=" + format_double(value);
    try {
      run_repeats(run_config, split, dir / label, label, sweep.parameter, value, rows);
    } catch (const Error& e) {
      throw Error("sweep " + label + ": " + e.what());
    }
  }
  return rows;
}

std::filesystem::path make_run_directory(const std::filesystem::path& root) {
  const std::string stamp = utc_stamp();
  auto dir = root / stamp;
  for (int suffix = 1; std::filesystem::exists(dir); ++suffix)
    dir = root / (stamp + "-" + std::to_string(suffix));
  std::filesystem::create_directories(dir);
  return dir;
}

int run_main(int argc, const char* const* argv) {
  std::optional<ExperimentConfig> config;
  try {
    config = parse_config(argc, argv, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  if (!config) return 0;

  try {
    const auto loaded = load_data(*config);
    const auto& split = loaded.split;
    std::cerr << "loaded " << loaded.dataset.num_users << " users, " << loaded.dataset.num_items
              << " items, " << loaded.dataset.num_interactions() << " interactions\n";
    const auto dir = make_run_directory(config->out);

    std::vector<SummaryRow> rows;
    if (config->sweep) {
      rows = run_sweep(*config, *config->sweep, split, dir);
    } else {
      run_repeats(*config, split, dir, std::string(fed::strategy_name(config->strategy)), "", 0.0,
                  rows);
    }
    {
      auto out = open_out(dir / "summary.csv");
      write_summary_csv(rows, out);
    }
    const double scale = config->percent ? 100.0 : 1.0;
    std::cout << std::fixed << std::setprecision(config->percent ? 2 : 4);
    for (const auto& r : rows) {
      std::cout << r.label << " seed=" << r.seed << " best_round=" << r.best_round
                << " HR@" << config->top_k << "=" << r.test_hr * scale << " NDCG@"
                << config->top_k << "=" << r.test_ndcg * scale << '\n';
    }
    std::cout << "outputs: " << dir.string() << '\n';
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fedrec::cli
