#pragma once

// Experiment runner: datasets x methods x seeds, crash-safe result log,
// aggregation, significance testing and report rendering.
//
// Seeds. Seed index k uses seed_k = mix_seed(base, k). Every method sees the
// same generated data, split and network-initialization seed at a given k,
// so methods are compared on identical environments.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "aldsurv/core.hpp"
#include "aldsurv/datagen.hpp"
#include "aldsurv/dataio.hpp"
#include "aldsurv/metrics.hpp"
#include "aldsurv/models.hpp"
#include "aldsurv/stats.hpp"

namespace aldsurv {

// ---------------------------------------------------------------------------
// Configuration

using Overrides = std::map<std::string, std::string>;

struct DatasetSpec {
  std::string name;
  bool synthetic = true;
  // Synthetic datasets: sizes default to the registry values.
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  // CSV datasets.
  std::string path;
  DatasetSchema schema;
  double test_fraction = 0.2;
};

struct ExperimentConfig {
  std::vector<DatasetSpec> datasets;
  std::vector<ModelKind> methods{ModelKind::ald, ModelKind::cqrnn, ModelKind::lognorm};
  std::size_t seeds = 10;
  std::uint64_t base_seed = 0;
  std::string output_dir = "results";
  std::size_t jobs = 1;
  TTestKind t_test = TTestKind::welch;
  double alpha = 0.05;
  ModelKind reference = ModelKind::ald;
  // [train] applies to every method, then the per-method section.
  Overrides train_overrides;
  std::map<ModelKind, Overrides> method_overrides;

  void validate() const {
    if (datasets.empty()) throw std::invalid_argument("config: no datasets listed");
    if (methods.empty()) throw std::invalid_argument("config: method list is empty");
    if (seeds == 0) throw std::invalid_argument("config: seeds must be >= 1");
    if (jobs == 0) throw std::invalid_argument("config: jobs must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha must lie in (0, 1)");
    std::set<std::string> names;
    for (const auto& d : datasets)
      if (!names.insert(d.name).second) throw std::invalid_argument("config: dataset '" + d.name + "' listed twice");
  }
};

// Settings resolved for one (method, dataset) pair.
struct MethodSettings {
  FitOptions fit;
  PointKind point = PointKind::mean;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    auto t = trim(cur);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: '" + key + "' expects a boolean, got '" + v + "'");
}

inline double parse_real(const std::string& key, const std::string& v) {
  const auto d = parse_double(v);
  if (!d || !std::isfinite(*d)) throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  return *d;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

inline void apply_overrides(MethodSettings& s, const Overrides& o, const std::string& where) {
  for (const auto& [key, value] : o) {
    const std::string k = where + "." + key;
    if (key == "epochs") s.fit.train.epochs = parse_count(k, value);
    else if (key == "batch_size") s.fit.train.batch_size = parse_count(k, value);
    else if (key == "learning_rate") s.fit.train.learning_rate = parse_real(k, value);
    else if (key == "validation_fraction") s.fit.train.validation_fraction = parse_real(k, value);
    else if (key == "patience") s.fit.train.early_stop_patience = parse_count(k, value);
    else if (key == "weight_decay") s.fit.train.weight_decay = parse_real(k, value);
    else if (key == "restore_best") s.fit.train.restore_best = parse_bool(k, value);
    else if (key == "dropout") s.fit.mlp.dropout_rate = parse_real(k, value);
    else if (key == "residual") s.fit.mlp.residual = parse_bool(k, value);
    else if (key == "standardize") s.fit.standardize_features = parse_bool(k, value);
    else if (key == "scale_time") s.fit.scale_time = parse_bool(k, value);
    else if (key == "point") s.point = point_kind_from_string(value);
    else if (key == "hidden") {
      s.fit.mlp.hidden_dims.clear();
      for (const auto& h : split_list(value)) s.fit.mlp.hidden_dims.push_back(parse_count(k, h));
    } else {
      throw std::invalid_argument("config: unknown training key '" + k + "'");
    }
  }
}

}  // namespace detail

// Built-in settings. ALD: two 32-unit layers with the residual skip, dropout
// 0.1, 200 epochs, early stopping after 10 stale epochs. CQRNN and LogNorm
// follow their tuned baseline recipe: two 100-unit layers, no dropout, a
// fixed epoch budget per synthetic family and the final weights.
inline MethodSettings default_method_settings(ModelKind kind, const DatasetSpec& dataset) {
  MethodSettings s;
  if (kind == ModelKind::ald) {
    s.point = PointKind::mean;
    return s;
  }
  s.point = default_point_kind(kind);
  s.fit.mlp.hidden_dims = {100, 100};
  s.fit.mlp.residual = false;
  s.fit.mlp.dropout_rate = 0.0;
  s.fit.train.early_stop_patience = 0;
  s.fit.train.restore_best = false;
  if (kind == ModelKind::cqrnn) s.fit.train.weight_decay = 1e-4;
  s.fit.train.epochs = 100;
  if (dataset.synthetic) {
    const auto& cfg = synthetic_config(dataset.name);
    if (cfg.dim == 4) s.fit.train.epochs = 20;
    else if (cfg.dim == 8) s.fit.train.epochs = 10;
  }
  return s;
}

inline MethodSettings resolve_method_settings(const ExperimentConfig& config, ModelKind kind,
                                              const DatasetSpec& dataset) {
  MethodSettings s = default_method_settings(kind, dataset);
  detail::apply_overrides(s, config.train_overrides, "train");
  if (auto it = config.method_overrides.find(kind); it != config.method_overrides.end())
    detail::apply_overrides(s, it->second, to_string(kind));
  s.fit.train.validate();
  s.fit.mlp.validate();
  if (kind == ModelKind::cqrnn && s.point != PointKind::median)
    throw std::invalid_argument("config: cqrnn supports only the median point estimate");
  return s;
}

// With require_datasets off, a config holding only [train]/[method]
// sections is accepted (used by the single-model CLI commands).
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>",
                                     bool require_datasets = true) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(source + ": " + e.what());
  }
  ExperimentConfig cfg;
  std::vector<std::string> dataset_names;
  std::map<std::string, Overrides> dataset_sections;

  for (const auto& [section, body] : tree) {
    Overrides kv;
    for (const auto& [key, value] : body) kv[key] = value.get_value<std::string>();
    if (section == "bench") {
      for (const auto& [key, value] : kv) {
        const std::string k = "bench." + key;
        if (key == "datasets") dataset_names = detail::split_list(value);
        else if (key == "methods") {
          cfg.methods.clear();
          for (const auto& m : detail::split_list(value)) cfg.methods.push_back(model_kind_from_string(m));
        } else if (key == "seeds") cfg.seeds = detail::parse_count(k, value);
        else if (key == "seed") cfg.base_seed = detail::parse_count(k, value);
        else if (key == "output") cfg.output_dir = value;
        else if (key == "jobs") cfg.jobs = detail::parse_count(k, value);
        else if (key == "alpha") cfg.alpha = detail::parse_real(k, value);
        else if (key == "reference") cfg.reference = model_kind_from_string(value);
        else if (key == "t_test") {
          if (value == "welch") cfg.t_test = TTestKind::welch;
          else if (value == "student") cfg.t_test = TTestKind::student;
          else throw std::invalid_argument("config: bench.t_test must be welch or student");
        } else throw std::invalid_argument("config: unknown key '" + k + "'");
      }
    } else if (section == "train") {
      cfg.train_overrides = kv;
    } else if (section == "ald" || section == "cqrnn" || section == "lognorm") {
      cfg.method_overrides[model_kind_from_string(section)] = kv;
    } else if (section.rfind("dataset.", 0) == 0) {
      dataset_sections[section.substr(8)] = kv;
    } else {
      throw std::invalid_argument("config: unknown section [" + section + "]");
    }
  }

  for (const auto& name : dataset_names) {
    DatasetSpec d;
    d.name = name;
    const auto it = dataset_sections.find(name);
    const Overrides kv = it == dataset_sections.end() ? Overrides{} : it->second;
    d.synthetic = !kv.count("path");
    if (d.synthetic) {
      const auto& reg = synthetic_config(name);
      d.n_train = reg.n_train;
      d.n_test = reg.n_test;
    }
    for (const auto& [key, value] : kv) {
      const std::string k = "dataset." + name + "." + key;
      if (key == "n_train" && d.synthetic) d.n_train = detail::parse_count(k, value);
      else if (key == "n_test" && d.synthetic) d.n_test = detail::parse_count(k, value);
      else if (key == "path") d.path = value;
      else if (key == "time" && !d.synthetic) d.schema.time_column = value;
      else if (key == "event" && !d.synthetic) d.schema.event_column = value;
      else if (key == "features" && !d.synthetic) d.schema.feature_columns = detail::split_list(value);
      else if (key == "delimiter" && !d.synthetic) {
        if (value.size() != 1) throw std::invalid_argument("config: " + k + " must be one character");
        d.schema.delimiter = value[0];
      } else if (key == "test_fraction" && !d.synthetic) d.test_fraction = detail::parse_real(k, value);
      else throw std::invalid_argument("config: unknown or inapplicable key '" + k + "'");
    }
    if (d.synthetic && (d.n_train < 2 || d.n_test < 1))
      throw std::invalid_argument("config: dataset '" + name + "' needs n_train >= 2 and n_test >= 1");
    cfg.datasets.push_back(std::move(d));
  }
  for (const auto& [name, kv] : dataset_sections) {
    if (std::find(dataset_names.begin(), dataset_names.end(), name) == dataset_names.end())
      log_warning("config: section [dataset." + name + "] is not listed in bench.datasets; ignored");
  }
  if (require_datasets || !cfg.datasets.empty()) cfg.validate();
  for (const auto& d : cfg.datasets)
    for (auto m : cfg.methods) (void)resolve_method_settings(cfg, m, d);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, bool require_datasets = true) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  return parse_config(in, path, require_datasets);
}

// ---------------------------------------------------------------------------
// Single runs

struct RunResult {
  std::string dataset;
  ModelKind method = ModelKind::ald;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricReport metrics;
  double seconds = 0.0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

inline nlohmann::json to_json(const MetricReport& m) {
  nlohmann::json j = nlohmann::json::object();
  const auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i) j[MetricReport::names[i]] = v[i];
  return j;
}

inline MetricReport metric_report_from_json(const nlohmann::json& j) {
  std::array<double, 9> v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = j.at(MetricReport::names[i]).get<double>();
  return MetricReport::from_values(v);
}

inline nlohmann::json to_json(const RunResult& r) {
  nlohmann::json j = {{"dataset", r.dataset},
                      {"method", to_string(r.method)},
                      {"seed_index", r.seed_index},
                      {"seed", r.seed},
                      {"ok", r.ok},
                      {"seconds", r.seconds},
                      {"train_log",
                       {{"epochs_run", r.epochs_run},
                        {"best_epoch", r.best_epoch},
                        {"stopped_early", r.stopped_early}}}};
  if (r.ok) j["metrics"] = to_json(r.metrics);
  else j["error"] = r.error;
  return j;
}

inline RunResult run_result_from_json(const nlohmann::json& j) {
  RunResult r;
  r.dataset = j.at("dataset").get<std::string>();
  r.method = model_kind_from_string(j.at("method").get<std::string>());
  r.seed_index = j.at("seed_index").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.ok = j.at("ok").get<bool>();
  r.seconds = j.value("seconds", 0.0);
  if (j.contains("train_log")) {
    const auto& t = j["train_log"];
    r.epochs_run = t.value("epochs_run", std::size_t{0});
    r.best_epoch = t.value("best_epoch", std::size_t{0});
    r.stopped_early = t.value("stopped_early", false);
  }
  if (r.ok) r.metrics = metric_report_from_json(j.at("metrics"));
  else r.error = j.value("error", std::string{});
  return r;
}

// Scores a fitted model. The training records supply the censoring curve and
// the IBS time grid; MAE uses o_true when every test record has it.
inline MetricReport evaluate_model(const SurvivalModel& model, const Dataset& train,
                                   const Dataset& test, std::optional<PointKind> point = std::nullopt,
                                   EvaluationDiagnostics* diagnostics = nullptr) {
  const auto preds = predict(model, test);
  const auto adapters = make_adapters(preds);
  const auto points = point_estimates(preds, point.value_or(default_point_kind(model.kind)));
  return evaluate_metrics<DistributionAdapter>(train.records, test.records, adapters, points,
                                               test.has_ground_truth(),
                                               model.preprocessing.time_scale, diagnostics);
}

inline std::uint64_t run_seed(std::uint64_t base, std::size_t index) { return mix_seed(base, index); }

// Train/test data for seed index k. Synthetic sets are regenerated per seed;
// CSV sets are re-split per seed.
inline TrainTestSplit prepare_data(const DatasetSpec& spec, std::uint64_t seed,
                                   const Dataset* loaded = nullptr) {
  if (spec.synthetic) {
    const auto& cfg = synthetic_config(spec.name);
    const std::size_t n = spec.n_train + spec.n_test;
    const Dataset all = generate(cfg, n, mix_seed(seed, 100));
    return split(all, static_cast<double>(spec.n_test) / static_cast<double>(n), mix_seed(seed, 101));
  }
  if (loaded == nullptr) throw std::logic_error("prepare_data: CSV dataset was not loaded");
  return split(*loaded, spec.test_fraction, mix_seed(seed, 101));
}

inline RunResult run_one(const ExperimentConfig& config, const DatasetSpec& spec, ModelKind method,
                         std::size_t seed_index, const Dataset* loaded = nullptr) {
  RunResult r;
  r.dataset = spec.name;
  r.method = method;
  r.seed_index = seed_index;
  r.seed = run_seed(config.base_seed, seed_index);
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto settings = resolve_method_settings(config, method, spec);
    const auto data = prepare_data(spec, r.seed, loaded);
    const auto model = fit(method, data.train, settings.fit, mix_seed(r.seed, 102));
    r.metrics = evaluate_model(model, data.train, data.test, settings.point);
    r.epochs_run = model.log.epochs.empty() ? 0 : model.log.epochs.back().epoch;
    r.best_epoch = model.log.best_epoch;
    r.stopped_early = model.log.stopped_early;
    for (double v : r.metrics.values())
      if (!std::isfinite(v)) throw TrainingError("non-finite metric value");
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
    log_warning(spec.name + "/" + to_string(method) + "/seed " + std::to_string(seed_index) +
                " failed: " + e.what());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// ---------------------------------------------------------------------------
// Result log

inline std::vector<RunResult> read_results(const std::string& path) {
  std::vector<RunResult> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(run_result_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      log_warning(path + ": skipping unreadable line " + std::to_string(line_no) + " (" + e.what() + ")");
    }
  }
  return out;
}

inline void sort_results(std::vector<RunResult>& results) {
  std::sort(results.begin(), results.end(), [](const RunResult& a, const RunResult& b) {
    return std::tuple(a.dataset, static_cast<int>(a.method), a.seed_index) <
           std::tuple(b.dataset, static_cast<int>(b.method), b.seed_index);
  });
}

struct RunOptions {
  // Skip (dataset, method, seed) cells already present in the result log.
  bool resume = true;
  // When empty, results are kept in memory only.
  std::string results_path;
};

// Runs every (dataset, method, seed) cell, appending each finished run to the
// result log as one JSON line. Returns all results, sorted.
inline std::vector<RunResult> run(const ExperimentConfig& config, const RunOptions& options = {}) {
  config.validate();
  std::vector<RunResult> done;
  if (options.resume && !options.results_path.empty()) done = read_results(options.results_path);

  std::set<std::tuple<std::string, int, std::size_t, std::uint64_t>> completed;
  for (const auto& r : done)
    completed.emplace(r.dataset, static_cast<int>(r.method), r.seed_index, r.seed);

  std::map<std::string, Dataset> loaded;
  for (const auto& d : config.datasets) {
    if (!d.synthetic) {
      DatasetSchema schema = d.schema;
      loaded.emplace(d.name, load_csv(d.path, schema));
    }
  }

  struct Task {
    const DatasetSpec* spec;
    ModelKind method;
    std::size_t seed_index;
  };
  std::vector<Task> tasks;
  for (const auto& d : config.datasets)
    for (auto m : config.methods)
      for (std::size_t k = 0; k < config.seeds; ++k) {
        if (completed.count({d.name, static_cast<int>(m), k, run_seed(config.base_seed, k)})) continue;
        tasks.push_back({&d, m, k});
      }
  if (done.size() > 0)
    log_info("resuming: " + std::to_string(done.size()) + " runs already recorded, " +
             std::to_string(tasks.size()) + " to go");

  std::ofstream log_file;
  if (!options.results_path.empty()) {
    const auto parent = std::filesystem::path(options.results_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    log_file.open(options.results_path, std::ios::app);
    if (!log_file) throw DataError("cannot open '" + options.results_path + "' for appending");
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::vector<RunResult> fresh;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto& t = tasks[i];
      const auto it = loaded.find(t.spec->name);
      RunResult r = run_one(config, *t.spec, t.method, t.seed_index,
                            it == loaded.end() ? nullptr : &it->second);
      std::lock_guard lock(mu);
      if (log_file.is_open()) {
        log_file << to_json(r).dump() << '\n';
        log_file.flush();
      }
      log_info(r.dataset + "/" + to_string(r.method) + "/seed " + std::to_string(r.seed_index) +
               (r.ok ? " done" : " failed"));
      fresh.push_back(std::move(r));
    }
  };
  const std::size_t n_threads = std::min(config.jobs, std::max<std::size_t>(tasks.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  done.insert(done.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));
  sort_results(done);
  return done;
}

// ---------------------------------------------------------------------------
// Aggregation and comparison

struct AggregateRow {
  std::string dataset;
  ModelKind method;
  std::string metric;
  SampleSummary summary;
};

inline std::vector<AggregateRow> aggregate(std::vector<RunResult> results) {
  sort_results(results);
  std::vector<AggregateRow> rows;
  std::size_t i = 0;
  while (i < results.size()) {
    std::size_t j = i;
    std::vector<std::array<double, 9>> cell;
    while (j < results.size() && results[j].dataset == results[i].dataset &&
           results[j].method == results[i].method) {
      if (results[j].ok) cell.push_back(results[j].metrics.values());
      ++j;
    }
    if (cell.empty()) {
      log_warning("aggregate: no successful runs for " + results[i].dataset + "/" +
                  to_string(results[i].method));
    } else {
      for (std::size_t m = 0; m < MetricReport::names.size(); ++m) {
        std::vector<double> v;
        for (const auto& c : cell) v.push_back(c[m]);
        rows.push_back({results[i].dataset, results[i].method, MetricReport::names[m], summarize(v)});
      }
    }
    i = j;
  }
  return rows;
}

// How each metric is turned into a "lower is better" score before testing.
enum class MetricOrientation { lower, higher, near_one, near_zero };

inline MetricOrientation metric_orientation(const std::string& metric) {
  if (metric == "harrell_c" || metric == "uno_c") return MetricOrientation::higher;
  if (metric == "cal_S_slope" || metric == "cal_f_slope") return MetricOrientation::near_one;
  if (metric == "cal_S_intercept" || metric == "cal_f_intercept") return MetricOrientation::near_zero;
  return MetricOrientation::lower;
}

inline double metric_loss(const std::string& metric, double v) {
  switch (metric_orientation(metric)) {
    case MetricOrientation::lower: return v;
    case MetricOrientation::higher: return -v;
    case MetricOrientation::near_one: return std::abs(v - 1.0);
    case MetricOrientation::near_zero: return std::abs(v);
  }
  return v;
}

struct Comparison {
  ModelKind reference;
  ModelKind baseline;
  std::string dataset;
  std::string metric;
  double reference_mean;
  double baseline_mean;
  double t;
  double p_value;
  double p_adjusted;
  bool rejected;
  // From the reference method's point of view: better, worse or same.
  std::string outcome;
};

// Tests the reference method against each other method on every
// (dataset, metric) pair, using the seeds where both runs succeeded. The BH
// family is all pairs for one baseline.
inline std::vector<Comparison> compare(const std::vector<RunResult>& results, ModelKind reference,
                                       TTestKind kind = TTestKind::welch, double alpha = 0.05) {
  std::map<std::tuple<std::string, int, std::size_t>, const RunResult*> index;
  std::set<std::string> datasets;
  std::set<int> methods;
  for (const auto& r : results) {
    if (!r.ok) continue;
    index[{r.dataset, static_cast<int>(r.method), r.seed_index}] = &r;
    datasets.insert(r.dataset);
    methods.insert(static_cast<int>(r.method));
  }
  std::vector<Comparison> out;
  for (int b : methods) {
    if (b == static_cast<int>(reference)) continue;
    std::vector<Comparison> family;
    for (const auto& d : datasets) {
      std::vector<std::array<double, 9>> ref_vals, base_vals;
      for (const auto& [key, r] : index) {
        if (std::get<0>(key) != d || std::get<1>(key) != static_cast<int>(reference)) continue;
        const auto other = index.find({d, b, std::get<2>(key)});
        if (other == index.end()) continue;
        ref_vals.push_back(r->metrics.values());
        base_vals.push_back(other->second->metrics.values());
      }
      if (ref_vals.size() < 2) {
        if (ref_vals.size() == 1)
          log_warning("compare: fewer than 2 shared seeds for " + d + ", " + to_string(reference) +
                      " vs " + to_string(static_cast<ModelKind>(b)) + "; skipped");
        continue;
      }
      for (std::size_t m = 0; m < MetricReport::names.size(); ++m) {
        const std::string metric = MetricReport::names[m];
        std::vector<double> a, c;
        double ra = 0.0, rb = 0.0;
        for (std::size_t s = 0; s < ref_vals.size(); ++s) {
          a.push_back(metric_loss(metric, ref_vals[s][m]));
          c.push_back(metric_loss(metric, base_vals[s][m]));
          ra += ref_vals[s][m];
          rb += base_vals[s][m];
        }
        const auto tt = t_test(a, c, kind);
        family.push_back({reference, static_cast<ModelKind>(b), d, metric,
                          ra / static_cast<double>(a.size()), rb / static_cast<double>(c.size()),
                          tt.t, tt.p_value, 1.0, false, "same"});
      }
    }
    std::vector<double> p;
    for (const auto& c : family) p.push_back(c.p_value);
    const auto bh = benjamini_hochberg(p, alpha);
    for (std::size_t i = 0; i < family.size(); ++i) {
      family[i].rejected = bh.rejected[i];
      family[i].p_adjusted = bh.adjusted[i];
      if (family[i].rejected) family[i].outcome = family[i].t < 0.0 ? "better" : "worse";
    }
    out.insert(out.end(), family.begin(), family.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { json, csv, markdown };

inline ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw std::invalid_argument("unknown report format '" + s + "' (expected json, csv or markdown)");
}

inline const char* report_extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::json: return ".json";
    case ReportFormat::csv: return ".csv";
    case ReportFormat::markdown: return ".md";
  }
  return ".txt";
}

struct Report {
  std::vector<AggregateRow> aggregates;
  std::vector<Comparison> comparisons;
  // Only the JSON layout carries it; empty means omitted.
  std::string generated_at;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json report_to_json(const Report& r) {
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : r.aggregates)
    aggs.push_back({{"dataset", a.dataset},
                    {"method", to_string(a.method)},
                    {"metric", a.metric},
                    {"mean", a.summary.mean},
                    {"std", a.summary.std},
                    {"n", a.summary.n}});
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : r.comparisons)
    comps.push_back({{"reference", to_string(c.reference)},
                     {"baseline", to_string(c.baseline)},
                     {"dataset", c.dataset},
                     {"metric", c.metric},
                     {"reference_mean", c.reference_mean},
                     {"baseline_mean", c.baseline_mean},
                     {"t", std::isfinite(c.t) ? nlohmann::json(c.t) : nlohmann::json(nullptr)},
                     {"p_value", c.p_value},
                     {"p_adjusted", c.p_adjusted},
                     {"rejected", c.rejected},
                     {"outcome", c.outcome}});
  nlohmann::json j = {{"aggregates", aggs}, {"comparisons", comps}};
  if (!r.generated_at.empty()) j["generated_at"] = r.generated_at;
  return j;
}

inline void write_report(std::ostream& out, const Report& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::json:
      out << report_to_json(r).dump(2) << '\n';
      return;
    case ReportFormat::csv: {
      out << "section,dataset,method,metric,mean,std,n,baseline,reference_mean,baseline_mean,t,p_value,p_adjusted,outcome\n";
      for (const auto& a : r.aggregates)
        out << "aggregate," << a.dataset << ',' << to_string(a.method) << ',' << a.metric << ','
            << detail::format_double(a.summary.mean) << ',' << detail::format_double(a.summary.std)
            << ',' << a.summary.n << ",,,,,,,\n";
      for (const auto& c : r.comparisons)
        out << "comparison," << c.dataset << ',' << to_string(c.reference) << ',' << c.metric
            << ",,,," << to_string(c.baseline) << ',' << detail::format_double(c.reference_mean)
            << ',' << detail::format_double(c.baseline_mean) << ',' << detail::format_double(c.t)
            << ',' << detail::format_double(c.p_value) << ',' << detail::format_double(c.p_adjusted)
            << ',' << c.outcome << '\n';
      return;
    }
    case ReportFormat::markdown: {
      // One row per (dataset, method), metrics as columns.
      out << "| dataset | method |";
      for (const auto* name : MetricReport::names) out << ' ' << name << " |";
      out << "\n|---|---|";
      for (std::size_t i = 0; i < MetricReport::names.size(); ++i) out << "---|";
      out << '\n';
      std::map<std::pair<std::string, int>, std::map<std::string, SampleSummary>> table;
      std::vector<std::pair<std::string, int>> order;
      for (const auto& a : r.aggregates) {
        const auto key = std::make_pair(a.dataset, static_cast<int>(a.method));
        if (!table.count(key)) order.push_back(key);
        table[key][a.metric] = a.summary;
      }
      char buf[64];
      for (const auto& key : order) {
        out << "| " << key.first << " | " << to_string(static_cast<ModelKind>(key.second)) << " |";
        for (const auto* name : MetricReport::names) {
          const auto& cell = table[key];
          if (const auto it = cell.find(name); it != cell.end()) {
            std::snprintf(buf, sizeof(buf), " %.3f ± %.3f |", it->second.mean, it->second.std);
            out << buf;
          } else {
            out << " - |";
          }
        }
        out << '\n';
      }
      if (!r.comparisons.empty()) {
        out << "\n| reference | baseline | dataset | metric | p | p (BH) | outcome |\n"
               "|---|---|---|---|---|---|---|\n";
        for (const auto& c : r.comparisons) {
          std::snprintf(buf, sizeof(buf), "%.4g | %.4g", c.p_value, c.p_adjusted);
          out << "| " << to_string(c.reference) << " | " << to_string(c.baseline) << " | "
              << c.dataset << " | " << c.metric << " | " << buf << " | " << c.outcome << " |\n";
        }
      }
      return;
    }
  }
}

inline void emit_report(const Report& r, ReportFormat format, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_report(out, r, format);
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace aldsurv
