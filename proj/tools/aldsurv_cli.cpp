// aldsurv command-line interface: generate, train, evaluate, bench, compare.
//
// Failures exit with status 1 and print {"error": {...}} on stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "aldsurv/aldsurv.hpp"

namespace {

using namespace aldsurv;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
  std::size_t jobs = 1;
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
}

DatasetSchema csv_schema(const std::string& time_col, const std::string& event_col,
                         const std::string& features, char delimiter, bool allow_negative) {
  DatasetSchema s;
  s.time_column = time_col;
  s.event_column = event_col;
  s.delimiter = delimiter;
  s.allow_negative_times = allow_negative;
  if (!features.empty()) s.feature_columns = detail::split_list(features);
  return s;
}

MethodSettings settings_for(ModelKind kind, const std::string& config_path, const std::string& dataset) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path, false);
  DatasetSpec spec;
  spec.name = dataset;
  spec.synthetic = false;
  for (const auto& name : synthetic_config_names())
    if (name == dataset) spec.synthetic = true;
  return resolve_method_settings(cfg, kind, spec);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"aldsurv: survival models, metrics and benchmark sweeps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "aldsurv 1.0.0");

  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress messages to stderr");

  CommonOptions common;
  auto add_common = [&](CLI::App* sub, bool with_jobs) {
    sub->add_option("--config", common.config, "INI configuration file");
    sub->add_option("--seed", common.seed, "Base seed");
    sub->add_option("--out", common.out, "Output path (file or directory)");
    sub->add_option("--format", common.format, "Report format: json, csv or markdown")
        ->check(CLI::IsMember({"json", "csv", "markdown", "md"}));
    if (with_jobs) sub->add_option("--jobs", common.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  };

  // generate
  auto* gen = app.add_subcommand("generate", "Export a synthetic dataset as CSV");
  std::string gen_name;
  std::size_t gen_n = 0;
  bool list_configs = false;
  gen->add_option("--dataset", gen_name, "Synthetic configuration name");
  gen->add_option("--n", gen_n, "Number of records (default: train + test size)");
  gen->add_flag("--list", list_configs, "List configuration names and exit");
  add_common(gen, false);

  // train
  auto* tr = app.add_subcommand("train", "Fit one model on a CSV file and save it");
  std::string tr_data, tr_method = "ald", tr_time = "time", tr_event = "event", tr_features;
  std::string tr_profile;
  char tr_delim = ',';
  bool tr_negative = false;
  tr->add_option("--train", tr_data, "Training CSV")->required();
  tr->add_option("--method", tr_method, "ald, cqrnn or lognorm")
      ->check(CLI::IsMember({"ald", "cqrnn", "lognorm"}));
  tr->add_option("--time-col", tr_time, "Time column");
  tr->add_option("--event-col", tr_event, "Event column");
  tr->add_option("--features", tr_features, "Comma-separated feature columns (default: all others)");
  tr->add_option("--delimiter", tr_delim, "CSV delimiter");
  tr->add_option("--profile", tr_profile,
                 "Synthetic configuration whose built-in training settings to use");
  tr->add_flag("--allow-negative-times", tr_negative, "Accept negative times (synthetic Normal exports)");
  add_common(tr, false);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a saved model on a test CSV");
  std::string ev_model, ev_train, ev_test, ev_point, ev_time = "time", ev_event = "event";
  char ev_delim = ',';
  bool ev_negative = false;
  ev->add_option("--model", ev_model, "Model file written by 'train'")->required();
  ev->add_option("--train", ev_train, "Training CSV (censoring curve and IBS grid)")->required();
  ev->add_option("--test", ev_test, "Test CSV")->required();
  ev->add_option("--point", ev_point, "Point estimate: mean, median or mode");
  ev->add_option("--time-col", ev_time, "Time column");
  ev->add_option("--event-col", ev_event, "Event column");
  ev->add_option("--delimiter", ev_delim, "CSV delimiter");
  ev->add_flag("--allow-negative-times", ev_negative, "Accept negative times");
  add_common(ev, false);

  // bench
  auto* be = app.add_subcommand("bench", "Run a configured sweep");
  bool be_fresh = false;
  be->add_flag("--fresh", be_fresh, "Ignore an existing results.jsonl instead of resuming");
  add_common(be, true);

  // compare
  auto* cmp = app.add_subcommand("compare", "Significance report from a results log");
  std::string cmp_data, cmp_reference = "ald";
  bool cmp_student = false;
  double cmp_alpha = 0.05;
  cmp->add_option("--data", cmp_data, "results.jsonl written by 'bench'")->required();
  cmp->add_option("--reference", cmp_reference, "Reference method")
      ->check(CLI::IsMember({"ald", "cqrnn", "lognorm"}));
  cmp->add_flag("--student", cmp_student, "Pooled-variance t-test instead of Welch");
  cmp->add_option("--alpha", cmp_alpha, "FDR level")->check(CLI::Range(0.0, 1.0));
  add_common(cmp, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  if (!verbose) {
    set_log_sink([](LogLevel level, std::string_view msg) {
      if (level == LogLevel::warning) std::clog << "[warn] " << msg << '\n';
    });
  }

  if (gen->parsed()) {
    if (list_configs) {
      for (const auto& c : synthetic_configs())
        std::cout << c.name << "  d=" << c.dim << "  train=" << c.n_train << "  test=" << c.n_test
                  << "  censoring~" << c.target_censoring << '\n';
      return 0;
    }
    if (gen_name.empty()) throw std::invalid_argument("generate: --dataset is required");
    const auto& cfg = synthetic_config(gen_name);
    const std::size_t n = gen_n > 0 ? gen_n : cfg.n_train + cfg.n_test;
    GenerationDiagnostics diag;
    const Dataset data = generate(cfg, n, common.seed.value_or(0), &diag);
    std::ostringstream text;
    write_csv(text, data);
    write_text(common.out, text.str());
    if (!common.out.empty())
      std::cerr << nlohmann::json{{"records", n},
                                  {"censoring_proportion", data.censoring_proportion()},
                                  {"negative_event_times", diag.negative_event_times},
                                  {"negative_censoring_times", diag.negative_censoring_times}}
                       .dump()
                << '\n';
    return 0;
  }

  if (tr->parsed()) {
    const auto kind = model_kind_from_string(tr_method);
    const Dataset data = load_csv(tr_data, csv_schema(tr_time, tr_event, tr_features, tr_delim, tr_negative));
    const auto settings = settings_for(kind, common.config, tr_profile);
    const auto model = fit(kind, data, settings.fit, common.seed.value_or(0));
    if (common.out.empty()) throw std::invalid_argument("train: --out is required");
    save_model(model, common.out);
    std::cout << nlohmann::json{{"model", common.out},
                                {"kind", to_string(kind)},
                                {"records", data.size()},
                                {"best_epoch", model.log.best_epoch},
                                {"epochs_run", model.log.epochs.back().epoch},
                                {"best_validation_loss", model.log.best_validation_loss}}
                     .dump()
              << '\n';
    return 0;
  }

  if (ev->parsed()) {
    const auto model = load_model(ev_model);
    const auto schema = csv_schema(ev_time, ev_event, "", ev_delim, ev_negative);
    DatasetSchema s = schema;
    s.feature_columns = model.feature_names;
    const Dataset train = load_csv(ev_train, s);
    const Dataset test = load_csv(ev_test, s);
    std::optional<PointKind> point;
    if (!ev_point.empty()) point = point_kind_from_string(ev_point);
    EvaluationDiagnostics diag;
    const auto m = evaluate_model(model, train, test, point, &diag);
    nlohmann::json j = to_json(m);
    if (model.kind == ModelKind::ald) {
      const auto ns = negative_support_diagnostic(model, test);
      j["negative_support"] = {{"p50", ns.p50}, {"p75", ns.p75}, {"p95", ns.p95}};
    }
    j["ipcw_skipped"] = diag.ipcw_skipped;
    j["uno_tau"] = diag.uno_tau;
    write_text(common.out, j.dump(2) + "\n");
    return 0;
  }

  if (be->parsed()) {
    if (common.config.empty()) throw std::invalid_argument("bench: --config is required");
    ExperimentConfig cfg = load_config(common.config);
    if (common.seed) cfg.base_seed = *common.seed;
    if (!common.out.empty()) cfg.output_dir = common.out;
    if (be->count("--jobs")) cfg.jobs = common.jobs;
    const auto format = report_format_from_string(common.format);
    const std::string results_path = (std::filesystem::path(cfg.output_dir) / "results.jsonl").string();
    if (be_fresh) std::filesystem::remove(results_path);
    const auto results = run(cfg, {.resume = true, .results_path = results_path});
    Report report{aggregate(results), compare(results, cfg.reference, cfg.t_test, cfg.alpha), {}};
    if (format == ReportFormat::json) report.generated_at = utc_timestamp();
    const std::string report_path =
        (std::filesystem::path(cfg.output_dir) / (std::string("report") + report_extension(format))).string();
    emit_report(report, format, report_path);
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.ok ? 0 : 1;
    std::cout << nlohmann::json{{"runs", results.size()},
                                {"failed", failed},
                                {"results", results_path},
                                {"report", report_path}}
                     .dump()
              << '\n';
    return 0;
  }

  if (cmp->parsed()) {
    if (!std::filesystem::exists(cmp_data)) throw DataError("cannot open '" + cmp_data + "'");
    const auto results = read_results(cmp_data);
    const auto format = report_format_from_string(common.format);
    Report report{aggregate(results),
                  compare(results, model_kind_from_string(cmp_reference),
                          cmp_student ? TTestKind::student : TTestKind::welch, cmp_alpha),
                  {}};
    if (format == ReportFormat::json) report.generated_at = utc_timestamp();
    std::ostringstream text;
    write_report(text, report, format);
    write_text(common.out, text.str());
    return 0;
  }
  return 0;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const DataError*>(&e)) return "data_error";
  if (dynamic_cast<const TrainingError*>(&e)) return "training_error";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  if (dynamic_cast<const std::domain_error*>(&e)) return "domain_error";
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", {{"kind", error_kind(e)}, {"message", e.what()}}}}.dump()
              << '\n';
    return 1;
  }
}
