#pragma once

// The three trainable survival models (ALD, CQRNN, LogNormal), their
// per-record predictive distributions and JSON persistence.
//
// Preprocessing, fitted on training data only:
//   - covariates are z-scored (FeatureTransform);
//   - times are divided by the training mean of y before training, and every
//     prediction is mapped back to original time units.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "aldsurv/core.hpp"
#include "aldsurv/dataio.hpp"
#include "aldsurv/dataset.hpp"
#include "aldsurv/distributions.hpp"
#include "aldsurv/losses.hpp"
#include "aldsurv/neuralnet.hpp"

namespace aldsurv {

enum class ModelKind { ald, cqrnn, lognorm };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::ald: return "ald";
    case ModelKind::cqrnn: return "cqrnn";
    case ModelKind::lognorm: return "lognorm";
  }
  return "ald";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "ald") return ModelKind::ald;
  if (s == "cqrnn") return ModelKind::cqrnn;
  if (s == "lognorm") return ModelKind::lognorm;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected ald, cqrnn or lognorm)");
}

// ---------------------------------------------------------------------------
// Predictive distributions

// Rearranged (sorted) quantile predictions of a CQRNN record, in original
// time units, with the pseudo value y* that closes the upper tail.
struct QuantileCurve {
  std::vector<double> q;
  std::vector<double> theta;
  double y_star = 0.0;

  double cdf(double t) const {
    const auto it = std::upper_bound(theta.begin(), theta.end(), t);
    if (it == theta.begin()) return 0.0;
    const auto k = static_cast<std::size_t>(it - theta.begin()) - 1;
    if (k + 1 == theta.size()) {
      const double last_q = q.back();
      const double span = y_star - theta.back();
      if (!(span > 0.0)) return 1.0;
      return std::min(1.0, last_q + (1.0 - last_q) * (t - theta.back()) / span);
    }
    return q[k] + (q[k + 1] - q[k]) * (t - theta[k]) / (theta[k + 1] - theta[k]);
  }

  double quantile(double p) const {
    detail::require_probability(p, "QuantileCurve::quantile");
    if (p <= q.front()) return theta.front();
    if (p >= q.back()) {
      const double span = std::max(0.0, y_star - theta.back());
      return theta.back() + (p - q.back()) / (1.0 - q.back()) * span;
    }
    const auto it = std::upper_bound(q.begin(), q.end(), p);
    const auto k = static_cast<std::size_t>(it - q.begin()) - 1;
    return theta[k] + (theta[k + 1] - theta[k]) * (p - q[k]) / (q[k + 1] - q[k]);
  }

  bool operator==(const QuantileCurve&) const = default;
};

using PredictedDistribution = std::variant<AldParams, LogNormParams, QuantileCurve>;

// Uniform CDF / survival / quantile view of any predicted distribution.
class DistributionAdapter {
 public:
  explicit DistributionAdapter(PredictedDistribution dist) : dist_(std::move(dist)) {}

  double cdf(double t) const {
    return std::visit(
        [t](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, AldParams>) return ald_cdf(t, d);
          else if constexpr (std::is_same_v<T, LogNormParams>) return lognormal_cdf(t, d);
          else return d.cdf(t);
        },
        dist_);
  }

  double survival(double t) const { return 1.0 - cdf(t); }

  double quantile(double q) const {
    return std::visit(
        [q](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, AldParams>) return ald_quantile(q, d);
          else if constexpr (std::is_same_v<T, LogNormParams>) return lognormal_quantile(q, d);
          else return d.quantile(q);
        },
        dist_);
  }

  const PredictedDistribution& distribution() const { return dist_; }

 private:
  PredictedDistribution dist_;
};

inline DistributionAdapter cdf_adapter(const PredictedDistribution& dist) {
  return DistributionAdapter(dist);
}

enum class PointKind { mean, median, mode };

inline const char* to_string(PointKind k) {
  switch (k) {
    case PointKind::mean: return "mean";
    case PointKind::median: return "median";
    case PointKind::mode: return "mode";
  }
  return "mean";
}

inline PointKind point_kind_from_string(const std::string& s) {
  if (s == "mean") return PointKind::mean;
  if (s == "median") return PointKind::median;
  if (s == "mode") return PointKind::mode;
  throw std::invalid_argument("unknown point estimate '" + s + "'");
}

inline double point_estimate(const PredictedDistribution& dist, PointKind kind) {
  if (const auto* p = std::get_if<AldParams>(&dist)) {
    switch (kind) {
      case PointKind::mean: return ald_moments(*p).mean;
      case PointKind::median: return ald_quantile(0.5, *p);
      case PointKind::mode: return p->theta();
    }
  }
  if (const auto* p = std::get_if<LogNormParams>(&dist)) {
    switch (kind) {
      case PointKind::mean: return lognormal_mean(*p);
      case PointKind::median: return lognormal_median(*p);
      case PointKind::mode: return std::exp(p->mu() - p->eta() * p->eta());
    }
  }
  const auto& curve = std::get<QuantileCurve>(dist);
  if (kind != PointKind::median)
    throw std::invalid_argument(std::string("point_estimate: quantile predictions support only the "
                                            "median, not the ") + to_string(kind));
  return curve.quantile(0.5);
}

// ---------------------------------------------------------------------------
// Models

struct Preprocessing {
  FeatureTransform features;
  double time_scale = 1.0;
};

struct SurvivalModel {
  ModelKind kind = ModelKind::ald;
  MlpConfig mlp;
  MlpParams params;
  Preprocessing preprocessing;
  std::vector<std::string> feature_names;
  // CQRNN only: quantile grid and the pseudo value y* in original units.
  std::vector<double> grid;
  double y_star = 0.0;
  TrainLog log;
};

struct FitOptions {
  TrainConfig train;
  // input_dim and heads are set by the fitting routine.
  MlpConfig mlp;
  bool standardize_features = true;
  bool scale_time = true;
};

inline std::vector<double> default_quantile_grid() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

namespace detail {

inline Preprocessing fit_preprocessing(const Dataset& train, const FitOptions& opt) {
  Preprocessing prep;
  prep.features = opt.standardize_features ? FeatureTransform::fit(train)
                                           : FeatureTransform::identity(train.feature_dim());
  if (opt.scale_time) {
    double mean = 0.0;
    for (const auto& r : train.records) mean += r.y;
    mean /= static_cast<double>(train.size());
    if (mean > 0.0 && std::isfinite(mean)) prep.time_scale = mean;
    else log_warning("training times have a non-positive mean; time scaling disabled");
  }
  return prep;
}

inline Eigen::MatrixXd design_matrix(const Dataset& data, const FeatureTransform& t) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(t.dim()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = t.apply(data.records[i].x);
    for (std::size_t j = 0; j < z.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = z[j];
  }
  return x;
}

inline void check_train(const Dataset& train) {
  if (train.empty()) throw std::invalid_argument("fit: empty training set");
  if (train.feature_dim() == 0) throw std::invalid_argument("fit: dataset has no covariates");
  for (const auto& r : train.records)
    if (!std::isfinite(r.y)) throw DataError("fit: non-finite time in training data");
}

struct AldObjective {
  std::vector<SurvivalTarget> targets;

  // Start the heads near the marginal location and spread of the times.
  std::vector<double> initial_head_bias() const {
    double mean = 0.0, ss = 0.0;
    for (const auto& t : targets) mean += t.y;
    mean /= static_cast<double>(targets.size());
    for (const auto& t : targets) ss += (t.y - mean) * (t.y - mean);
    const double sd = std::sqrt(ss / static_cast<double>(targets.size()));
    return {std::log(std::max(mean, 1e-3)), std::log(std::max(sd, 1e-3)), 0.0};
  }

  double loss(const Eigen::MatrixXd& out, std::span<const std::size_t> rows, Eigen::MatrixXd* grad) {
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const AldParams p(out(r, 0), out(r, 1), out(r, 2));
      const auto& t = targets[rows[i]];
      const auto term = t.event ? ald_nll_observed(t.y, p) : ald_nll_censored(t.y, p);
      total += term.value;
      if (grad)
        for (Eigen::Index j = 0; j < 3; ++j) (*grad)(r, j) = term.grad[static_cast<std::size_t>(j)] * inv_n;
    }
    return total * inv_n;
  }
};

struct LogNormObjective {
  std::vector<SurvivalTarget> targets;

  std::vector<double> initial_head_bias() const {
    double mean = 0.0, ss = 0.0;
    for (const auto& t : targets) mean += std::log(t.y);
    mean /= static_cast<double>(targets.size());
    for (const auto& t : targets) ss += (std::log(t.y) - mean) * (std::log(t.y) - mean);
    const double sd = std::max(std::sqrt(ss / static_cast<double>(targets.size())), 1e-3);
    // Inverse softplus.
    return {mean, sd + std::log(-std::expm1(-sd))};
  }

  double loss(const Eigen::MatrixXd& out, std::span<const std::size_t> rows, Eigen::MatrixXd* grad) {
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const LogNormParams p(out(r, 0), out(r, 1));
      const auto& t = targets[rows[i]];
      const auto term = lognorm_nll(t.y, t.event, p);
      total += term.value;
      if (grad) {
        (*grad)(r, 0) = term.grad[0] * inv_n;
        (*grad)(r, 1) = term.grad[1] * inv_n;
      }
    }
    return total * inv_n;
  }
};

// Pinball loss summed over the grid for observed records; Portnoy-split loss
// for censored ones. q_c is re-estimated at the start of every epoch as the
// grid level whose current prediction lies closest to the censoring time.
struct CqrObjective {
  std::vector<SurvivalTarget> targets;
  std::vector<double> grid;
  double y_star = 0.0;
  std::vector<double> q_c;

  std::vector<double> initial_head_bias() const {
    std::vector<double> y;
    for (const auto& t : targets) y.push_back(t.y);
    std::sort(y.begin(), y.end());
    std::vector<double> bias;
    for (double q : grid) bias.push_back(y[static_cast<std::size_t>(q * static_cast<double>(y.size() - 1))]);
    return bias;
  }

  void begin_epoch(const MlpParams& params, const MlpConfig& mlp, const Eigen::MatrixXd& x,
                   std::span<const std::size_t>) {
    const Eigen::MatrixXd out = forward_batch(params, mlp, x, false, nullptr);
    q_c.assign(targets.size(), grid.front());
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i].event) continue;
      std::size_t best = 0;
      double best_gap = std::abs(out(static_cast<Eigen::Index>(i), 0) - targets[i].y);
      for (std::size_t k = 1; k < grid.size(); ++k) {
        const double gap = std::abs(out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) -
                                    targets[i].y);
        if (gap < best_gap) best_gap = gap, best = k;
      }
      q_c[i] = grid[best];
    }
  }

  double loss(const Eigen::MatrixXd& out, std::span<const std::size_t> rows, Eigen::MatrixXd* grad) {
    if (q_c.size() != targets.size())
      throw std::logic_error("CqrObjective: begin_epoch was not called");
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto& t = targets[rows[i]];
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        const double theta = out(r, c);
        double value, g;
        if (t.event) {
          value = pinball_loss(t.y, theta, grid[k]);
          g = pinball_grad(t.y, theta, grid[k]);
        } else {
          const auto w = portnoy_weight_checked(grid[k], q_c[rows[i]]);
          value = cqr_censored_loss(t.y, y_star, theta, grid[k], w.value);
          g = cqr_censored_grad(t.y, y_star, theta, grid[k], w.value);
        }
        total += value;
        if (grad) (*grad)(r, c) = g * inv_n;
      }
    }
    return total * inv_n;
  }
};

inline MlpConfig with_heads(MlpConfig mlp, std::size_t input_dim, std::vector<Activation> heads) {
  mlp.input_dim = input_dim;
  mlp.heads = std::move(heads);
  return mlp;
}

}  // namespace detail

inline SurvivalModel fit_ald(const Dataset& train, const FitOptions& options, std::uint64_t seed) {
  detail::check_train(train);
  SurvivalModel model;
  model.kind = ModelKind::ald;
  model.feature_names = train.feature_names;
  model.preprocessing = detail::fit_preprocessing(train, options);
  model.mlp = detail::with_heads(options.mlp, train.feature_dim(),
                                 {Activation::exp, Activation::exp, Activation::exp});
  detail::AldObjective objective;
  for (const auto& r : train.records)
    objective.targets.push_back({r.y / model.preprocessing.time_scale, r.event});
  TrainConfig cfg = options.train;
  cfg.seed = seed;
  auto net = aldsurv::train(detail::design_matrix(train, model.preprocessing.features), objective,
                           model.mlp, cfg);
  model.params = std::move(net.params);
  model.log = std::move(net.log);
  return model;
}

inline SurvivalModel fit_lognorm(const Dataset& train, const FitOptions& options, std::uint64_t seed) {
  detail::check_train(train);
  SurvivalModel model;
  model.kind = ModelKind::lognorm;
  model.feature_names = train.feature_names;
  model.preprocessing = detail::fit_preprocessing(train, options);
  model.mlp = detail::with_heads(options.mlp, train.feature_dim(),
                                 {Activation::identity, Activation::softplus});
  detail::LogNormObjective objective;
  constexpr double min_time = 1e-6;
  std::size_t shifted = 0;
  for (const auto& r : train.records) {
    double y = r.y / model.preprocessing.time_scale;
    if (y < min_time) y = min_time, ++shifted;
    objective.targets.push_back({y, r.event});
  }
  if (shifted > 0)
    log_warning("fit_lognorm: " + std::to_string(shifted) + " times below 1e-6 raised to 1e-6");
  TrainConfig cfg = options.train;
  cfg.seed = seed;
  auto net = aldsurv::train(detail::design_matrix(train, model.preprocessing.features), objective,
                           model.mlp, cfg);
  model.params = std::move(net.params);
  model.log = std::move(net.log);
  return model;
}

inline SurvivalModel fit_cqrnn(const Dataset& train, const FitOptions& options, std::uint64_t seed,
                               std::vector<double> grid = default_quantile_grid()) {
  detail::check_train(train);
  if (grid.empty()) throw std::invalid_argument("fit_cqrnn: empty quantile grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    detail::require_probability(grid[k], "fit_cqrnn grid");
    if (k > 0 && !(grid[k] > grid[k - 1]))
      throw std::invalid_argument("fit_cqrnn: grid must be strictly increasing");
  }
  SurvivalModel model;
  model.kind = ModelKind::cqrnn;
  model.feature_names = train.feature_names;
  model.preprocessing = detail::fit_preprocessing(train, options);
  model.mlp = detail::with_heads(options.mlp, train.feature_dim(),
                                 std::vector<Activation>(grid.size(), Activation::identity));
  model.grid = grid;

  double max_y = train.records.front().y;
  for (const auto& r : train.records) max_y = std::max(max_y, r.y);
  model.y_star = 1.2 * max_y;

  detail::CqrObjective objective;
  objective.grid = grid;
  objective.y_star = model.y_star / model.preprocessing.time_scale;
  for (const auto& r : train.records)
    objective.targets.push_back({r.y / model.preprocessing.time_scale, r.event});
  TrainConfig cfg = options.train;
  cfg.seed = seed;
  auto net = aldsurv::train(detail::design_matrix(train, model.preprocessing.features), objective,
                           model.mlp, cfg);
  model.params = std::move(net.params);
  model.log = std::move(net.log);
  return model;
}

inline SurvivalModel fit(ModelKind kind, const Dataset& train, const FitOptions& options,
                         std::uint64_t seed) {
  switch (kind) {
    case ModelKind::ald: return fit_ald(train, options, seed);
    case ModelKind::cqrnn: return fit_cqrnn(train, options, seed);
    case ModelKind::lognorm: return fit_lognorm(train, options, seed);
  }
  throw std::invalid_argument("fit: unknown model kind");
}

inline std::vector<PredictedDistribution> predict(const SurvivalModel& model, const Dataset& data) {
  if (data.feature_dim() != model.mlp.input_dim)
    throw std::invalid_argument("predict: expected " + std::to_string(model.mlp.input_dim) +
                                " covariates, got " + std::to_string(data.feature_dim()));
  const Eigen::MatrixXd out = forward_batch(
      model.params, model.mlp, detail::design_matrix(data, model.preprocessing.features), false, nullptr);
  const double s = model.preprocessing.time_scale;
  std::vector<PredictedDistribution> preds;
  preds.reserve(data.size());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    switch (model.kind) {
      case ModelKind::ald:
        preds.emplace_back(AldParams(out(i, 0) * s, out(i, 1) * s, out(i, 2)));
        break;
      case ModelKind::lognorm:
        preds.emplace_back(LogNormParams(out(i, 0) + std::log(s), out(i, 1)));
        break;
      case ModelKind::cqrnn: {
        QuantileCurve curve{model.grid, {}, model.y_star};
        for (Eigen::Index k = 0; k < out.cols(); ++k) curve.theta.push_back(out(i, k) * s);
        std::sort(curve.theta.begin(), curve.theta.end());
        preds.emplace_back(std::move(curve));
        break;
      }
    }
  }
  return preds;
}

inline PredictedDistribution predict(const SurvivalModel& model, const std::vector<double>& x) {
  Dataset one{model.feature_names, {SurvivalRecord{x, 0.0, false, std::nullopt}}};
  if (x.size() != model.mlp.input_dim)
    throw std::invalid_argument("predict: expected " + std::to_string(model.mlp.input_dim) +
                                " covariates, got " + std::to_string(x.size()));
  one.feature_names.resize(x.size());
  return predict(model, one).front();
}

// Point estimate used for MAE and the concordance risk score.
inline PointKind default_point_kind(ModelKind kind) {
  return kind == ModelKind::cqrnn ? PointKind::median : PointKind::mean;
}

inline std::vector<DistributionAdapter> make_adapters(const std::vector<PredictedDistribution>& preds) {
  std::vector<DistributionAdapter> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.emplace_back(p);
  return out;
}

inline std::vector<double> point_estimates(const std::vector<PredictedDistribution>& preds,
                                           PointKind kind) {
  std::vector<double> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(point_estimate(p, kind));
  return out;
}

struct NegativeSupportSummary {
  double p50;
  double p75;
  double p95;
};

// Percentiles of the predicted probability mass below zero, F(0 | x).
inline NegativeSupportSummary negative_support_diagnostic(const SurvivalModel& model,
                                                          const Dataset& test) {
  if (model.kind != ModelKind::ald)
    throw std::invalid_argument("negative_support_diagnostic: requires an ALD model");
  if (test.empty()) throw std::invalid_argument("negative_support_diagnostic: empty test set");
  std::vector<double> f0;
  for (const auto& p : predict(model, test)) f0.push_back(ald_cdf(0.0, std::get<AldParams>(p)));
  std::sort(f0.begin(), f0.end());
  auto pct = [&](double p) {
    const double h = p * static_cast<double>(f0.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, f0.size() - 1);
    return f0[lo] + (h - static_cast<double>(lo)) * (f0[hi] - f0[lo]);
  };
  return {pct(0.50), pct(0.75), pct(0.95)};
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr int model_format_version = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Eigen::MatrixXd m(rows, cols);
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows)
    throw DataError("model file: matrix row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = data.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError("model file: matrix column count mismatch");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::json model_to_json(const SurvivalModel& m) {
  using nlohmann::json;
  json heads = json::array();
  for (auto h : m.mlp.heads) heads.push_back(to_string(h));
  json hidden = json::array();
  for (const auto& layer : m.params.hidden)
    hidden.push_back({{"weight", detail::matrix_to_json(layer.weight)},
                      {"bias", detail::vector_to_json(layer.bias)}});
  std::vector<int> passthrough;
  for (bool b : m.preprocessing.features.passthrough) passthrough.push_back(b ? 1 : 0);
  return {
      {"format", "aldsurv-model"},
      {"version", model_format_version},
      {"kind", to_string(m.kind)},
      {"feature_names", m.feature_names},
      {"preprocessing",
       {{"feature_mean", m.preprocessing.features.mean},
        {"feature_scale", m.preprocessing.features.scale},
        {"passthrough", passthrough},
        {"time_scale", m.preprocessing.time_scale}}},
      {"grid", m.grid},
      {"y_star", m.y_star},
      {"mlp",
       {{"input_dim", m.mlp.input_dim},
        {"hidden_dims", m.mlp.hidden_dims},
        {"heads", heads},
        {"dropout_rate", m.mlp.dropout_rate},
        {"residual", m.mlp.residual}}},
      {"params",
       {{"hidden", hidden},
        {"skip", detail::matrix_to_json(m.params.skip)},
        {"head",
         {{"weight", detail::matrix_to_json(m.params.head.weight)},
          {"bias", detail::vector_to_json(m.params.head.bias)}}}}},
      {"train_log",
       {{"best_epoch", m.log.best_epoch},
        {"epochs_run", m.log.epochs.empty() ? 0 : m.log.epochs.back().epoch},
        {"stopped_early", m.log.stopped_early}}},
  };
}

inline SurvivalModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "aldsurv-model")
      throw DataError("model file: unrecognized format tag");
    const int version = j.at("version").get<int>();
    if (version != model_format_version)
      throw DataError("model file: unsupported version " + std::to_string(version));
    SurvivalModel m;
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    const auto& prep = j.at("preprocessing");
    m.preprocessing.features.mean = prep.at("feature_mean").get<std::vector<double>>();
    m.preprocessing.features.scale = prep.at("feature_scale").get<std::vector<double>>();
    for (int b : prep.at("passthrough").get<std::vector<int>>())
      m.preprocessing.features.passthrough.push_back(b != 0);
    m.preprocessing.time_scale = prep.at("time_scale").get<double>();
    m.grid = j.at("grid").get<std::vector<double>>();
    m.y_star = j.at("y_star").get<double>();
    const auto& mlp = j.at("mlp");
    m.mlp.input_dim = mlp.at("input_dim").get<std::size_t>();
    m.mlp.hidden_dims = mlp.at("hidden_dims").get<std::vector<std::size_t>>();
    m.mlp.heads.clear();
    for (const auto& h : mlp.at("heads")) m.mlp.heads.push_back(activation_from_string(h.get<std::string>()));
    m.mlp.dropout_rate = mlp.at("dropout_rate").get<double>();
    m.mlp.residual = mlp.at("residual").get<bool>();
    m.mlp.validate();

    const auto& p = j.at("params");
    for (const auto& layer : p.at("hidden"))
      m.params.hidden.push_back({detail::matrix_from_json(layer.at("weight")),
                                 detail::vector_from_json(layer.at("bias"))});
    m.params.skip = detail::matrix_from_json(p.at("skip"));
    m.params.head = {detail::matrix_from_json(p.at("head").at("weight")),
                     detail::vector_from_json(p.at("head").at("bias"))};
    if (!m.params.same_shape(MlpParams::zeros(m.mlp)))
      throw DataError("model file: parameter shapes do not match the network configuration");
    if (m.preprocessing.features.dim() != m.mlp.input_dim ||
        m.preprocessing.features.scale.size() != m.mlp.input_dim ||
        m.preprocessing.features.passthrough.size() != m.mlp.input_dim)
      throw DataError("model file: preprocessing does not match input_dim");
    if (m.kind == ModelKind::cqrnn && m.grid.size() != m.mlp.head_count())
      throw DataError("model file: quantile grid does not match the head count");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

inline void save_model(const SurvivalModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << model_to_json(m).dump(1) << '\n';
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline SurvivalModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace aldsurv
