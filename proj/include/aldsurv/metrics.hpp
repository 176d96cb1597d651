#pragma once

// Evaluation suite: MAE, Kaplan-Meier, IPCW Brier score and IBS, Harrell's
// and Uno's concordance, PIT-based calibration curves and CensDcal.
//
// Per-record predictive distributions are consumed through any type with
// `cdf(t)` and `quantile(q)` members (see the CdfLike concept).

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aldsurv/core.hpp"
#include "aldsurv/dataset.hpp"

namespace aldsurv {

template <class A>
concept CdfLike = requires(const A& a, double t) {
  { a.cdf(t) } -> std::convertible_to<double>;
  { a.quantile(t) } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Mean absolute error

// Synthetic mode scores every record against its uncensored time; real mode
// scores observed events only.
inline double mae(std::span<const double> predicted, std::span<const SurvivalRecord> records,
                  bool synthetic) {
  if (predicted.size() != records.size())
    throw std::invalid_argument("mae: predictions and records differ in length");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (synthetic) {
      if (!r.o_true) throw std::invalid_argument("mae: synthetic mode needs o_true on every record");
      sum += std::abs(*r.o_true - predicted[i]);
      ++count;
    } else if (r.event) {
      sum += std::abs(r.y - predicted[i]);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("mae: no records to score");
  return sum / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Kaplan-Meier

// Right-continuous step function: S(t) is the value at the largest stored
// time <= t, and 1 before the first.
struct StepSurvivalCurve {
  std::vector<double> times;
  std::vector<double> values;

  double at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  // S(t-): the value just before t.
  double left_limit(double t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

inline StepSurvivalCurve kaplan_meier(std::span<const double> times, const std::vector<bool>& events) {
  if (times.empty()) throw std::invalid_argument("kaplan_meier: empty input");
  if (times.size() != events.size())
    throw std::invalid_argument("kaplan_meier: times and events differ in length");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });

  StepSurvivalCurve curve;
  double s = 1.0;
  std::size_t at_risk = times.size();
  for (std::size_t i = 0; i < order.size();) {
    const double t = times[order[i]];
    std::size_t deaths = 0, total = 0;
    for (; i < order.size() && times[order[i]] == t; ++i, ++total) deaths += events[order[i]] ? 1 : 0;
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.values.push_back(s);
    }
    at_risk -= total;
  }
  return curve;
}

inline StepSurvivalCurve kaplan_meier(std::span<const SurvivalRecord> records) {
  std::vector<double> t;
  std::vector<bool> e;
  for (const auto& r : records) {
    t.push_back(r.y);
    e.push_back(r.event);
  }
  return kaplan_meier(t, e);
}

// KM estimate of the censoring survival function G (event indicator flipped).
inline StepSurvivalCurve censoring_curve(std::span<const SurvivalRecord> records) {
  std::vector<double> t;
  std::vector<bool> flipped;
  for (const auto& r : records) {
    t.push_back(r.y);
    flipped.push_back(!r.event);
  }
  return kaplan_meier(t, flipped);
}

// ---------------------------------------------------------------------------
// Brier score and IBS

struct BrierResult {
  double value = 0.0;
  // Records whose IPCW denominator was zero and were left out of the sum.
  std::size_t skipped = 0;
};

template <CdfLike A>
BrierResult brier_score_detailed(double t, std::span<const SurvivalRecord> test,
                                 std::span<const A> adapters, const StepSurvivalCurve& g) {
  if (test.size() != adapters.size())
    throw std::invalid_argument("brier_score: records and adapters differ in length");
  if (test.empty()) throw std::invalid_argument("brier_score: empty test set");
  BrierResult out;
  const double g_t = g.at(t);
  double sum = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& r = test[i];
    if (r.y <= t && r.event) {
      const double w = g.left_limit(r.y);
      if (!(w > 0.0)) {
        ++out.skipped;
        continue;
      }
      const double f = adapters[i].cdf(t);
      sum += (1.0 - f) * (1.0 - f) / w;
    } else if (r.y > t) {
      if (!(g_t > 0.0)) {
        ++out.skipped;
        continue;
      }
      const double f = adapters[i].cdf(t);
      sum += f * f / g_t;
    }
  }
  out.value = sum / static_cast<double>(test.size());
  return out;
}

template <CdfLike A>
double brier_score(double t, std::span<const SurvivalRecord> test, std::span<const A> adapters,
                   const StepSurvivalCurve& g) {
  return brier_score_detailed(t, test, adapters, g).value;
}

// Linear-interpolation sample quantile (the usual "type 7" definition).
inline double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile: empty input");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct IbsResult {
  double value = 0.0;
  std::size_t skipped = 0;
};

// Trapezoid average of BS(t) over `points` equally spaced times between the
// 0.1 and 0.9 quantiles of the training times.
template <CdfLike A>
IbsResult ibs_detailed(std::span<const SurvivalRecord> test, std::span<const A> adapters,
                       const StepSurvivalCurve& g, std::span<const double> train_times,
                       std::size_t points = 100) {
  if (points < 2) throw std::invalid_argument("ibs: need at least 2 grid points");
  std::vector<double> tt(train_times.begin(), train_times.end());
  const double lo = empirical_quantile(tt, 0.1);
  const double hi = empirical_quantile(tt, 0.9);
  if (!(hi > lo)) throw std::invalid_argument("ibs: degenerate time interval (q10 == q90)");
  IbsResult out;
  double area = 0.0;
  double prev = 0.0;
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) {
    const double t = k + 1 == points ? hi : lo + step * static_cast<double>(k);
    const auto bs = brier_score_detailed(t, test, adapters, g);
    out.skipped += bs.skipped;
    if (k > 0) area += 0.5 * (prev + bs.value) * step;
    prev = bs.value;
  }
  out.value = area / (hi - lo);
  return out;
}

template <CdfLike A>
double ibs(std::span<const SurvivalRecord> test, std::span<const A> adapters,
           const StepSurvivalCurve& g, std::span<const double> train_times) {
  return ibs_detailed(test, adapters, g, train_times).value;
}

// ---------------------------------------------------------------------------
// Concordance. Higher risk should go with shorter survival.

inline double harrells_c(std::span<const double> risk, std::span<const double> times,
                         const std::vector<bool>& events) {
  const std::size_t n = risk.size();
  if (times.size() != n || events.size() != n)
    throw std::invalid_argument("harrells_c: inputs differ in length");
  double concordant = 0.0;
  double comparable = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!events[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(times[i] < times[j])) continue;
      comparable += 1.0;
      if (risk[i] > risk[j]) concordant += 1.0;
      else if (risk[i] == risk[j]) concordant += 0.5;
    }
  }
  if (comparable == 0.0) throw std::invalid_argument("harrells_c: no comparable pairs");
  return concordant / comparable;
}

struct UnoResult {
  double value = 0.0;
  double tau = 0.0;
  std::size_t skipped = 0;
};

// IPCW concordance. Pair (i, j) is comparable when y_i < y_j, e_i = 1 and
// y_i < tau, and carries weight G(y_i-)^-2. Without tau, the largest event
// time in the test set is used.
inline UnoResult unos_c_detailed(const StepSurvivalCurve& g, std::span<const double> risk,
                                 std::span<const double> times, const std::vector<bool>& events,
                                 std::optional<double> tau = std::nullopt) {
  const std::size_t n = risk.size();
  if (times.size() != n || events.size() != n)
    throw std::invalid_argument("unos_c: inputs differ in length");
  UnoResult out;
  if (tau) {
    out.tau = *tau;
  } else {
    out.tau = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      if (events[i]) out.tau = std::max(out.tau, times[i]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!events[i] || !(times[i] < out.tau)) continue;
    const double gi = g.left_limit(times[i]);
    if (!(gi > 0.0)) {
      ++out.skipped;
      continue;
    }
    const double w = 1.0 / (gi * gi);
    for (std::size_t j = 0; j < n; ++j) {
      if (!(times[i] < times[j])) continue;
      den += w;
      if (risk[i] > risk[j]) num += w;
      else if (risk[i] == risk[j]) num += 0.5 * w;
    }
  }
  if (den == 0.0) throw std::invalid_argument("unos_c: no comparable pairs");
  out.value = num / den;
  return out;
}

inline double unos_c(const StepSurvivalCurve& g, std::span<const double> risk,
                     std::span<const double> times, const std::vector<bool>& events,
                     std::optional<double> tau = std::nullopt) {
  return unos_c_detailed(g, risk, times, events, tau).value;
}

// ---------------------------------------------------------------------------
// Calibration

enum class CalibrationVersion { survival, density };

struct CalibrationPoint {
  double target;
  double observed;
};

using CalibrationCurve = std::array<CalibrationPoint, 10>;

// PIT value F(y_i | x_i) per record.
template <CdfLike A>
std::vector<double> pit_values(std::span<const SurvivalRecord> test, std::span<const A> adapters) {
  if (test.size() != adapters.size())
    throw std::invalid_argument("pit_values: records and adapters differ in length");
  std::vector<double> pit(test.size());
  for (std::size_t i = 0; i < test.size(); ++i)
    pit[i] = std::clamp(adapters[i].cdf(test[i].y), 0.0, 1.0);
  return pit;
}

namespace detail {

// Fraction of one record's PIT mass inside [a, b]. An observed record is a
// point mass at its PIT; a censored record spreads its mass uniformly over
// (q, 1], and a censored record with q at 1 keeps a point mass at 1.
inline double pit_mass(double q, bool event, double a, double b) {
  if (event) return (q >= a && q <= b) ? 1.0 : 0.0;
  const double tail = 1.0 - q;
  if (tail <= 1e-12) return b >= 1.0 ? 1.0 : 0.0;
  return std::max(0.0, b - std::max(a, q)) / tail;
}

}  // namespace detail

inline CalibrationCurve calibration_from_pit(std::span<const double> pit,
                                             std::span<const SurvivalRecord> test,
                                             CalibrationVersion version) {
  if (pit.size() != test.size())
    throw std::invalid_argument("calibration: PIT values and records differ in length");
  if (test.empty()) throw std::invalid_argument("calibration: empty test set");
  CalibrationCurve curve{};
  const double n = static_cast<double>(test.size());
  for (int j = 1; j <= 10; ++j) {
    const double target = 0.1 * j;
    double a = 0.0, b = target;
    if (version == CalibrationVersion::density) {
      a = 0.5 - 0.05 * j;
      b = 0.5 + 0.05 * j;
    }
    if (j == 10) a = 0.0, b = 1.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) mass += detail::pit_mass(pit[i], test[i].event, a, b);
    curve[static_cast<std::size_t>(j - 1)] = {target, mass / n};
  }
  return curve;
}

template <CdfLike A>
CalibrationCurve calibration_curve(std::span<const SurvivalRecord> test, std::span<const A> adapters,
                                   CalibrationVersion version) {
  return calibration_from_pit(pit_values(test, adapters), test, version);
}

// 100 * sum_j (0.1 - zeta_j / N)^2 over the ten deciles of PIT mass.
inline double cens_dcal_from_pit(std::span<const double> pit, std::span<const SurvivalRecord> test) {
  const auto cumulative = calibration_from_pit(pit, test, CalibrationVersion::survival);
  double total = 0.0;
  double prev = 0.0;
  for (const auto& p : cumulative) {
    const double share = p.observed - prev;
    total += (0.1 - share) * (0.1 - share);
    prev = p.observed;
  }
  return 100.0 * total;
}

template <CdfLike A>
double cens_dcal(std::span<const SurvivalRecord> test, std::span<const A> adapters) {
  return cens_dcal_from_pit(pit_values(test, adapters), test);
}

struct LineFit {
  double slope;
  double intercept;
};

inline LineFit ols_fit(std::span<const CalibrationPoint> points) {
  if (points.size() < 2) throw std::invalid_argument("ols_fit: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.target;
    my += p.observed;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.target - mx) * (p.target - mx);
    sxy += (p.target - mx) * (p.observed - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("ols_fit: abscissae are all equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

// ---------------------------------------------------------------------------
// Full report

struct MetricReport {
  double mae = 0.0;
  double ibs = 0.0;
  double harrell_c = 0.0;
  double uno_c = 0.0;
  double censdcal = 0.0;
  double cal_S_slope = 0.0;
  double cal_S_intercept = 0.0;
  double cal_f_slope = 0.0;
  double cal_f_intercept = 0.0;

  static constexpr std::array<const char*, 9> names = {
      "mae",      "ibs",         "harrell_c",       "uno_c",      "censdcal",
      "cal_S_slope", "cal_S_intercept", "cal_f_slope", "cal_f_intercept"};

  std::array<double, 9> values() const {
    return {mae,      ibs,         harrell_c,       uno_c,      censdcal,
            cal_S_slope, cal_S_intercept, cal_f_slope, cal_f_intercept};
  }

  static MetricReport from_values(const std::array<double, 9>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
  }

  bool operator==(const MetricReport&) const = default;
};

struct EvaluationDiagnostics {
  std::size_t ipcw_skipped = 0;
  double uno_tau = 0.0;
};

// Scores one fitted model on a test set. `points` are the point estimates
// used for MAE and for the risk score (risk = -point estimate); MAE is
// divided by `time_scale` so it is reported in scaled units.
template <CdfLike A>
MetricReport evaluate_metrics(std::span<const SurvivalRecord> train,
                              std::span<const SurvivalRecord> test, std::span<const A> adapters,
                              std::span<const double> points, bool synthetic, double time_scale = 1.0,
                              EvaluationDiagnostics* diagnostics = nullptr) {
  if (adapters.size() != test.size() || points.size() != test.size())
    throw std::invalid_argument("evaluate_metrics: test, adapters and points differ in length");
  MetricReport m;
  const StepSurvivalCurve g = censoring_curve(train);

  m.mae = mae(points, test, synthetic) / time_scale;

  std::vector<double> train_times;
  for (const auto& r : train) train_times.push_back(r.y);
  const auto ibs_res = ibs_detailed(test, adapters, g, train_times);
  m.ibs = ibs_res.value;

  std::vector<double> risk(points.size()), times(test.size());
  std::vector<bool> ev(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    risk[i] = -points[i];
    times[i] = test[i].y;
    ev[i] = test[i].event;
  }
  m.harrell_c = harrells_c(risk, times, ev);
  const auto uno = unos_c_detailed(g, risk, times, ev);
  m.uno_c = uno.value;

  const auto pit = pit_values(test, adapters);
  m.censdcal = cens_dcal_from_pit(pit, test);
  const auto cal_s = calibration_from_pit(pit, test, CalibrationVersion::survival);
  const auto cal_f = calibration_from_pit(pit, test, CalibrationVersion::density);
  const auto fit_s = ols_fit(cal_s);
  const auto fit_f = ols_fit(cal_f);
  m.cal_S_slope = fit_s.slope;
  m.cal_S_intercept = fit_s.intercept;
  m.cal_f_slope = fit_f.slope;
  m.cal_f_intercept = fit_f.intercept;

  if (diagnostics) {
    diagnostics->ipcw_skipped = ibs_res.skipped + uno.skipped;
    diagnostics->uno_tau = uno.tau;
  }
  return m;
}

}  // namespace aldsurv
