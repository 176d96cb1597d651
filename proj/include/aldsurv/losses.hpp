#pragma once

// Censoring-aware training objectives with analytic parameter gradients.
//
// The ALD observed-event term is the exact negative log density, including
// the -log(sqrt 2) constant. Some write-ups drop that constant; keeping it
// makes the value a true NLL and leaves every gradient unchanged.
//
// Kinks (y == theta for the ALD, y == theta_q for the pinball loss) take the
// derivative of the y >= theta branch.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "aldsurv/core.hpp"
#include "aldsurv/distributions.hpp"

namespace aldsurv {

// One record's loss contribution and its gradient with respect to the N
// distribution parameters driving it.
template <std::size_t N>
struct LossTerm {
  double value = 0.0;
  std::array<double, N> grad{};
};

// Gradient order: (theta, sigma, kappa).
using AldLossTerm = LossTerm<3>;
// Gradient order: (mu, eta).
using LogNormLossTerm = LossTerm<2>;

enum class Reduction { sum, mean };

// -log f_ALD(y).
inline AldLossTerm ald_nll_observed(double y, const AldParams& p) {
  const double s = p.sigma();
  const double k = p.kappa();
  const double common_dk = -1.0 / k + 2.0 * k / (1.0 + k * k);
  AldLossTerm out;
  out.value = -ald_log_pdf(y, p);
  if (y >= p.theta()) {
    const double d = y - p.theta();
    out.grad = {-detail::sqrt2 * k / s,
                1.0 / s - detail::sqrt2 * k * d / (s * s),
                common_dk + detail::sqrt2 * d / s};
  } else {
    const double d = p.theta() - y;
    out.grad = {detail::sqrt2 / (s * k),
                1.0 / s - detail::sqrt2 * d / (s * s * k),
                common_dk - detail::sqrt2 * d / (s * k * k)};
  }
  return out;
}

// -log S_ALD(y) for a record censored at y.
inline AldLossTerm ald_nll_censored(double y, const AldParams& p) {
  const double s = p.sigma();
  const double k = p.kappa();
  const double k2 = k * k;
  AldLossTerm out;
  if (y >= p.theta()) {
    const double d = y - p.theta();
    out.value = std::log1p(k2) + detail::sqrt2 * k * d / s;
    out.grad = {-detail::sqrt2 * k / s,
                -detail::sqrt2 * k * d / (s * s),
                2.0 * k / (1.0 + k2) + detail::sqrt2 * d / s};
    return out;
  }
  // S = 1 - u with u = k^2/(1+k^2) * exp(-a), a = sqrt2 (theta - y) / (s k).
  const double a = detail::sqrt2 * (p.theta() - y) / (s * k);
  const double u = k2 / (1.0 + k2) * std::exp(-a);
  const double odds = u / (1.0 - u);
  out.value = -std::log1p(-u);
  out.grad = {-odds * detail::sqrt2 / (s * k),
              odds * a / s,
              odds * (2.0 / (k * (1.0 + k2)) + a / k)};
  return out;
}

struct SurvivalTarget {
  double y;
  bool event;
};

struct AldBatchLoss {
  double total = 0.0;
  std::vector<std::array<double, 3>> grads;
};

// Censored ALD likelihood over a batch: observed terms for event records and
// survival terms for censored ones. With Reduction::mean both the total and
// the per-record gradients are divided by the batch size.
inline AldBatchLoss ald_batch_loss(std::span<const SurvivalTarget> records,
                                   std::span<const AldParams> params,
                                   Reduction reduction = Reduction::sum) {
  if (records.size() != params.size())
    throw std::invalid_argument("ald_batch_loss: records and params differ in length");
  AldBatchLoss out;
  out.grads.resize(records.size());
  const double scale =
      (reduction == Reduction::mean && !records.empty()) ? 1.0 / records.size() : 1.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto term = records[i].event ? ald_nll_observed(records[i].y, params[i])
                                       : ald_nll_censored(records[i].y, params[i]);
    out.total += term.value;
    for (std::size_t j = 0; j < 3; ++j) out.grads[i][j] = scale * term.grad[j];
  }
  out.total *= scale;
  return out;
}

// ---------------------------------------------------------------------------
// Quantile regression pieces used by the CQRNN baseline.

inline double pinball_loss(double y, double theta_q, double q) {
  detail::require_probability(q, "pinball_loss");
  return (y - theta_q) * (q - (theta_q > y ? 1.0 : 0.0));
}

// d pinball / d theta_q.
inline double pinball_grad(double y, double theta_q, double q) {
  detail::require_probability(q, "pinball_grad");
  return -(q - (theta_q > y ? 1.0 : 0.0));
}

struct PortnoyWeight {
  double value;
  bool clamped;
};

// w = (q - q_c) / (1 - q_c), clamped to [0, 1]. The flag reports whether the
// raw value fell outside that range.
inline PortnoyWeight portnoy_weight_checked(double q, double q_c) {
  if (!(q_c < 1.0) || !std::isfinite(q_c))
    throw std::domain_error("portnoy_weight: q_c must be finite and < 1");
  const double raw = (q - q_c) / (1.0 - q_c);
  if (raw < 0.0) return {0.0, true};
  if (raw > 1.0) return {1.0, true};
  return {raw, false};
}

inline double portnoy_weight(double q, double q_c) {
  return portnoy_weight_checked(q, q_c).value;
}

// Portnoy split of a censored record between its censoring time y and the
// pseudo value y_star.
inline double cqr_censored_loss(double y, double y_star, double theta_q, double q, double w) {
  return w * pinball_loss(y, theta_q, q) + (1.0 - w) * pinball_loss(y_star, theta_q, q);
}

inline double cqr_censored_grad(double y, double y_star, double theta_q, double q, double w) {
  return w * pinball_grad(y, theta_q, q) + (1.0 - w) * pinball_grad(y_star, theta_q, q);
}

// ---------------------------------------------------------------------------
// Log-normal censored likelihood.

inline LogNormLossTerm lognorm_nll(double y, bool event, const LogNormParams& p) {
  if (!(y > 0.0) || !std::isfinite(y))
    throw DataError("lognorm_nll: time must be finite and > 0");
  const double eta = p.eta();
  const double z = (std::log(y) - p.mu()) / eta;
  LogNormLossTerm out;
  if (event) {
    out.value = -lognormal_log_pdf(y, p);
    out.grad = {-z / eta, 1.0 / eta - z * z / eta};
    return out;
  }
  const double log_sf = std_normal_log_sf(z);
  out.value = -log_sf;
  // Hazard of the standard normal at z (inverse Mills ratio).
  const double hazard = std::exp(std_normal_log_pdf(z) - log_sf);
  out.grad = {-hazard / eta, -hazard * z / eta};
  return out;
}

}  // namespace aldsurv
