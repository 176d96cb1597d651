#pragma once

// Closed-form math for the asymmetric Laplace distribution (ALD), the
// log-normal distribution, and the standard normal helpers they need.
//
// The log-domain density and survival functions are the primary forms; the
// linear-domain versions exponentiate them, so extreme tails never underflow
// before a log is taken. At the branch point y == theta the y >= theta branch
// is used everywhere.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace aldsurv {

namespace detail {

inline constexpr double sqrt2 = std::numbers::sqrt2;
inline constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
inline constexpr double log_sqrt_2pi = 0.91893853320467274178032973640562;

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

inline void require_probability(double q, const char* fn) {
  if (!(q > 0.0 && q < 1.0))
    throw std::domain_error(std::string(fn) + ": probability must lie in (0, 1), got " +
                            std::to_string(q));
}

}  // namespace detail

// Location / scale / asymmetry triple of an asymmetric Laplace distribution.
class AldParams {
 public:
  AldParams(double theta, double sigma, double kappa)
      : theta_(theta), sigma_(sigma), kappa_(kappa) {
    detail::require_finite(theta, "AldParams.theta");
    detail::require_finite(sigma, "AldParams.sigma");
    detail::require_finite(kappa, "AldParams.kappa");
    if (!(sigma > 0.0)) throw std::invalid_argument("AldParams.sigma must be > 0");
    if (!(kappa > 0.0)) throw std::invalid_argument("AldParams.kappa must be > 0");
  }

  double theta() const { return theta_; }
  double sigma() const { return sigma_; }
  double kappa() const { return kappa_; }

  // Rate of the exponential tail above theta.
  double upper_rate() const { return detail::sqrt2 * kappa_ / sigma_; }
  // Rate of the exponential tail below theta.
  double lower_rate() const { return detail::sqrt2 / (sigma_ * kappa_); }
  // Probability mass below theta, kappa^2 / (1 + kappa^2).
  double mass_below_mode() const { return kappa_ * kappa_ / (1.0 + kappa_ * kappa_); }

  bool operator==(const AldParams&) const = default;

 private:
  double theta_;
  double sigma_;
  double kappa_;
};

// Log-scale mean and standard deviation of a log-normal distribution.
class LogNormParams {
 public:
  LogNormParams(double mu, double eta) : mu_(mu), eta_(eta) {
    detail::require_finite(mu, "LogNormParams.mu");
    detail::require_finite(eta, "LogNormParams.eta");
    if (!(eta > 0.0)) throw std::invalid_argument("LogNormParams.eta must be > 0");
  }

  double mu() const { return mu_; }
  double eta() const { return eta_; }

  bool operator==(const LogNormParams&) const = default;

 private:
  double mu_;
  double eta_;
};

struct AldMoments {
  double mean;
  double mode;
  double variance;
};

// ---------------------------------------------------------------------------
// Standard normal

inline double std_normal_log_pdf(double z) { return -0.5 * z * z - detail::log_sqrt_2pi; }

inline double std_normal_pdf(double z) { return std::exp(std_normal_log_pdf(z)); }

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * detail::inv_sqrt2); }

// log(1 - Phi(z)), accurate far into the upper tail.
inline double std_normal_log_sf(double z) {
  if (z < 25.0) return std::log(0.5 * std::erfc(z * detail::inv_sqrt2));
  // Asymptotic Mills-ratio series; relative error below 1e-12 for z >= 25.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(z) - detail::log_sqrt_2pi + std::log(series);
}

// Inverse of Phi. Acklam's rational approximation (relative error ~1.2e-9)
// followed by one Newton step on Phi.
inline double std_normal_quantile(double p) {
  detail::require_probability(p, "std_normal_quantile");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Newton refinement; in the upper half the residual is taken on the
  // survival side so it keeps full precision.
  const double density = std_normal_pdf(x);
  if (density > 0.0) {
    const double residual = p <= 0.5 ? std_normal_cdf(x) - p
                                     : (1.0 - p) - std_normal_cdf(-x);
    x -= residual / density;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Asymmetric Laplace

inline double ald_log_pdf(double y, const AldParams& p) {
  const double k = p.kappa();
  const double log_norm = std::log(detail::sqrt2 / p.sigma()) + std::log(k / (1.0 + k * k));
  if (y >= p.theta()) return log_norm - p.upper_rate() * (y - p.theta());
  return log_norm - p.lower_rate() * (p.theta() - y);
}

inline double ald_pdf(double y, const AldParams& p) { return std::exp(ald_log_pdf(y, p)); }

// log S(y) = log(1 - F(y)).
inline double ald_log_survival(double y, const AldParams& p) {
  const double k2 = p.kappa() * p.kappa();
  if (y >= p.theta()) return -std::log1p(k2) - p.upper_rate() * (y - p.theta());
  const double below = p.mass_below_mode() * std::exp(-p.lower_rate() * (p.theta() - y));
  return std::log1p(-below);
}

inline double ald_survival(double y, const AldParams& p) {
  if (y >= p.theta()) return std::exp(ald_log_survival(y, p));
  return 1.0 - p.mass_below_mode() * std::exp(-p.lower_rate() * (p.theta() - y));
}

inline double ald_cdf(double y, const AldParams& p) {
  if (y >= p.theta()) {
    const double k2 = p.kappa() * p.kappa();
    return 1.0 - std::exp(-p.upper_rate() * (y - p.theta())) / (1.0 + k2);
  }
  return p.mass_below_mode() * std::exp(-p.lower_rate() * (p.theta() - y));
}

inline double ald_quantile(double q, const AldParams& p) {
  detail::require_probability(q, "ald_quantile");
  const double k = p.kappa();
  const double k2 = k * k;
  if (q <= p.mass_below_mode()) {
    return p.theta() + p.sigma() * k * detail::inv_sqrt2 * std::log((1.0 + k2) / k2 * q);
  }
  return p.theta() - p.sigma() / (detail::sqrt2 * k) * std::log((1.0 + k2) * (1.0 - q));
}

inline AldMoments ald_moments(const AldParams& p) {
  const double k = p.kappa();
  const double s = p.sigma();
  return AldMoments{
      .mean = p.theta() + s * detail::inv_sqrt2 * (1.0 / k - k),
      .mode = p.theta(),
      .variance = 0.5 * s * s * (1.0 / (k * k) + k * k),
  };
}

// Quantile-level reparameterization: q = kappa^2 / (kappa^2 + 1).
inline double kappa_to_q(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    throw std::domain_error("kappa_to_q: kappa must be finite and > 0");
  const double k2 = kappa * kappa;
  return k2 / (k2 + 1.0);
}

inline double q_to_kappa(double q) {
  detail::require_probability(q, "q_to_kappa");
  return std::sqrt(q / (1.0 - q));
}

// ---------------------------------------------------------------------------
// Log-normal. For y <= 0 the density and cdf are 0 and the survival is 1.

inline double lognormal_log_pdf(double y, const LogNormParams& p) {
  if (!(y > 0.0)) return -std::numeric_limits<double>::infinity();
  const double z = (std::log(y) - p.mu()) / p.eta();
  return std_normal_log_pdf(z) - std::log(y) - std::log(p.eta());
}

inline double lognormal_pdf(double y, const LogNormParams& p) {
  if (!(y > 0.0)) return 0.0;
  return std::exp(lognormal_log_pdf(y, p));
}

inline double lognormal_cdf(double y, const LogNormParams& p) {
  if (!(y > 0.0)) return 0.0;
  return std_normal_cdf((std::log(y) - p.mu()) / p.eta());
}

inline double lognormal_log_survival(double y, const LogNormParams& p) {
  if (!(y > 0.0)) return 0.0;
  return std_normal_log_sf((std::log(y) - p.mu()) / p.eta());
}

inline double lognormal_quantile(double q, const LogNormParams& p) {
  detail::require_probability(q, "lognormal_quantile");
  return std::exp(p.mu() + p.eta() * std_normal_quantile(q));
}

inline double lognormal_median(const LogNormParams& p) { return std::exp(p.mu()); }

inline double lognormal_mean(const LogNormParams& p) {
  return std::exp(p.mu() + 0.5 * p.eta() * p.eta());
}

}  // namespace aldsurv
