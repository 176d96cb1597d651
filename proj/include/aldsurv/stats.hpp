#pragma once

// Summary statistics, two-sample t-tests and Benjamini-Hochberg FDR control.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "aldsurv/core.hpp"

namespace aldsurv {

struct SampleSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, n - 1 denominator
  std::size_t n = 0;
};

inline SampleSummary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty sample");
  SampleSummary s;
  s.n = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n < 2) {
    log_warning("summarize: a single value has no spread; std reported as 0");
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

enum class TTestKind { welch, student };

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

// Two-sided two-sample t-test. Welch's version does not assume equal
// variances; Student's pools them.
inline TTestResult t_test(std::span<const double> a, std::span<const double> b,
                          TTestKind kind = TTestKind::welch) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("t_test: each sample needs at least 2 values");
  const auto sa = summarize(a);
  const auto sb = summarize(b);
  const double na = static_cast<double>(sa.n), nb = static_cast<double>(sb.n);
  const double va = sa.std * sa.std, vb = sb.std * sb.std;
  const double diff = sa.mean - sb.mean;

  TTestResult r;
  double se2;
  if (kind == TTestKind::welch) {
    se2 = va / na + vb / nb;
    const double num = se2 * se2;
    const double den = (va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0);
    r.df = den > 0.0 ? num / den : na + nb - 2.0;
  } else {
    r.df = na + nb - 2.0;
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / r.df;
    se2 = pooled * (1.0 / na + 1.0 / nb);
  }
  if (!(se2 > 0.0)) {
    // Both samples constant: the means either coincide or differ surely.
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p_value = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = diff / std::sqrt(se2);
  const boost::math::students_t dist(r.df);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

struct BhResult {
  std::vector<bool> rejected;
  std::vector<double> adjusted;  // BH-adjusted p-values (q-values)
};

// Benjamini-Hochberg step-up: with sorted p_(1) <= ... <= p_(m), reject the
// k smallest where k is the largest index with p_(k) <= k * alpha / m.
inline BhResult benjamini_hochberg(std::span<const double> p, double alpha = 0.05) {
  const std::size_t m = p.size();
  BhResult out{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
  if (m == 0) return out;
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("benjamini_hochberg: p-values must lie in [0, 1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });

  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (p[order[i]] <= static_cast<double>(i + 1) * alpha / static_cast<double>(m)) k = i + 1;
  for (std::size_t i = 0; i < k; ++i) out.rejected[order[i]] = true;

  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    running = std::min(running, p[order[i]] * static_cast<double>(m) / static_cast<double>(i + 1));
    out.adjusted[order[i]] = running;
  }
  return out;
}

}  // namespace aldsurv
