#pragma once

// Independent reference computations shared by the unit suites and the
// acceptance binary. Each is a direct, unoptimized transcription of the
// definition and never calls into the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

// Product-limit estimate just before t, where `counted[i]` marks the records
// whose time is an event of the curve being estimated.
inline double km_before(const std::vector<double>& y, const std::vector<bool>& counted, double t) {
  std::vector<double> distinct;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (counted[i] && y[i] < t) distinct.push_back(y[i]);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  double s = 1.0;
  for (double u : distinct) {
    double at_risk = 0, d = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      at_risk += y[i] >= u ? 1 : 0;
      d += (y[i] == u && counted[i]) ? 1 : 0;
    }
    s *= 1.0 - d / at_risk;
  }
  return s;
}

// Concordance by enumerating unordered pairs. With `g_before` the pair
// anchored at the shorter time s gets weight g_before[s]^-2; pairs anchored at
// a zero weight are dropped. Returns NaN when no pair is comparable.
inline double concordance(const std::vector<double>& risk, const std::vector<double>& y,
                          const std::vector<bool>& e, const std::vector<double>* g_before, double tau) {
  double num = 0, den = 0;
  for (std::size_t a = 0; a < y.size(); ++a) {
    for (std::size_t b = a + 1; b < y.size(); ++b) {
      if (y[a] == y[b]) continue;
      const std::size_t s = y[a] < y[b] ? a : b;
      const std::size_t l = s == a ? b : a;
      if (!e[s] || !(y[s] < tau)) continue;
      double w = 1.0;
      if (g_before) {
        const double g = (*g_before)[s];
        if (g <= 0) continue;
        w = 1.0 / (g * g);
      }
      den += w;
      if (risk[s] > risk[l]) num += w;
      else if (risk[s] == risk[l]) num += 0.5 * w;
    }
  }
  return den > 0 ? num / den : std::nan("");
}

struct BhDecision {
  std::vector<bool> rejected;
  std::vector<double> adjusted;
};

// Rejects every p at or below the largest sorted p_(k) with p_(k) <= k alpha / m.
inline BhDecision benjamini_hochberg(const std::vector<double>& p, double alpha) {
  const std::size_t m = p.size();
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  double cutoff = -1.0;
  for (std::size_t k = 1; k <= m; ++k)
    if (sorted[k - 1] <= static_cast<double>(k) * alpha / static_cast<double>(m)) cutoff = sorted[k - 1];
  BhDecision out;
  for (std::size_t i = 0; i < m; ++i) {
    out.rejected.push_back(p[i] <= cutoff);
    double q = 1.0;
    for (std::size_t j = 1; j <= m; ++j)
      if (sorted[j - 1] >= p[i]) q = std::min(q, sorted[j - 1] * static_cast<double>(m) / static_cast<double>(j));
    out.adjusted.push_back(q);
  }
  return out;
}

}  // namespace oracle
