#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aldsurv {

// Malformed or out-of-contract input data (CSV rows, times, event flags).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged or could not start.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LogLevel { debug, info, warning };

using LogSink = std::function<void(LogLevel, std::string_view)>;

namespace detail {

inline LogSink& log_sink_slot() {
  static LogSink sink = [](LogLevel level, std::string_view msg) {
    if (level == LogLevel::debug) return;
    std::clog << (level == LogLevel::warning ? "[warn] " : "[info] ") << msg << '\n';
  };
  return sink;
}

inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

// Replaces the process-wide log sink and returns the previous one.
inline LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(detail::log_mutex());
  auto old = std::move(detail::log_sink_slot());
  detail::log_sink_slot() = std::move(sink);
  return old;
}

inline void log(LogLevel level, std::string_view msg) {
  std::lock_guard lock(detail::log_mutex());
  if (detail::log_sink_slot()) detail::log_sink_slot()(level, msg);
}

inline void log_info(std::string_view msg) { log(LogLevel::info, msg); }
inline void log_warning(std::string_view msg) { log(LogLevel::warning, msg); }

// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seeded generator whose derived draws are bit-identical across platforms:
// only the raw mt19937_64 stream is used, never the implementation-defined
// std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: empty range");
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(two_pi * u2);
    has_spare_ = true;
    return radius * std::cos(two_pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace aldsurv
