#pragma once

// CSV ingestion, feature standardization and seeded train/test splits.
//
// CSV layout: UTF-8 text, one header row, configurable delimiter. Every
// column named in the schema must be present; missing values are rejected.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aldsurv/core.hpp"
#include "aldsurv/dataset.hpp"

namespace aldsurv {

struct DatasetSchema {
  // Empty means every column other than time/event/truth.
  std::vector<std::string> feature_columns;
  std::string time_column = "time";
  std::string event_column = "event";
  // Uncensored-time column written by the synthetic exporter. It is used
  // when present and required only when require_truth is set.
  std::optional<std::string> truth_column = "o_true";
  bool require_truth = false;
  char delimiter = ',';
  // Without a header the columns are addressed as c0, c1, ...
  bool header = true;
  // Synthetic Normal-family exports can contain negative draws.
  bool allow_negative_times = false;

  void validate() const {
    if (time_column == event_column)
      throw std::invalid_argument("DatasetSchema: time and event columns must differ");
    for (const auto& f : feature_columns) {
      if (f == time_column || f == event_column || (truth_column && f == *truth_column))
        throw std::invalid_argument("DatasetSchema: feature column '" + f +
                                    "' collides with a time/event column");
    }
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in, const DatasetSchema& schema,
                         const std::string& source = "<stream>") {
  schema.validate();
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> columns;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  };

  std::optional<std::string> pending;
  if (schema.header) {
    if (!next_line()) throw DataError(source + ": empty file, expected a header row");
    std::string_view header = line;
    if (header.size() >= 3 && header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
    for (auto f : detail::split_fields(header, schema.delimiter)) columns.emplace_back(f);
  } else {
    if (!next_line()) throw DataError(source + ": empty file");
    const auto n = detail::split_fields(line, schema.delimiter).size();
    for (std::size_t i = 0; i < n; ++i) columns.push_back("c" + std::to_string(i));
    pending = line;
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!index.emplace(columns[i], i).second)
      throw DataError(source + ": duplicate column '" + columns[i] + "'");
  }
  auto locate = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw DataError(source + ": missing column '" + name + "'");
    return it->second;
  };
  const std::size_t time_idx = locate(schema.time_column);
  const std::size_t event_idx = locate(schema.event_column);
  std::optional<std::size_t> truth_idx;
  if (schema.truth_column) {
    if (schema.require_truth || index.count(*schema.truth_column)) truth_idx = locate(*schema.truth_column);
  }

  Dataset data;
  std::vector<std::size_t> feature_idx;
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i == time_idx || i == event_idx || (truth_idx && i == *truth_idx)) continue;
      feature_idx.push_back(i);
      data.feature_names.push_back(columns[i]);
    }
  } else {
    for (const auto& f : schema.feature_columns) {
      feature_idx.push_back(locate(f));
      data.feature_names.push_back(f);
    }
  }

  auto process = [&](std::string_view text) {
    const auto fields = detail::split_fields(text, schema.delimiter);
    const std::string where = source + ": row " + std::to_string(line_no);
    if (fields.size() != columns.size())
      throw DataError(where + ": expected " + std::to_string(columns.size()) + " fields, found " +
                      std::to_string(fields.size()));
    auto number = [&](std::size_t col) {
      const auto v = detail::parse_double(fields[col]);
      if (!v) {
        if (fields[col].empty())
          throw DataError(where + ", column '" + columns[col] + "': missing value");
        throw DataError(where + ", column '" + columns[col] + "': cannot parse '" +
                        std::string(fields[col]) + "' as a number");
      }
      if (!std::isfinite(*v))
        throw DataError(where + ", column '" + columns[col] + "': value is not finite");
      return *v;
    };
    SurvivalRecord rec;
    rec.x.reserve(feature_idx.size());
    for (auto c : feature_idx) rec.x.push_back(number(c));
    rec.y = number(time_idx);
    if (rec.y < 0.0 && !schema.allow_negative_times)
      throw DataError(where + ", column '" + columns[time_idx] + "': negative time");
    const double e = number(event_idx);
    if (e != 0.0 && e != 1.0)
      throw DataError(where + ", column '" + columns[event_idx] + "': event must be 0 or 1, got '" +
                      std::string(fields[event_idx]) + "'");
    rec.event = e == 1.0;
    if (truth_idx) rec.o_true = number(*truth_idx);
    data.records.push_back(std::move(rec));
  };

  if (pending) process(*pending);
  while (next_line()) process(line);

  std::ostringstream msg;
  msg << source << ": loaded " << data.size() << " records, censoring proportion "
      << data.censoring_proportion();
  log_info(msg.str());
  return data;
}

inline Dataset load_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, schema, path);
}

// Writes feature columns, then time, event and (when every record has it)
// o_true. Values use the shortest round-trip representation.
inline void write_csv(std::ostream& out, const Dataset& data, char delimiter = ',') {
  const bool truth = data.has_ground_truth();
  for (const auto& name : data.feature_names) out << name << delimiter;
  out << "time" << delimiter << "event";
  if (truth) out << delimiter << "o_true";
  out << '\n';
  for (const auto& r : data.records) {
    for (double v : r.x) out << detail::format_double(v) << delimiter;
    out << detail::format_double(r.y) << delimiter << (r.event ? 1 : 0);
    if (truth) out << delimiter << detail::format_double(*r.o_true);
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const Dataset& data, char delimiter = ',') {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_csv(out, data, delimiter);
  if (!out) throw DataError("failed writing '" + path + "'");
}

// Per-feature z-scoring fitted on training data. Zero-variance features
// pass through unchanged.
struct FeatureTransform {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<bool> passthrough;

  std::size_t dim() const { return mean.size(); }

  static FeatureTransform identity(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0),
            std::vector<bool>(dim, true)};
  }

  static FeatureTransform fit(const Dataset& train) {
    if (train.empty()) throw std::invalid_argument("FeatureTransform::fit: empty training set");
    const std::size_t d = train.feature_dim();
    FeatureTransform t{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0),
                       std::vector<bool>(d, false)};
    const double n = static_cast<double>(train.size());
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (const auto& r : train.records) mean += r.x[j];
      mean /= n;
      double ss = 0.0;
      for (const auto& r : train.records) ss += (r.x[j] - mean) * (r.x[j] - mean);
      const double sd = train.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        log_warning("feature '" + train.feature_names[j] +
                    "' has zero variance in the training set; left unscaled");
        t.passthrough[j] = true;
        continue;
      }
      t.mean[j] = mean;
      t.scale[j] = sd;
    }
    return t;
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    if (x.size() != dim()) throw std::invalid_argument("FeatureTransform: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      out[j] = passthrough[j] ? x[j] : (x[j] - mean[j]) / scale[j];
    return out;
  }

  Dataset apply(const Dataset& data) const {
    Dataset out = data;
    for (auto& r : out.records) r.x = apply(r.x);
    return out;
  }
};

struct StandardizedSplit {
  Dataset train;
  Dataset test;
  FeatureTransform transform;
};

// Fits the transform on train only and applies it to both parts.
inline StandardizedSplit standardize(const Dataset& train, const Dataset& test) {
  auto transform = FeatureTransform::fit(train);
  return {transform.apply(train), transform.apply(test), std::move(transform)};
}

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Seeded uniform shuffle, then the first round(n * test_fraction) shuffled
// records become the test set. Both parts keep the original relative order.
inline TrainTestSplit split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split: test_fraction must lie in (0, 1)");
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n >= 2) n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<std::size_t> test_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  return {data.subset(train_rows), data.subset(test_rows)};
}

}  // namespace aldsurv
