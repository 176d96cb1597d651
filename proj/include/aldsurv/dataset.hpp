#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aldsurv {

// One right-censored observation. y = min(event time, censoring time) and
// event is true when the event was observed. Synthetic records also keep the
// uncensored event time.
struct SurvivalRecord {
  std::vector<double> x;
  double y = 0.0;
  bool event = false;
  std::optional<double> o_true;

  bool operator==(const SurvivalRecord&) const = default;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<SurvivalRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::size_t feature_dim() const { return feature_names.size(); }

  double censoring_proportion() const {
    if (records.empty()) return 0.0;
    std::size_t censored = 0;
    for (const auto& r : records) censored += r.event ? 0 : 1;
    return static_cast<double>(censored) / static_cast<double>(records.size());
  }

  bool has_ground_truth() const {
    if (records.empty()) return false;
    for (const auto& r : records)
      if (!r.o_true) return false;
    return true;
  }

  std::vector<double> times() const {
    std::vector<double> t;
    t.reserve(records.size());
    for (const auto& r : records) t.push_back(r.y);
    return t;
  }

  std::vector<bool> events() const {
    std::vector<bool> e;
    e.reserve(records.size());
    for (const auto& r : records) e.push_back(r.event);
    return e;
  }

  // n x feature_dim covariate matrix.
  Eigen::MatrixXd covariates() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(feature_dim()));
    for (std::size_t i = 0; i < size(); ++i) {
      if (records[i].x.size() != feature_dim())
        throw std::invalid_argument("Dataset: record " + std::to_string(i) +
                                    " has the wrong number of covariates");
      for (std::size_t j = 0; j < feature_dim(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records[i].x[j];
    }
    return m;
  }

  Dataset subset(const std::vector<std::size_t>& rows) const {
    Dataset out{feature_names, {}};
    out.records.reserve(rows.size());
    for (auto r : rows) out.records.push_back(records.at(r));
    return out;
  }
};

}  // namespace aldsurv
