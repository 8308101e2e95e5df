#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rcad/preprocess.hpp"

namespace rcad {

// Symmetric matrix of Pearson coefficients in [-1, 1]. Zero-spread
// features are flagged degenerate; their off-diagonal entries are 0.
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<double> r;  // n*n row-major
  std::vector<bool> degenerate;

  std::size_t size() const { return names.size(); }
  double at(std::size_t i, std::size_t j) const { return r[i * names.size() + j]; }
  int index(const std::string& name) const;

  std::string to_csv_text() const;
  void to_csv(const std::string& path) const;
};

CorrelationMatrix pearson_matrix(const DataTable& table);

struct FeatureSelection {
  std::vector<std::string> features;
  bool truncated = false;  // fewer than k survived the redundancy filter
};

// Greedy max-relevance selection: candidates ordered by descending
// |r(feature, target)| (ties by ascending name); a candidate is skipped
// when its |r| with any already-selected feature exceeds redundancy_cap.
FeatureSelection select_features(const CorrelationMatrix& corr, const std::string& target,
                                 int k, double redundancy_cap);

struct OutlierReport {
  std::vector<std::size_t> rows;     // ascending
  bool degenerate = false;           // no usable feature pair
  std::string feature_x, feature_y;  // the regression pair, when usable
};

// Flags rows whose standardized residual from the least-squares line of
// the most-correlated feature pair exceeds the threshold in absolute
// value. Rows are reported, never dropped.
OutlierReport flag_outliers(const DataTable& table, const CorrelationMatrix& corr,
                            double threshold);

}  // namespace rcad
