#include "rcad/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rcad/error.hpp"

namespace rcad {

int CorrelationMatrix::index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::string CorrelationMatrix::to_csv_text() const {
  std::string out = "feature";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    out += names[i];
    for (std::size_t j = 0; j < names.size(); ++j) {
      out += ',' + csvio::format_double(at(i, j));
    }
    out += '\n';
  }
  return out;
}

void CorrelationMatrix::to_csv(const std::string& path) const {
  csvio::write_file(path, to_csv_text());
}

CorrelationMatrix pearson_matrix(const DataTable& table) {
  table.check_consistent();
  if (table.row_count < 2) {
    throw InputError("pearson_matrix: need at least 2 rows, got " +
                     std::to_string(table.row_count));
  }
  if (table.has_missing()) {
    throw InputError("pearson_matrix: table has missing cells; clean it first");
  }
  const std::size_t nf = table.col_count();
  const double n = static_cast<double>(table.row_count);

  std::vector<double> mean(nf, 0.0), spread(nf, 0.0);
  for (std::size_t c = 0; c < nf; ++c) {
    double total = 0.0;
    for (const auto& cell : table.columns[c]) total += *cell;
    mean[c] = total / n;
    double ss = 0.0;
    for (const auto& cell : table.columns[c]) {
      const double d = *cell - mean[c];
      ss += d * d;
    }
    spread[c] = std::sqrt(ss / n);
  }

  CorrelationMatrix m;
  m.names = table.column_names;
  m.r.assign(nf * nf, 0.0);
  for (std::size_t c = 0; c < nf; ++c) {
    m.degenerate.push_back(spread[c] == 0.0);
    m.r[c * nf + c] = 1.0;
  }
  for (std::size_t i = 0; i < nf; ++i) {
    for (std::size_t j = i + 1; j < nf; ++j) {
      double rij = 0.0;
      if (!m.degenerate[i] && !m.degenerate[j]) {
        double cov = 0.0;
        for (std::size_t row = 0; row < table.row_count; ++row) {
          cov += (*table.columns[i][row] - mean[i]) * (*table.columns[j][row] - mean[j]);
        }
        cov /= n;
        rij = cov / (spread[i] * spread[j]);
        rij = std::clamp(rij, -1.0, 1.0);
      }
      m.r[i * nf + j] = rij;
      m.r[j * nf + i] = rij;
    }
  }
  return m;
}

FeatureSelection select_features(const CorrelationMatrix& corr, const std::string& target,
                                 int k, double redundancy_cap) {
  const int ti = corr.index(target);
  if (ti < 0) {
    throw InputError("select_features: target '" + target + "' is not a known feature");
  }
  const int nf = static_cast<int>(corr.size());
  if (k < 1 || k >= nf) {
    throw InputError("select_features: k must be in [1, " + std::to_string(nf - 1) +
                     "], got " + std::to_string(k));
  }

  std::vector<int> order;
  for (int i = 0; i < nf; ++i) {
    if (i != ti) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ra = std::fabs(corr.at(static_cast<std::size_t>(a), static_cast<std::size_t>(ti)));
    const double rb = std::fabs(corr.at(static_cast<std::size_t>(b), static_cast<std::size_t>(ti)));
    if (ra != rb) return ra > rb;
    return corr.names[static_cast<std::size_t>(a)] < corr.names[static_cast<std::size_t>(b)];
  });

  FeatureSelection sel;
  std::vector<int> picked;
  for (const int cand : order) {
    if (static_cast<int>(picked.size()) == k) break;
    bool redundant = false;
    for (const int p : picked) {
      if (std::fabs(corr.at(static_cast<std::size_t>(cand), static_cast<std::size_t>(p))) >
          redundancy_cap) {
        redundant = true;
        break;
      }
    }
    if (!redundant) picked.push_back(cand);
  }
  for (const int p : picked) sel.features.push_back(corr.names[static_cast<std::size_t>(p)]);
  sel.truncated = static_cast<int>(picked.size()) < k;
  return sel;
}

OutlierReport flag_outliers(const DataTable& table, const CorrelationMatrix& corr,
                            double threshold) {
  if (!(threshold > 0.0)) {
    throw InputError("flag_outliers: threshold must be positive");
  }
  table.check_consistent();
  if (table.has_missing()) {
    throw InputError("flag_outliers: table has missing cells; clean it first");
  }
  OutlierReport report;

  // Most-correlated non-degenerate pair; ties resolve to the first pair in
  // (i, j) index order.
  const std::size_t nf = corr.size();
  double best = -1.0;
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < nf; ++i) {
    if (corr.degenerate[i]) continue;
    for (std::size_t j = i + 1; j < nf; ++j) {
      if (corr.degenerate[j]) continue;
      const double a = std::fabs(corr.at(i, j));
      if (a > best) {
        best = a;
        bi = i;
        bj = j;
      }
    }
  }
  if (best < 0.0) {
    report.degenerate = true;
    return report;
  }
  report.feature_x = corr.names[bi];
  report.feature_y = corr.names[bj];

  const int cx = table.column_index(report.feature_x);
  const int cy = table.column_index(report.feature_y);
  if (cx < 0 || cy < 0) {
    throw SchemaError("flag_outliers: table lacks feature '" +
                      (cx < 0 ? report.feature_x : report.feature_y) + "'");
  }
  const auto& xs = table.columns[static_cast<std::size_t>(cx)];
  const auto& ys = table.columns[static_cast<std::size_t>(cy)];
  const double n = static_cast<double>(table.row_count);

  double mx = 0.0, my = 0.0;
  for (std::size_t r = 0; r < table.row_count; ++r) {
    mx += *xs[r];
    my += *ys[r];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, varx = 0.0;
  for (std::size_t r = 0; r < table.row_count; ++r) {
    cov += (*xs[r] - mx) * (*ys[r] - my);
    varx += (*xs[r] - mx) * (*xs[r] - mx);
  }
  cov /= n;
  varx /= n;
  const double slope = cov / varx;
  const double intercept = my - slope * mx;

  std::vector<double> resid(table.row_count);
  double ss = 0.0;
  for (std::size_t r = 0; r < table.row_count; ++r) {
    resid[r] = *ys[r] - (intercept + slope * *xs[r]);
    ss += resid[r] * resid[r];
  }
  const double sd = std::sqrt(ss / n);
  if (sd == 0.0) {
    return report;  // perfect fit, nothing sticks out
  }
  for (std::size_t r = 0; r < table.row_count; ++r) {
    if (std::fabs(resid[r] / sd) > threshold) {
      report.rows.push_back(r);
    }
  }
  return report;
}

}  // namespace rcad
