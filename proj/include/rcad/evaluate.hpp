#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rcad {

// Class-count matrix; rows are actual labels, columns predictions. The
// binary view treats class 1 as positive.
struct ConfusionMatrix {
  int k = 2;
  std::vector<std::int64_t> counts;  // k*k row-major

  static ConfusionMatrix from_binary(std::int64_t tp, std::int64_t tn, std::int64_t fp,
                                     std::int64_t fn);

  std::int64_t at(int actual, int predicted) const {
    return counts[static_cast<std::size_t>(actual) * k + predicted];
  }
  std::int64_t total() const;
  bool binary() const { return k == 2; }
  std::int64_t tp() const { return at(1, 1); }
  std::int64_t tn() const { return at(0, 0); }
  std::int64_t fp() const { return at(0, 1); }
  std::int64_t fn() const { return at(1, 0); }
};

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& predictions,
                          int num_classes = 2);

// Zero-denominator metrics stay undefined (nullopt) rather than
// collapsing to 0; reports print them as an em dash.
struct MetricSet {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

// Binary path for k == 2; k > 2 reports macro-averaged one-vs-rest
// precision/recall/f1 over the classes where they are defined.
MetricSet metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // starts at (0,0), ends at (1,1)
  double auc = 0.0;
};

// Threshold sweep over distinct scores in descending order, tied scores
// grouped; trapezoidal area.
RocResult roc_auc(const std::vector<int>& labels, const std::vector<double>& scores);

struct EvalReport {
  std::string model;
  ConfusionMatrix confusion;
  MetricSet metrics;
  std::optional<double> auc;
  std::vector<RocPoint> roc_points;
  std::string curves_file;
};

EvalReport make_report(const std::string& model, const std::vector<int>& labels,
                       const std::vector<int>& predictions, const std::vector<double>& scores,
                       int num_classes, const std::string& curves_file = "");

enum class ReportFormat { table, json, csv };
ReportFormat report_format_from_name(const std::string& name);

// Per-model "Parameters | Value (%)" tables (one decimal) plus a
// cross-model comparison block in insertion order.
std::string render_report(const std::vector<EvalReport>& reports, ReportFormat format);

std::string reports_to_json_text(const std::vector<EvalReport>& reports);
std::vector<EvalReport> reports_from_json_text(const std::string& text);

}  // namespace rcad
