#include "rcad/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "rcad/error.hpp"
#include "rcad/preprocess.hpp"

namespace rcad {

ConfusionMatrix ConfusionMatrix::from_binary(std::int64_t tp, std::int64_t tn, std::int64_t fp,
                                             std::int64_t fn) {
  if (tp < 0 || tn < 0 || fp < 0 || fn < 0) {
    throw InputError("confusion counts must be non-negative");
  }
  ConfusionMatrix cm;
  cm.k = 2;
  cm.counts = {tn, fp, fn, tp};
  return cm;
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& predictions,
                          int num_classes) {
  if (labels.size() != predictions.size()) {
    throw InputError("confusion: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(predictions.size()) + " predictions");
  }
  if (num_classes < 2) {
    throw InputError("confusion: num_classes must be >= 2");
  }
  ConfusionMatrix cm;
  cm.k = num_classes;
  cm.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = predictions[i];
    if (y < 0 || y >= num_classes || p < 0 || p >= num_classes) {
      throw InputError("confusion: class " + std::to_string(y < 0 || y >= num_classes ? y : p) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++cm.counts[static_cast<std::size_t>(y) * num_classes + p];
  }
  return cm;
}

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> harmonic(const std::optional<double>& p, const std::optional<double>& r) {
  if (!p || !r || (*p + *r) == 0.0) return std::nullopt;
  return 2.0 * *p * *r / (*p + *r);
}

}  // namespace

MetricSet metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) {
    throw InputError("metrics: confusion matrix is empty");
  }
  MetricSet m;
  std::int64_t diag = 0;
  for (int c = 0; c < cm.k; ++c) diag += cm.at(c, c);
  m.accuracy = static_cast<double>(diag) / static_cast<double>(total);

  if (cm.binary()) {
    m.precision = ratio(cm.tp(), cm.tp() + cm.fp());
    m.recall = ratio(cm.tp(), cm.tp() + cm.fn());
    m.f1 = harmonic(m.precision, m.recall);
    return m;
  }

  // macro one-vs-rest over classes where the metric is defined
  double psum = 0.0, rsum = 0.0, fsum = 0.0;
  int pn = 0, rn = 0, fn = 0;
  for (int c = 0; c < cm.k; ++c) {
    std::int64_t tp = cm.at(c, c), fp = 0, fneg = 0;
    for (int o = 0; o < cm.k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fneg += cm.at(c, o);
    }
    const auto p = ratio(tp, tp + fp);
    const auto r = ratio(tp, tp + fneg);
    const auto f = harmonic(p, r);
    if (p) { psum += *p; ++pn; }
    if (r) { rsum += *r; ++rn; }
    if (f) { fsum += *f; ++fn; }
  }
  if (pn > 0) m.precision = psum / pn;
  if (rn > 0) m.recall = rsum / rn;
  if (fn > 0) m.f1 = fsum / fn;
  return m;
}

RocResult roc_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size()) {
    throw InputError("roc_auc: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(scores.size()) + " scores");
  }
  if (labels.empty()) {
    throw InputError("roc_auc: empty input");
  }
  std::int64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw InputError("roc_auc: labels must be 0/1");
    }
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw InputError("roc_auc: scores must lie in [0, 1]");
    }
    (labels[i] == 1 ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) {
    throw InputError("roc_auc: need both classes present; AUC is undefined otherwise");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult result;
  result.points.push_back({0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  double auc = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    // everything sharing this score crosses the threshold together
    std::size_t j = i;
    std::int64_t dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? dtp : dfp) += 1;
      ++j;
    }
    const double prev_fpr = static_cast<double>(fp) / static_cast<double>(neg);
    const double prev_tpr = static_cast<double>(tp) / static_cast<double>(pos);
    tp += dtp;
    fp += dfp;
    const double cur_fpr = static_cast<double>(fp) / static_cast<double>(neg);
    const double cur_tpr = static_cast<double>(tp) / static_cast<double>(pos);
    auc += (cur_fpr - prev_fpr) * (prev_tpr + cur_tpr) / 2.0;
    result.points.push_back({cur_fpr, cur_tpr});
    i = j;
  }
  result.auc = auc;
  return result;
}

EvalReport make_report(const std::string& model, const std::vector<int>& labels,
                       const std::vector<int>& predictions, const std::vector<double>& scores,
                       int num_classes, const std::string& curves_file) {
  EvalReport report;
  report.model = model;
  report.confusion = confusion(labels, predictions, num_classes);
  report.metrics = metrics(report.confusion);
  report.curves_file = curves_file;
  if (num_classes == 2 && !scores.empty()) {
    const RocResult roc = roc_auc(labels, scores);
    report.auc = roc.auc;
    report.roc_points = roc.points;
  }
  return report;
}

ReportFormat report_format_from_name(const std::string& name) {
  if (name == "table") return ReportFormat::table;
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  throw ConfigError("unknown report format '" + name + "' (expected table, json, or csv)");
}

namespace {

std::string percent(const std::optional<double>& v) {
  if (!v) return "—";  // em dash for undefined
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", *v * 100.0);
  return buf;
}

std::string csv_fraction(const std::optional<double>& v) {
  return v ? csvio::format_double(*v) : "";
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  if (r.confusion.binary()) {
    j["confusion"] = {{"tp", r.confusion.tp()},
                      {"tn", r.confusion.tn()},
                      {"fp", r.confusion.fp()},
                      {"fn", r.confusion.fn()}};
  } else {
    nlohmann::json rows = nlohmann::json::array();
    for (int a = 0; a < r.confusion.k; ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (int p = 0; p < r.confusion.k; ++p) row.push_back(r.confusion.at(a, p));
      rows.push_back(row);
    }
    j["confusion"] = {{"k", r.confusion.k}, {"counts", rows}};
  }
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j["metrics"] = {{"accuracy", r.metrics.accuracy},
                  {"precision", opt(r.metrics.precision)},
                  {"recall", opt(r.metrics.recall)},
                  {"f1", opt(r.metrics.f1)},
                  {"auc", opt(r.auc)}};
  j["curves_file"] = r.curves_file;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.model = j.at("model").get<std::string>();
  const auto& cj = j.at("confusion");
  if (cj.contains("tp")) {
    r.confusion = ConfusionMatrix::from_binary(cj.at("tp").get<std::int64_t>(),
                                               cj.at("tn").get<std::int64_t>(),
                                               cj.at("fp").get<std::int64_t>(),
                                               cj.at("fn").get<std::int64_t>());
  } else {
    r.confusion.k = cj.at("k").get<int>();
    for (const auto& row : cj.at("counts")) {
      for (const auto& c : row) r.confusion.counts.push_back(c.get<std::int64_t>());
    }
  }
  const auto& mj = j.at("metrics");
  r.metrics.accuracy = mj.at("accuracy").get<double>();
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!mj.contains(key) || mj[key].is_null()) return std::nullopt;
    return mj[key].get<double>();
  };
  r.metrics.precision = opt("precision");
  r.metrics.recall = opt("recall");
  r.metrics.f1 = opt("f1");
  r.auc = opt("auc");
  r.curves_file = j.value("curves_file", "");
  return r;
}

}  // namespace

std::string reports_to_json_text(const std::vector<EvalReport>& reports) {
  nlohmann::json j;
  j["format"] = "rcad-report";
  j["version"] = 1;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  j["reports"] = arr;
  return j.dump(2) + "\n";
}

std::vector<EvalReport> reports_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("format") || j["format"] != "rcad-report") {
    throw SchemaError("not a report file");
  }
  std::vector<EvalReport> reports;
  for (const auto& rj : j.at("reports")) reports.push_back(report_from_json(rj));
  return reports;
}

std::string render_report(const std::vector<EvalReport>& reports, ReportFormat format) {
  if (reports.empty()) {
    throw InputError("render_report: no reports given");
  }
  switch (format) {
    case ReportFormat::json:
      return reports_to_json_text(reports);
    case ReportFormat::csv: {
      std::string out = "model,accuracy,precision,recall,f1,auc\n";
      for (const auto& r : reports) {
        out += r.model;
        out += ',' + csvio::format_double(r.metrics.accuracy);
        out += ',' + csv_fraction(r.metrics.precision);
        out += ',' + csv_fraction(r.metrics.recall);
        out += ',' + csv_fraction(r.metrics.f1);
        out += ',' + csv_fraction(r.auc);
        out += '\n';
      }
      return out;
    }
    case ReportFormat::table: {
      std::string out;
      for (const auto& r : reports) {
        out += "Model: " + r.model + "\n";
        out += "Parameters | Value (%)\n";
        out += "Accuracy | " + percent(r.metrics.accuracy) + "\n";
        out += "Precision | " + percent(r.metrics.precision) + "\n";
        out += "Recall | " + percent(r.metrics.recall) + "\n";
        out += "F1-score | " + percent(r.metrics.f1) + "\n";
        out += "AUC | " + percent(r.auc) + "\n";
        out += "\n";
      }
      out += "Comparison\n";
      out += "Model | Accuracy (%)\n";
      for (const auto& r : reports) {
        out += r.model + " | " + percent(r.metrics.accuracy) + "\n";
      }
      return out;
    }
  }
  throw ConfigError("unknown report format");
}

}  // namespace rcad
