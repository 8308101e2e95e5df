#include "rcad/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "rcad/error.hpp"

namespace rcad {

namespace csvio {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const std::string& context) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw SchemaError("cannot parse number '" + field + "' in " + context);
  }
  if (!std::isfinite(value)) {
    throw SchemaError("non-finite value '" + field + "' in " + context);
  }
  return value;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "' for reading");
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw IoError("write failed for '" + path + "'");
  }
}

}  // namespace csvio

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (const char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

// Byte key with numeric equality semantics for duplicate detection
// (-0.0 folds onto 0.0; missing is its own marker).
std::string row_key(const DataTable& t, std::size_t row) {
  std::string key;
  key.reserve(t.col_count() * 9);
  for (std::size_t c = 0; c < t.col_count(); ++c) {
    const auto& cell = t.columns[c][row];
    if (!cell.has_value()) {
      key.push_back('\0');
      continue;
    }
    key.push_back('\1');
    double v = *cell == 0.0 ? 0.0 : *cell;
    char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    key.append(bytes, sizeof(double));
  }
  return key;
}

DataTable select_rows(const DataTable& t, const std::vector<std::size_t>& rows) {
  DataTable out;
  out.column_names = t.column_names;
  out.columns.resize(t.col_count());
  out.row_count = rows.size();
  for (std::size_t c = 0; c < t.col_count(); ++c) {
    out.columns[c].reserve(rows.size());
    for (const std::size_t r : rows) {
      out.columns[c].push_back(t.columns[c][r]);
    }
  }
  return out;
}

// Deduplicate in input order; returns kept rows and the removal count.
std::pair<DataTable, std::int64_t> dedup(const DataTable& t) {
  std::unordered_set<std::string> seen;
  std::vector<std::size_t> keep;
  keep.reserve(t.row_count);
  for (std::size_t r = 0; r < t.row_count; ++r) {
    if (seen.insert(row_key(t, r)).second) {
      keep.push_back(r);
    }
  }
  const auto removed = static_cast<std::int64_t>(t.row_count - keep.size());
  if (removed == 0) {
    return {t, 0};
  }
  return {select_rows(t, keep), removed};
}

}  // namespace

int DataTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    if (column_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

bool DataTable::has_missing() const {
  for (const auto& col : columns) {
    for (const auto& cell : col) {
      if (!cell.has_value()) return true;
    }
  }
  return false;
}

void DataTable::check_consistent() const {
  if (columns.size() != column_names.size()) {
    throw SchemaError("table has " + std::to_string(column_names.size()) + " names but " +
                      std::to_string(columns.size()) + " columns");
  }
  std::unordered_set<std::string> names(column_names.begin(), column_names.end());
  if (names.size() != column_names.size()) {
    throw SchemaError("duplicate column names in table");
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != row_count) {
      throw SchemaError("column '" + column_names[c] + "' has " +
                        std::to_string(columns[c].size()) + " rows, expected " +
                        std::to_string(row_count));
    }
  }
}

DataTable DataTable::from_csv_text(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty() || is_blank(lines[0])) {
    throw SchemaError("CSV input has no header row");
  }
  DataTable t;
  t.column_names = csvio::split_line(lines[0]);
  t.columns.resize(t.column_names.size());
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (is_blank(lines[li])) continue;
    const auto fields = csvio::split_line(lines[li]);
    if (fields.size() != t.column_names.size()) {
      throw SchemaError("CSV row " + std::to_string(li) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(t.column_names.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (fields[c].empty() || is_blank(fields[c])) {
        t.columns[c].emplace_back(std::nullopt);
      } else {
        t.columns[c].emplace_back(
            csvio::parse_double(fields[c], "row " + std::to_string(li) + ", column '" +
                                               t.column_names[c] + "'"));
      }
    }
    ++t.row_count;
  }
  t.check_consistent();
  return t;
}

DataTable DataTable::from_csv(const std::string& path) {
  return from_csv_text(csvio::read_file(path));
}

std::string DataTable::to_csv_text() const {
  std::string out;
  for (std::size_t c = 0; c < column_names.size(); ++c) {
    if (c > 0) out += ',';
    out += column_names[c];
  }
  out += '\n';
  for (std::size_t r = 0; r < row_count; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c > 0) out += ',';
      if (columns[c][r].has_value()) out += csvio::format_double(*columns[c][r]);
    }
    out += '\n';
  }
  return out;
}

void DataTable::to_csv(const std::string& path) const {
  csvio::write_file(path, to_csv_text());
}

std::pair<DataTable, CleanReport> clean(const DataTable& table, const CleanPolicy& policy) {
  table.check_consistent();
  if (table.row_count == 0 || table.col_count() == 0) {
    throw InputError("clean: table is empty");
  }
  CleanReport report;
  auto [t, removed] = dedup(table);
  report.duplicates_removed = removed;

  if (t.has_missing()) {
    switch (policy.missing) {
      case MissingPolicy::drop_row: {
        std::vector<std::size_t> keep;
        for (std::size_t r = 0; r < t.row_count; ++r) {
          bool complete = true;
          for (std::size_t c = 0; c < t.col_count(); ++c) {
            if (!t.columns[c][r].has_value()) {
              complete = false;
              break;
            }
          }
          if (complete) keep.push_back(r);
        }
        report.rows_dropped = static_cast<std::int64_t>(t.row_count - keep.size());
        t = select_rows(t, keep);
        break;
      }
      case MissingPolicy::impute_mean: {
        for (std::size_t c = 0; c < t.col_count(); ++c) {
          double total = 0.0;
          std::int64_t present = 0, absent = 0;
          for (const auto& cell : t.columns[c]) {
            if (cell.has_value()) {
              total += *cell;
              ++present;
            } else {
              ++absent;
            }
          }
          if (absent == 0) continue;
          if (present == 0) {
            throw InputError("clean: column '" + t.column_names[c] +
                             "' is entirely missing; mean imputation impossible");
          }
          const double mean = total / static_cast<double>(present);
          for (auto& cell : t.columns[c]) {
            if (!cell.has_value()) cell = mean;
          }
          report.missing_imputed[t.column_names[c]] = absent;
        }
        break;
      }
      case MissingPolicy::impute_constant: {
        for (std::size_t c = 0; c < t.col_count(); ++c) {
          std::int64_t absent = 0;
          for (auto& cell : t.columns[c]) {
            if (!cell.has_value()) {
              cell = policy.constant;
              ++absent;
            }
          }
          if (absent > 0) report.missing_imputed[t.column_names[c]] = absent;
        }
        break;
      }
    }
    // Imputation can collide previously-distinct rows; sweep again so that
    // cleaning is idempotent.
    auto [t2, removed2] = dedup(t);
    report.duplicates_removed += removed2;
    t = std::move(t2);
  }
  return {std::move(t), std::move(report)};
}

ScalerState fit_zscore(const DataTable& table) {
  table.check_consistent();
  if (table.row_count == 0 || table.col_count() == 0) {
    throw SchemaError("fit_zscore: table is empty");
  }
  if (table.has_missing()) {
    throw InputError("fit_zscore: table has missing cells; clean it first");
  }
  ScalerState s;
  s.column_names = table.column_names;
  const double n = static_cast<double>(table.row_count);
  for (const auto& col : table.columns) {
    double total = 0.0;
    for (const auto& cell : col) total += *cell;
    const double mean = total / n;
    double ss = 0.0;
    for (const auto& cell : col) {
      const double d = *cell - mean;
      ss += d * d;
    }
    const double spread = std::sqrt(ss / n);  // population convention
    s.mean.push_back(mean);
    s.spread.push_back(spread);
    s.degenerate.push_back(spread == 0.0);
  }
  return s;
}

DataTable transform_zscore(const DataTable& table, const ScalerState& state) {
  table.check_consistent();
  if (table.column_names != state.column_names) {
    throw SchemaError("transform_zscore: table columns " +
                      [&] {
                        std::string s;
                        for (const auto& n : table.column_names) s += n + ",";
                        return s;
                      }() +
                      " do not match fitted columns");
  }
  if (table.has_missing()) {
    throw InputError("transform_zscore: table has missing cells; clean it first");
  }
  DataTable out = table;
  for (std::size_t c = 0; c < out.col_count(); ++c) {
    for (auto& cell : out.columns[c]) {
      cell = state.degenerate[c] ? 0.0 : (*cell - state.mean[c]) / state.spread[c];
    }
  }
  return out;
}

std::pair<DataTable, ScalerState> standardize(const DataTable& table) {
  ScalerState state = fit_zscore(table);
  return {transform_zscore(table, state), std::move(state)};
}

std::string ScalerState::to_json_text() const {
  nlohmann::json j;
  j["format"] = "rcad-scaler";
  j["version"] = 1;
  j["column_names"] = column_names;
  j["mean"] = mean;
  j["spread"] = spread;
  j["degenerate"] = std::vector<int>(degenerate.begin(), degenerate.end());
  return j.dump(2) + "\n";
}

ScalerState ScalerState::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("format") || j["format"] != "rcad-scaler") {
    throw SchemaError("not a scaler file");
  }
  ScalerState s;
  s.column_names = j.at("column_names").get<std::vector<std::string>>();
  s.mean = j.at("mean").get<std::vector<double>>();
  s.spread = j.at("spread").get<std::vector<double>>();
  for (const int d : j.at("degenerate").get<std::vector<int>>()) {
    s.degenerate.push_back(d != 0);
  }
  if (s.mean.size() != s.column_names.size() || s.spread.size() != s.column_names.size() ||
      s.degenerate.size() != s.column_names.size()) {
    throw SchemaError("scaler file fields have inconsistent lengths");
  }
  return s;
}

void ScalerState::save(const std::string& path) const {
  csvio::write_file(path, to_json_text());
}

ScalerState ScalerState::load(const std::string& path) {
  return from_json_text(csvio::read_file(path));
}

}  // namespace rcad
