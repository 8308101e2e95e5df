#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rcad {

// Column-oriented table of optional doubles; absent cells are missing
// values. The CSV form uses a header row, '.' decimals, and empty fields
// for missing cells.
struct DataTable {
  std::vector<std::string> column_names;
  std::vector<std::vector<std::optional<double>>> columns;  // [column][row]
  std::size_t row_count = 0;

  std::size_t col_count() const { return column_names.size(); }
  int column_index(const std::string& name) const;
  bool has_missing() const;
  void check_consistent() const;  // unique names, equal column lengths

  static DataTable from_csv_text(const std::string& text);
  static DataTable from_csv(const std::string& path);
  std::string to_csv_text() const;
  void to_csv(const std::string& path) const;
};

enum class MissingPolicy { drop_row, impute_mean, impute_constant };

struct CleanPolicy {
  MissingPolicy missing = MissingPolicy::impute_mean;
  double constant = 0.0;  // impute_constant fill value
};

struct CleanReport {
  std::int64_t duplicates_removed = 0;
  std::map<std::string, std::int64_t> missing_imputed;  // only nonzero columns
  std::int64_t rows_dropped = 0;
};

// Removes exact-duplicate rows (first occurrence kept, input order
// preserved), then resolves missing cells per policy. The output never
// contains missing cells, and cleaning an already-clean table is the
// identity.
std::pair<DataTable, CleanReport> clean(const DataTable& table, const CleanPolicy& policy);

// Per-column mean and population standard deviation. Zero-spread columns
// are flagged degenerate and transform to all zeros.
struct ScalerState {
  std::vector<std::string> column_names;
  std::vector<double> mean;
  std::vector<double> spread;
  std::vector<bool> degenerate;

  std::string to_json_text() const;
  static ScalerState from_json_text(const std::string& text);
  void save(const std::string& path) const;
  static ScalerState load(const std::string& path);
};

ScalerState fit_zscore(const DataTable& table);
DataTable transform_zscore(const DataTable& table, const ScalerState& state);
std::pair<DataTable, ScalerState> standardize(const DataTable& table);

namespace csvio {
// Shared CSV plumbing (also used by the sequence-dataset format).
std::vector<std::string> split_line(const std::string& line);
std::string format_double(double v);  // round-trip exact
double parse_double(const std::string& field, const std::string& context);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);
}  // namespace csvio

}  // namespace rcad
