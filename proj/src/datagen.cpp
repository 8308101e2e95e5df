#include "rcad/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "rcad/error.hpp"
#include "rcad/preprocess.hpp"
#include "rcad/rng.hpp"

namespace rcad {

int SequenceDataset::num_classes() const {
  int mx = -1;
  for (const int y : labels) mx = std::max(mx, y);
  return mx + 1;
}

Tensor SequenceDataset::batch_tensor(const std::vector<int>& indices) const {
  if (indices.empty()) {
    throw InputError("batch_tensor: empty index list");
  }
  const int b = static_cast<int>(indices.size());
  std::vector<double> out(static_cast<std::size_t>(b) * seq_len * n_features);
  std::size_t pos = 0;
  for (const int idx : indices) {
    const std::size_t base = static_cast<std::size_t>(idx) * seq_len * n_features;
    for (int i = 0; i < seq_len * n_features; ++i) {
      out[pos++] = values[base + static_cast<std::size_t>(i)];
    }
  }
  return Tensor({b, seq_len, n_features}, std::move(out));
}

std::vector<int> SequenceDataset::batch_labels(const std::vector<int>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (const int idx : indices) out.push_back(labels[static_cast<std::size_t>(idx)]);
  return out;
}

void GenConfig::validate() const {
  if (n_samples < 4) throw ConfigError("n_samples must be >= 4");
  if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
  if (n_features < 1) throw ConfigError("n_features must be >= 1");
  if (!(class_balance > 0.0 && class_balance < 1.0)) {
    throw ConfigError("class_balance must lie in (0, 1)");
  }
  if (!(separability >= 0.0)) throw ConfigError("separability must be >= 0");
}

SequenceDataset generate(const GenConfig& config) {
  config.validate();
  SequenceDataset data;
  data.seq_len = config.seq_len;
  data.n_features = config.n_features;
  data.values.resize(static_cast<std::size_t>(config.n_samples) * config.seq_len *
                     config.n_features);
  data.labels.resize(static_cast<std::size_t>(config.n_samples));

  const auto positives =
      static_cast<int>(std::llround(config.class_balance * config.n_samples));
  for (int i = 0; i < config.n_samples; ++i) {
    data.labels[static_cast<std::size_t>(i)] = (i < positives) ? 1 : 0;
  }

  Rng rng = Rng::stream(config.seed, "datagen");
  const double phi = 0.6;
  const double innovation = std::sqrt(1.0 - phi * phi);  // unit marginal spread
  for (int i = 0; i < config.n_samples; ++i) {
    const double polarity = data.labels[static_cast<std::size_t>(i)] == 1 ? 0.5 : -0.5;
    for (int f = 0; f < config.n_features; ++f) {
      const double direction = (f % 2 == 0) ? 1.0 : -1.0;
      double z = 0.0;
      for (int t = 0; t < config.seq_len; ++t) {
        z = (t == 0) ? rng.normal() : phi * z + innovation * rng.normal();
        const double ramp =
            config.seq_len == 1 ? 1.0 : static_cast<double>(t) / (config.seq_len - 1);
        data.at(i, t, f) = z + polarity * direction * config.separability * ramp;
      }
    }
  }
  return data;
}

std::string export_csv_text(const SequenceDataset& data) {
  std::string out = "sample_id,t";
  for (int f = 1; f <= data.n_features; ++f) out += ",f" + std::to_string(f);
  out += ",label\n";
  for (int i = 0; i < data.size(); ++i) {
    for (int t = 0; t < data.seq_len; ++t) {
      out += std::to_string(i);
      out += ',' + std::to_string(t);
      for (int f = 0; f < data.n_features; ++f) {
        out += ',' + csvio::format_double(data.at(i, t, f));
      }
      out += ',';
      if (t == 0) out += std::to_string(data.labels[static_cast<std::size_t>(i)]);
      out += '\n';
    }
  }
  return out;
}

void export_csv(const SequenceDataset& data, const std::string& path) {
  csvio::write_file(path, export_csv_text(data));
}

SequenceDataset import_csv_text(const std::string& text) {
  const DataTable t = DataTable::from_csv_text(text);
  if (t.col_count() < 4 || t.column_names[0] != "sample_id" || t.column_names[1] != "t" ||
      t.column_names.back() != "label") {
    throw SchemaError("sequence CSV must have columns sample_id,t,f1..fk,label");
  }
  SequenceDataset data;
  data.n_features = static_cast<int>(t.col_count()) - 3;
  if (t.row_count == 0) {
    data.seq_len = 0;
    return data;
  }
  // Rows must be grouped by sample with t ascending from 0, the layout the
  // exporter emits.
  int current = -1;
  int expected_t = 0;
  for (std::size_t r = 0; r < t.row_count; ++r) {
    const auto& sid_cell = t.columns[0][r];
    const auto& t_cell = t.columns[1][r];
    if (!sid_cell || !t_cell) {
      throw SchemaError("sequence CSV row " + std::to_string(r + 1) + ": sample_id/t missing");
    }
    const int sid = static_cast<int>(std::llround(*sid_cell));
    const int ti = static_cast<int>(std::llround(*t_cell));
    if (sid != current) {
      if (sid != current + 1 || ti != 0) {
        throw SchemaError("sequence CSV row " + std::to_string(r + 1) +
                          ": samples must appear in order with t starting at 0");
      }
      if (current >= 0 && data.seq_len == 0) {
        data.seq_len = expected_t;
      }
      if (data.seq_len > 0 && expected_t != data.seq_len) {
        throw SchemaError("sequence CSV: sample " + std::to_string(current) + " has " +
                          std::to_string(expected_t) + " steps, expected " +
                          std::to_string(data.seq_len));
      }
      current = sid;
      expected_t = 0;
      const auto& label_cell = t.columns[t.col_count() - 1][r];
      if (!label_cell) {
        throw SchemaError("sequence CSV: sample " + std::to_string(sid) + " lacks a label");
      }
      const int label = static_cast<int>(std::llround(*label_cell));
      if (label < 0 || std::fabs(*label_cell - label) > 0.0) {
        throw SchemaError("sequence CSV: label must be a non-negative integer, got " +
                          csvio::format_double(*label_cell));
      }
      data.labels.push_back(label);
    }
    if (ti != expected_t) {
      throw SchemaError("sequence CSV row " + std::to_string(r + 1) + ": expected t=" +
                        std::to_string(expected_t) + ", got " + std::to_string(ti));
    }
    ++expected_t;
    for (int f = 0; f < data.n_features; ++f) {
      const auto& cell = t.columns[static_cast<std::size_t>(f) + 2][r];
      if (!cell) {
        throw SchemaError("sequence CSV row " + std::to_string(r + 1) + ": feature f" +
                          std::to_string(f + 1) + " missing");
      }
      data.values.push_back(*cell);
    }
  }
  if (data.seq_len == 0) {
    data.seq_len = expected_t;
  } else if (expected_t != data.seq_len) {
    throw SchemaError("sequence CSV: sample " + std::to_string(current) + " has " +
                      std::to_string(expected_t) + " steps, expected " +
                      std::to_string(data.seq_len));
  }
  return data;
}

SequenceDataset import_csv(const std::string& path) {
  return import_csv_text(csvio::read_file(path));
}

}  // namespace rcad
