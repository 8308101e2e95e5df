#pragma once

#include <cstdint>
#include <string>

#include "rcad/dataset.hpp"

namespace rcad {

// Synthetic binary sequence-classification task. Each feature follows a
// stationary AR(1) process with unit marginal spread; the two classes pull
// the process apart with an opposite-signed drift that ramps up over the
// sequence, `separability` marginal spreads wide at the final step.
struct GenConfig {
  int n_samples = 1000;
  int seq_len = 10;
  int n_features = 6;
  double class_balance = 0.5;  // fraction of positive (class 1) samples
  double separability = 2.0;
  std::uint64_t seed = 42;

  void validate() const;
};

SequenceDataset generate(const GenConfig& config);

// Long-format CSV: sample_id, t, f1..fk, label (label present on t==0
// rows only). import(export(x)) reproduces x exactly.
std::string export_csv_text(const SequenceDataset& data);
void export_csv(const SequenceDataset& data, const std::string& path);
SequenceDataset import_csv_text(const std::string& text);
SequenceDataset import_csv(const std::string& path);

}  // namespace rcad
