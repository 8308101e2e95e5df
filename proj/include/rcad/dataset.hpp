#pragma once

#include <string>
#include <vector>

#include "rcad/tensor.hpp"

namespace rcad {

// Batched fixed-length sequences: n samples x T timesteps x F features,
// with one integer class label per sample.
struct SequenceDataset {
  int seq_len = 0;
  int n_features = 0;
  std::vector<double> values;  // n * T * F, row-major
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  bool empty() const { return labels.empty(); }
  int num_classes() const;

  double at(int sample, int t, int f) const {
    return values[(static_cast<std::size_t>(sample) * seq_len + t) * n_features + f];
  }
  double& at(int sample, int t, int f) {
    return values[(static_cast<std::size_t>(sample) * seq_len + t) * n_features + f];
  }

  // [batch x T x F] tensor for the given sample indices.
  Tensor batch_tensor(const std::vector<int>& indices) const;
  std::vector<int> batch_labels(const std::vector<int>& indices) const;
};

}  // namespace rcad
