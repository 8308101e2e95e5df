#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rcad/dataset.hpp"
#include "rcad/model.hpp"
#include "rcad/preprocess.hpp"

namespace rcad {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  enum class Optimizer { sgd, adam };
  Optimizer optimizer = Optimizer::adam;
  double val_fraction = 0.2;
  std::uint64_t seed = 42;
  int early_stop_patience = 0;  // 0 = run all epochs
  bool standardize = true;      // fit a z-score scaler on the train split

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainingHistory {
  std::vector<EpochStats> epochs;

  std::string to_csv_text() const;
  void to_csv(const std::string& path) const;
  double best_val_accuracy() const;
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
};

// Seeded stratified split; per-class validation counts are
// round(val_fraction * class_count), clamped so both sides keep every
// class. Row order never changes the result beyond the seed.
SplitIndices stratified_split(const SequenceDataset& data, double val_fraction,
                              std::uint64_t seed);

// One Adam update with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::int64_t t, double lr, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr) : lr_(lr) {}
  void step(std::vector<Tensor>& params);

 private:
  double lr_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

class SgdOptimizer {
 public:
  explicit SgdOptimizer(double lr) : lr_(lr) {}
  void step(std::vector<Tensor>& params);

 private:
  double lr_;
};

struct TrainResult {
  ModelParams params;
  TrainingHistory history;
  ScalerState scaler;  // empty column list when standardize is off
};

// Shuffled mini-batch training with a per-epoch validation pass. All
// randomness (split, init, shuffles, dropout) derives from config.seed,
// so equal configs replay bit-identically. With early stopping on, the
// returned parameters are the best-validation-accuracy snapshot.
TrainResult train(const ModelSpec& spec, const TrainConfig& config,
                  const SequenceDataset& data);

// Scaler over sequence features (named f1..fk), fitted on the given
// sample indices across all timesteps.
ScalerState fit_sequence_scaler(const SequenceDataset& data, const std::vector<int>& indices);
SequenceDataset apply_sequence_scaler(const SequenceDataset& data, const ScalerState& scaler);

// Two line plots of the history (loss pair and accuracy pair).
std::string history_svg_text(const TrainingHistory& history, bool accuracy_plot);
void write_history_svg(const TrainingHistory& history, const std::string& loss_path,
                       const std::string& accuracy_path);

}  // namespace rcad
