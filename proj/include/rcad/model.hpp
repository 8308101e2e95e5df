#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rcad/dataset.hpp"
#include "rcad/preprocess.hpp"
#include "rcad/recurrent.hpp"
#include "rcad/rng.hpp"
#include "rcad/tensor.hpp"

namespace rcad {

enum class Variant { bilstm, gru, hybrid };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Architecture description. hidden_sizes has one entry for bilstm/gru and
// two for hybrid (bilstm width, then gru width).
struct ModelSpec {
  Variant variant = Variant::bilstm;
  int input_size = 0;
  std::vector<int> hidden_sizes;
  int num_classes = 2;
  double dropout_rate = 0.2;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

// Learnable parameters for one ModelSpec. Tensor handles are shared, so
// the optimizer updates the same storage the forward pass reads.
struct ModelParams {
  ModelSpec spec;
  std::optional<LstmCellParams> lstm_fwd, lstm_bwd;  // bilstm / hybrid
  std::optional<GruCellParams> gru;                  // gru / hybrid
  Tensor head_weight;  // [num_classes x feature_dim]
  Tensor head_bias;    // [num_classes]

  static ModelParams init(const ModelSpec& spec, Rng& rng);

  // Stable order: bilstm forward, bilstm backward, gru, head.
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  void zero_grad();
  ModelParams clone() const;
  void check_consistent() const;
};

// Class logits [batch x num_classes] for a [batch x T x input] batch.
// Dropout fires only when training is true (and needs an Rng).
Tensor forward_model(Tape& tape, const ModelParams& params, const Tensor& batch_seq,
                     bool training, Rng* dropout_rng);

struct PredictResult {
  std::vector<int> predictions;
  std::vector<double> scores;  // P(class 1) when binary, else empty
};

PredictResult predict(const ModelParams& params, const SequenceDataset& data,
                      int batch_size = 64);

// Versioned JSON checkpoint: spec + named tensors (+ the feature scaler
// the training run fitted, when present). Round-trips values exactly.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::optional<ScalerState>& scaler);
std::string checkpoint_text(const ModelParams& params, const std::optional<ScalerState>& scaler);
ModelParams load_checkpoint(const std::string& path, std::optional<ScalerState>* scaler_out);
ModelParams checkpoint_from_text(const std::string& text,
                                 std::optional<ScalerState>* scaler_out);

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
  std::int64_t elements = 0;
};

// Central-difference check of backpropagated gradients for every
// parameter tensor of a small seeded model. `corrupt_tensor` perturbs the
// analytic gradient of the named tensor, for harness sanity tests.
std::vector<GradCheckEntry> gradient_check(const ModelSpec& spec, std::uint64_t seed,
                                           double epsilon = 1e-5,
                                           const std::string& corrupt_tensor = "");

// Default small dimensions for gradient checks (input 3, hidden 4 [,3],
// classes 2).
ModelSpec gradcheck_spec(Variant variant);

}  // namespace rcad
