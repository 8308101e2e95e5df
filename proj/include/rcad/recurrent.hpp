#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rcad/rng.hpp"
#include "rcad/tensor.hpp"

namespace rcad {

// Per-gate parameters of one LSTM direction. Input weights are
// [hidden x input], recurrent weights [hidden x hidden], biases [hidden].
struct LstmCellParams {
  Tensor w_input, u_input, b_input;        // input gate
  Tensor w_forget, u_forget, b_forget;     // forget gate
  Tensor w_cell, u_cell, b_cell;           // cell candidate
  Tensor w_output, u_output, b_output;     // output gate

  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases except
  // the forget bias which starts at +1.
  static LstmCellParams init(int input_size, int hidden_size, Rng& rng);
  static LstmCellParams zeros(int input_size, int hidden_size);

  int input_size() const { return w_input.dim(1); }
  int hidden_size() const { return w_input.dim(0); }
  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
  void check_shapes() const;
};

// Reset gate (w_reset/u_reset/b_reset), update gate (w_update/...), and
// the candidate map over [reset*h, x]: w_cand is [hidden x (hidden+input)].
struct GruCellParams {
  Tensor w_reset, u_reset, b_reset;
  Tensor w_update, u_update, b_update;
  Tensor w_cand, b_cand;

  static GruCellParams init(int input_size, int hidden_size, Rng& rng);
  static GruCellParams zeros(int input_size, int hidden_size);

  int input_size() const { return w_reset.dim(1); }
  int hidden_size() const { return w_reset.dim(0); }
  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
  void check_shapes() const;
};

// Recurrent state carried between steps; zero at sequence start. `cell`
// is only used by LSTM cells.
struct HiddenState {
  Tensor h;
  Tensor cell;

  static HiddenState start(int batch, int hidden, bool with_cell);
};

// i,f,o = sigmoid(Wx + Uh + b); g = tanh(Wx + Uh + b);
// c' = f.c + i.g; h' = o.tanh(c')
HiddenState lstm_step(Tape& tape, const LstmCellParams& p, const Tensor& x_t,
                      const HiddenState& state);

// reset m = sigmoid(Wx + Uh + b); update n = sigmoid(Wx + Uh + b);
// candidate = tanh(W.[m*h, x] + b); h' = (1-n).h + n.candidate
HiddenState gru_step(Tape& tape, const GruCellParams& p, const Tensor& x_t,
                     const HiddenState& state);

struct BilstmTrace {
  std::vector<Tensor> step_outputs;  // per t: [batch x 2*hidden]
  Tensor last_forward_h;             // forward state after the final step
  Tensor last_backward_h;            // backward state after its full sweep
};

// One pass per direction over seq[batch x T x in]; per-step outputs are
// the concatenation [forward_t, backward_t].
BilstmTrace bilstm_run(Tape& tape, const LstmCellParams& fwd, const LstmCellParams& bwd,
                       const Tensor& seq);

// Stacked per-step outputs: [batch x T x 2*hidden].
Tensor bilstm_layer(Tape& tape, const LstmCellParams& fwd, const LstmCellParams& bwd,
                    const Tensor& seq);

}  // namespace rcad
