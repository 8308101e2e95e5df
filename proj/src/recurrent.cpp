#include "rcad/recurrent.hpp"

#include <cmath>

#include "rcad/error.hpp"

namespace rcad {

namespace {

Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

// Wx + Uh + b for one gate.
Tensor gate_preact(Tape& tape, const Tensor& w, const Tensor& u, const Tensor& b,
                   const Tensor& x_t, const Tensor& h) {
  Tensor wx = tape.matmul(x_t, tape.transpose(w));
  Tensor uh = tape.matmul(h, tape.transpose(u));
  return tape.add_bias(tape.add(wx, uh), b);
}

}  // namespace

LstmCellParams LstmCellParams::init(int input_size, int hidden_size, Rng& rng) {
  LstmCellParams p;
  auto w = [&] { return uniform_init({hidden_size, input_size}, input_size, rng); };
  auto u = [&] { return uniform_init({hidden_size, hidden_size}, hidden_size, rng); };
  p.w_input = w();  p.u_input = u();  p.b_input = Tensor::zeros({hidden_size});
  p.w_forget = w(); p.u_forget = u(); p.b_forget = Tensor::full({hidden_size}, 1.0);
  p.w_cell = w();   p.u_cell = u();   p.b_cell = Tensor::zeros({hidden_size});
  p.w_output = w(); p.u_output = u(); p.b_output = Tensor::zeros({hidden_size});
  return p;
}

LstmCellParams LstmCellParams::zeros(int input_size, int hidden_size) {
  LstmCellParams p;
  p.w_input = Tensor::zeros({hidden_size, input_size});
  p.u_input = Tensor::zeros({hidden_size, hidden_size});
  p.b_input = Tensor::zeros({hidden_size});
  p.w_forget = Tensor::zeros({hidden_size, input_size});
  p.u_forget = Tensor::zeros({hidden_size, hidden_size});
  p.b_forget = Tensor::zeros({hidden_size});
  p.w_cell = Tensor::zeros({hidden_size, input_size});
  p.u_cell = Tensor::zeros({hidden_size, hidden_size});
  p.b_cell = Tensor::zeros({hidden_size});
  p.w_output = Tensor::zeros({hidden_size, input_size});
  p.u_output = Tensor::zeros({hidden_size, hidden_size});
  p.b_output = Tensor::zeros({hidden_size});
  return p;
}

std::vector<std::pair<std::string, Tensor>> LstmCellParams::named(
    const std::string& prefix) const {
  return {
      {prefix + ".w_input", w_input},   {prefix + ".u_input", u_input},
      {prefix + ".b_input", b_input},   {prefix + ".w_forget", w_forget},
      {prefix + ".u_forget", u_forget}, {prefix + ".b_forget", b_forget},
      {prefix + ".w_cell", w_cell},     {prefix + ".u_cell", u_cell},
      {prefix + ".b_cell", b_cell},     {prefix + ".w_output", w_output},
      {prefix + ".u_output", u_output}, {prefix + ".b_output", b_output},
  };
}

void LstmCellParams::check_shapes() const {
  const int h = hidden_size(), in = input_size();
  for (const auto& [name, t] : named("lstm")) {
    const bool is_w = name.find(".w_") != std::string::npos;
    const bool is_u = name.find(".u_") != std::string::npos;
    const std::vector<int> want = is_w   ? std::vector<int>{h, in}
                                  : is_u ? std::vector<int>{h, h}
                                         : std::vector<int>{h};
    require(t.defined() && t.shape() == want,
            name + " has shape " + (t.defined() ? t.shape_str() : "[?]") + ", expected " +
                shape_to_string(want));
  }
}

GruCellParams GruCellParams::init(int input_size, int hidden_size, Rng& rng) {
  GruCellParams p;
  p.w_reset = uniform_init({hidden_size, input_size}, input_size, rng);
  p.u_reset = uniform_init({hidden_size, hidden_size}, hidden_size, rng);
  p.b_reset = Tensor::zeros({hidden_size});
  p.w_update = uniform_init({hidden_size, input_size}, input_size, rng);
  p.u_update = uniform_init({hidden_size, hidden_size}, hidden_size, rng);
  p.b_update = Tensor::zeros({hidden_size});
  p.w_cand = uniform_init({hidden_size, hidden_size + input_size}, hidden_size + input_size, rng);
  p.b_cand = Tensor::zeros({hidden_size});
  return p;
}

GruCellParams GruCellParams::zeros(int input_size, int hidden_size) {
  GruCellParams p;
  p.w_reset = Tensor::zeros({hidden_size, input_size});
  p.u_reset = Tensor::zeros({hidden_size, hidden_size});
  p.b_reset = Tensor::zeros({hidden_size});
  p.w_update = Tensor::zeros({hidden_size, input_size});
  p.u_update = Tensor::zeros({hidden_size, hidden_size});
  p.b_update = Tensor::zeros({hidden_size});
  p.w_cand = Tensor::zeros({hidden_size, hidden_size + input_size});
  p.b_cand = Tensor::zeros({hidden_size});
  return p;
}

std::vector<std::pair<std::string, Tensor>> GruCellParams::named(
    const std::string& prefix) const {
  return {
      {prefix + ".w_reset", w_reset},   {prefix + ".u_reset", u_reset},
      {prefix + ".b_reset", b_reset},   {prefix + ".w_update", w_update},
      {prefix + ".u_update", u_update}, {prefix + ".b_update", b_update},
      {prefix + ".w_cand", w_cand},     {prefix + ".b_cand", b_cand},
  };
}

void GruCellParams::check_shapes() const {
  const int h = hidden_size(), in = input_size();
  require(w_reset.shape() == std::vector<int>{h, in}, "gru w_reset shape");
  require(u_reset.shape() == std::vector<int>{h, h}, "gru u_reset shape");
  require(b_reset.shape() == std::vector<int>{h}, "gru b_reset shape");
  require(w_update.shape() == std::vector<int>{h, in}, "gru w_update shape");
  require(u_update.shape() == std::vector<int>{h, h}, "gru u_update shape");
  require(b_update.shape() == std::vector<int>{h}, "gru b_update shape");
  require(w_cand.shape() == std::vector<int>{h, h + in}, "gru w_cand shape");
  require(b_cand.shape() == std::vector<int>{h}, "gru b_cand shape");
}

HiddenState HiddenState::start(int batch, int hidden, bool with_cell) {
  HiddenState s;
  s.h = Tensor::zeros({batch, hidden});
  if (with_cell) s.cell = Tensor::zeros({batch, hidden});
  return s;
}

HiddenState lstm_step(Tape& tape, const LstmCellParams& p, const Tensor& x_t,
                      const HiddenState& state) {
  if (x_t.rank() != 2 || x_t.dim(1) != p.input_size()) {
    throw DimensionError("lstm_step: input " + x_t.shape_str() + " does not match cell input " +
                         std::to_string(p.input_size()));
  }
  if (!state.h.defined() || !state.cell.defined() || state.h.dim(1) != p.hidden_size()) {
    throw DimensionError("lstm_step: state does not match hidden size " +
                         std::to_string(p.hidden_size()));
  }
  Tensor gate_in = tape.sigmoid(gate_preact(tape, p.w_input, p.u_input, p.b_input, x_t, state.h));
  Tensor gate_fg =
      tape.sigmoid(gate_preact(tape, p.w_forget, p.u_forget, p.b_forget, x_t, state.h));
  Tensor cand = tape.tanh_act(gate_preact(tape, p.w_cell, p.u_cell, p.b_cell, x_t, state.h));
  Tensor gate_out =
      tape.sigmoid(gate_preact(tape, p.w_output, p.u_output, p.b_output, x_t, state.h));

  HiddenState next;
  next.cell = tape.add(tape.mul(gate_fg, state.cell), tape.mul(gate_in, cand));
  next.h = tape.mul(gate_out, tape.tanh_act(next.cell));
  return next;
}

HiddenState gru_step(Tape& tape, const GruCellParams& p, const Tensor& x_t,
                     const HiddenState& state) {
  if (x_t.rank() != 2 || x_t.dim(1) != p.input_size()) {
    throw DimensionError("gru_step: input " + x_t.shape_str() + " does not match cell input " +
                         std::to_string(p.input_size()));
  }
  if (!state.h.defined() || state.h.dim(1) != p.hidden_size()) {
    throw DimensionError("gru_step: state does not match hidden size " +
                         std::to_string(p.hidden_size()));
  }
  Tensor reset = tape.sigmoid(gate_preact(tape, p.w_reset, p.u_reset, p.b_reset, x_t, state.h));
  Tensor update =
      tape.sigmoid(gate_preact(tape, p.w_update, p.u_update, p.b_update, x_t, state.h));
  Tensor gated_h = tape.mul(reset, state.h);
  Tensor cand = tape.tanh_act(tape.add_bias(
      tape.matmul(tape.concat_cols(gated_h, x_t), tape.transpose(p.w_cand)), p.b_cand));
  // carry (1 - update) of the old state, blend in the candidate
  Tensor carry = tape.mul(tape.scale_add(update, -1.0, 1.0), state.h);
  HiddenState next;
  next.h = tape.add(carry, tape.mul(update, cand));
  return next;
}

BilstmTrace bilstm_run(Tape& tape, const LstmCellParams& fwd, const LstmCellParams& bwd,
                       const Tensor& seq) {
  if (!seq.defined() || seq.rank() != 3) {
    throw InputError("bilstm: expected a [batch x T x features] sequence");
  }
  const int batch = seq.dim(0);
  const int steps = seq.dim(1);
  if (steps < 1) {
    throw InputError("bilstm: empty sequence");
  }
  if (fwd.hidden_size() != bwd.hidden_size()) {
    throw DimensionError("bilstm: direction hidden sizes differ");
  }

  std::vector<Tensor> forward_h(static_cast<std::size_t>(steps));
  HiddenState state = HiddenState::start(batch, fwd.hidden_size(), true);
  for (int t = 0; t < steps; ++t) {
    state = lstm_step(tape, fwd, tape.time_slice(seq, t), state);
    forward_h[static_cast<std::size_t>(t)] = state.h;
  }
  Tensor last_fwd = state.h;

  std::vector<Tensor> backward_h(static_cast<std::size_t>(steps));
  state = HiddenState::start(batch, bwd.hidden_size(), true);
  for (int t = steps - 1; t >= 0; --t) {
    state = lstm_step(tape, bwd, tape.time_slice(seq, t), state);
    backward_h[static_cast<std::size_t>(t)] = state.h;
  }
  Tensor last_bwd = state.h;

  BilstmTrace trace;
  trace.step_outputs.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    trace.step_outputs.push_back(tape.concat_cols(forward_h[static_cast<std::size_t>(t)],
                                                  backward_h[static_cast<std::size_t>(t)]));
  }
  trace.last_forward_h = last_fwd;
  trace.last_backward_h = last_bwd;
  return trace;
}

Tensor bilstm_layer(Tape& tape, const LstmCellParams& fwd, const LstmCellParams& bwd,
                    const Tensor& seq) {
  return tape.stack_time(bilstm_run(tape, fwd, bwd, seq).step_outputs);
}

}  // namespace rcad
