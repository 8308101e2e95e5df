// LSTM/GRU cells, the bidirectional layer, model variants, checkpoints.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "rcad/error.hpp"
#include "rcad/model.hpp"
#include "rcad/recurrent.hpp"
#include "rcad/rng.hpp"

using namespace rcad;

namespace {

double sigma(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

LstmCellParams random_lstm(int input, int hidden, Rng& rng) {
  LstmCellParams p = LstmCellParams::zeros(input, hidden);
  for (auto& [name, t] : p.named("p")) {
    for (double& v : t.values()) v = rng.uniform(-0.7, 0.7);
  }
  return p;
}

GruCellParams random_gru(int input, int hidden, Rng& rng) {
  GruCellParams p = GruCellParams::zeros(input, hidden);
  for (auto& [name, t] : p.named("p")) {
    for (double& v : t.values()) v = rng.uniform(-0.7, 0.7);
  }
  return p;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Per-element reference LSTM step, no tensor machinery.
void lstm_oracle(const LstmCellParams& p, const Tensor& x, const Tensor& h0, const Tensor& c0,
                 Tensor& h1, Tensor& c1) {
  const int batch = x.dim(0), in = p.input_size(), hidden = p.hidden_size();
  auto gate = [&](const Tensor& w, const Tensor& u, const Tensor& b, int s, int j) {
    double acc = b(j);
    for (int i = 0; i < in; ++i) acc += w(j, i) * x(s, i);
    for (int i = 0; i < hidden; ++i) acc += u(j, i) * h0(s, i);
    return acc;
  };
  for (int s = 0; s < batch; ++s) {
    for (int j = 0; j < hidden; ++j) {
      const double gi = sigma(gate(p.w_input, p.u_input, p.b_input, s, j));
      const double gf = sigma(gate(p.w_forget, p.u_forget, p.b_forget, s, j));
      const double gg = std::tanh(gate(p.w_cell, p.u_cell, p.b_cell, s, j));
      const double go = sigma(gate(p.w_output, p.u_output, p.b_output, s, j));
      c1(s, j) = gf * c0(s, j) + gi * gg;
      h1(s, j) = go * std::tanh(c1(s, j));
    }
  }
}

// Per-element reference GRU step.
void gru_oracle(const GruCellParams& p, const Tensor& x, const Tensor& h0, Tensor& h1) {
  const int batch = x.dim(0), in = p.input_size(), hidden = p.hidden_size();
  for (int s = 0; s < batch; ++s) {
    std::vector<double> reset(hidden), update(hidden);
    for (int j = 0; j < hidden; ++j) {
      double ar = p.b_reset(j), au = p.b_update(j);
      for (int i = 0; i < in; ++i) {
        ar += p.w_reset(j, i) * x(s, i);
        au += p.w_update(j, i) * x(s, i);
      }
      for (int i = 0; i < hidden; ++i) {
        ar += p.u_reset(j, i) * h0(s, i);
        au += p.u_update(j, i) * h0(s, i);
      }
      reset[j] = sigma(ar);
      update[j] = sigma(au);
    }
    for (int j = 0; j < hidden; ++j) {
      double acc = p.b_cand(j);
      // candidate input is [reset*h, x]
      for (int i = 0; i < hidden; ++i) acc += p.w_cand(j, i) * reset[i] * h0(s, i);
      for (int i = 0; i < in; ++i) acc += p.w_cand(j, hidden + i) * x(s, i);
      const double cand = std::tanh(acc);
      h1(s, j) = (1.0 - update[j]) * h0(s, j) + update[j] * cand;
    }
  }
}

}  // namespace

TEST_CASE("lstm_step: zero parameters and zero state give zero output") {
  Tape tape;
  const LstmCellParams p = LstmCellParams::zeros(3, 2);
  const Tensor x({2, 3}, {1, -2, 3, 0.5, 0.25, -1});
  const HiddenState next = lstm_step(tape, p, x, HiddenState::start(2, 2, true));
  for (const double v : next.h.values()) CHECK(v == 0.0);
  for (const double v : next.cell.values()) CHECK(v == 0.0);
}

TEST_CASE("lstm_step: forget 1 / input 0 carries the cell exactly") {
  Rng rng(5);
  LstmCellParams p = random_lstm(3, 4, rng);
  // saturate the gates: sigma(+-1000) is exactly 1/0 in doubles
  for (double& v : p.w_forget.values()) v = 0.0;
  for (double& v : p.u_forget.values()) v = 0.0;
  for (double& v : p.b_forget.values()) v = 1e3;
  for (double& v : p.w_input.values()) v = 0.0;
  for (double& v : p.u_input.values()) v = 0.0;
  for (double& v : p.b_input.values()) v = -1e3;

  HiddenState state = HiddenState::start(2, 4, true);
  Rng data_rng(6);
  state.cell = random_tensor({2, 4}, data_rng);
  state.h = random_tensor({2, 4}, data_rng);
  Tape tape;
  const HiddenState next = lstm_step(tape, p, random_tensor({2, 3}, data_rng), state);
  for (std::size_t i = 0; i < next.cell.values().size(); ++i) {
    CHECK(next.cell.values()[i] == state.cell.values()[i]);
  }
}

TEST_CASE("lstm_step matches the scalar-loop oracle") {
  Rng rng(9);
  for (int trial = 0; trial < 4; ++trial) {
    const LstmCellParams p = random_lstm(3, 2, rng);
    const Tensor x = random_tensor({2, 3}, rng);
    HiddenState state = HiddenState::start(2, 2, true);
    state.h = random_tensor({2, 2}, rng);
    state.cell = random_tensor({2, 2}, rng);

    Tape tape;
    const HiddenState next = lstm_step(tape, p, x, state);
    Tensor oh({2, 2}), oc({2, 2});
    lstm_oracle(p, x, state.h, state.cell, oh, oc);
    for (int s = 0; s < 2; ++s) {
      for (int j = 0; j < 2; ++j) {
        CHECK(std::fabs(next.h(s, j) - oh(s, j)) < 1e-12);
        CHECK(std::fabs(next.cell(s, j) - oc(s, j)) < 1e-12);
      }
    }
  }
}

TEST_CASE("gru_step: update gate forced off keeps the state") {
  Rng rng(13);
  GruCellParams p = random_gru(3, 4, rng);
  for (double& v : p.w_update.values()) v = 0.0;
  for (double& v : p.u_update.values()) v = 0.0;
  for (double& v : p.b_update.values()) v = -1e3;

  HiddenState state = HiddenState::start(2, 4, false);
  state.h = random_tensor({2, 4}, rng);
  for (int t = 0; t < 10; ++t) {
    Tape tape;
    const HiddenState next = gru_step(tape, p, random_tensor({2, 3}, rng), state);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < next.h.values().size(); ++i) {
      max_diff = std::max(max_diff, std::fabs(next.h.values()[i] - state.h.values()[i]));
    }
    CHECK(max_diff < 1e-12);
    state = next;
  }
}

TEST_CASE("gru_step: zero parameters and zero state is a fixed point") {
  const GruCellParams p = GruCellParams::zeros(3, 2);
  HiddenState state = HiddenState::start(2, 2, false);
  Rng rng(15);
  for (int t = 0; t < 5; ++t) {
    Tape tape;
    state = gru_step(tape, p, random_tensor({2, 3}, rng), state);
    for (const double v : state.h.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("gru_step matches the scalar-loop oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 4; ++trial) {
    const GruCellParams p = random_gru(3, 2, rng);
    const Tensor x = random_tensor({2, 3}, rng);
    HiddenState state = HiddenState::start(2, 2, false);
    state.h = random_tensor({2, 2}, rng);

    Tape tape;
    const HiddenState next = gru_step(tape, p, x, state);
    Tensor oh({2, 2});
    gru_oracle(p, x, state.h, oh);
    for (int s = 0; s < 2; ++s) {
      for (int j = 0; j < 2; ++j) {
        CHECK(std::fabs(next.h(s, j) - oh(s, j)) < 1e-12);
      }
    }
  }
}

TEST_CASE("bilstm with T=1 concatenates two independent single steps") {
  Rng rng(21);
  const LstmCellParams fwd = random_lstm(3, 2, rng);
  const LstmCellParams bwd = random_lstm(3, 2, rng);
  const Tensor seq = random_tensor({2, 1, 3}, rng);

  Tape tape;
  const Tensor out = bilstm_layer(tape, fwd, bwd, seq);
  REQUIRE(out.shape() == std::vector<int>{2, 1, 4});

  Tape manual;
  const Tensor x = manual.time_slice(seq, 0);
  const HiddenState f = lstm_step(manual, fwd, x, HiddenState::start(2, 2, true));
  const HiddenState b = lstm_step(manual, bwd, x, HiddenState::start(2, 2, true));
  for (int s = 0; s < 2; ++s) {
    for (int j = 0; j < 2; ++j) {
      CHECK(out(s, 0, j) == f.h(s, j));
      CHECK(out(s, 0, 2 + j) == b.h(s, j));
    }
  }
}

TEST_CASE("bilstm time-reversal symmetry with shared parameters") {
  Rng rng(25);
  const LstmCellParams p = random_lstm(3, 2, rng);
  const Tensor seq = random_tensor({2, 4, 3}, rng);
  Tensor reversed(seq.shape());
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 4; ++t) {
      for (int f = 0; f < 3; ++f) reversed(s, t, f) = seq(s, 3 - t, f);
    }
  }
  Tape t1, t2;
  const Tensor out = bilstm_layer(t1, p, p, seq);
  const Tensor out_rev = bilstm_layer(t2, p, p, reversed);
  // forward half on seq at time t == backward half on reversed seq at T-1-t
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 4; ++t) {
      for (int j = 0; j < 2; ++j) {
        CHECK(out(s, t, j) == doctest::Approx(out_rev(s, 3 - t, 2 + j)).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("bilstm matches composing lstm_step by hand") {
  Rng rng(27);
  const LstmCellParams fwd = random_lstm(3, 2, rng);
  const LstmCellParams bwd = random_lstm(3, 2, rng);
  const Tensor seq = random_tensor({2, 3, 3}, rng);

  Tape tape;
  const Tensor out = bilstm_layer(tape, fwd, bwd, seq);

  Tape manual;
  HiddenState fs = HiddenState::start(2, 2, true);
  std::vector<Tensor> fh;
  for (int t = 0; t < 3; ++t) {
    fs = lstm_step(manual, fwd, manual.time_slice(seq, t), fs);
    fh.push_back(fs.h);
  }
  HiddenState bs = HiddenState::start(2, 2, true);
  std::vector<Tensor> bh(3);
  for (int t = 2; t >= 0; --t) {
    bs = lstm_step(manual, bwd, manual.time_slice(seq, t), bs);
    bh[static_cast<std::size_t>(t)] = bs.h;
  }
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 3; ++t) {
      for (int j = 0; j < 2; ++j) {
        CHECK(std::fabs(out(s, t, j) - fh[static_cast<std::size_t>(t)](s, j)) < 1e-12);
        CHECK(std::fabs(out(s, t, 2 + j) - bh[static_cast<std::size_t>(t)](s, j)) < 1e-12);
      }
    }
  }
}

TEST_CASE("zeroed backward direction reproduces a plain unidirectional LSTM") {
  Rng rng(33);
  const LstmCellParams fwd = random_lstm(3, 4, rng);
  const LstmCellParams bwd = LstmCellParams::zeros(3, 4);
  const Tensor seq = random_tensor({2, 5, 3}, rng);

  Tape tape;
  const Tensor out = bilstm_layer(tape, fwd, bwd, seq);

  Tape manual;
  HiddenState state = HiddenState::start(2, 4, true);
  std::vector<Tensor> hs;
  for (int t = 0; t < 5; ++t) {
    state = lstm_step(manual, fwd, manual.time_slice(seq, t), state);
    hs.push_back(state.h);
  }
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 5; ++t) {
      for (int j = 0; j < 4; ++j) {
        CHECK(out(s, t, j) == hs[static_cast<std::size_t>(t)](s, j));  // exact
      }
    }
  }
}

TEST_CASE("bilstm rejects an empty or malformed sequence") {
  Rng rng(35);
  const LstmCellParams p = random_lstm(3, 2, rng);
  Tape tape;
  CHECK_THROWS_AS(bilstm_layer(tape, p, p, Tensor({2, 3})), InputError);
}

TEST_CASE("forward_model: zero head gives uniform class probabilities") {
  Rng rng(37);
  ModelSpec spec;
  spec.variant = Variant::bilstm;
  spec.input_size = 3;
  spec.hidden_sizes = {4};
  spec.dropout_rate = 0.0;
  ModelParams params = ModelParams::init(spec, rng);
  for (double& v : params.head_weight.values()) v = 0.0;
  for (double& v : params.head_bias.values()) v = 0.0;

  Tape tape;
  const Tensor logits = forward_model(tape, params, random_tensor({2, 4, 3}, rng), false, nullptr);
  for (const double v : logits.values()) CHECK(v == 0.0);
  const Tensor probs = softmax(logits);
  for (const double v : probs.values()) CHECK(v == 0.5);
}

TEST_CASE("forward_model: identical sequences give identical logits") {
  Rng rng(39);
  for (const Variant variant : {Variant::bilstm, Variant::gru, Variant::hybrid}) {
    ModelSpec spec;
    spec.variant = variant;
    spec.input_size = 3;
    spec.hidden_sizes = variant == Variant::hybrid ? std::vector<int>{4, 3} : std::vector<int>{4};
    spec.dropout_rate = 0.0;
    ModelParams params = ModelParams::init(spec, rng);

    Tensor one = random_tensor({1, 4, 3}, rng);
    Tensor batch({3, 4, 3});
    for (int s = 0; s < 3; ++s) {
      for (int t = 0; t < 4; ++t) {
        for (int f = 0; f < 3; ++f) batch(s, t, f) = one(0, t, f);
      }
    }
    Tape tape;
    const Tensor logits = forward_model(tape, params, batch, false, nullptr);
    for (int s = 1; s < 3; ++s) {
      for (int c = 0; c < 2; ++c) CHECK(logits(s, c) == logits(0, c));
    }
  }
}

TEST_CASE("forward_model: hybrid shape propagation") {
  Rng rng(41);
  ModelSpec spec;
  spec.variant = Variant::hybrid;
  spec.input_size = 5;
  spec.hidden_sizes = {4, 3};
  spec.dropout_rate = 0.0;
  ModelParams params = ModelParams::init(spec, rng);
  Tape tape;
  const Tensor logits = forward_model(tape, params, random_tensor({2, 6, 5}, rng), false, nullptr);
  CHECK(logits.shape() == std::vector<int>{2, 2});
}

TEST_CASE("forward_model: permuting the batch permutes outputs identically") {
  Rng rng(43);
  ModelSpec spec;
  spec.variant = Variant::hybrid;
  spec.input_size = 3;
  spec.hidden_sizes = {4, 3};
  spec.dropout_rate = 0.0;
  ModelParams params = ModelParams::init(spec, rng);

  const Tensor batch = random_tensor({3, 4, 3}, rng);
  Tensor permuted(batch.shape());
  const int perm[3] = {2, 0, 1};
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 4; ++t) {
      for (int f = 0; f < 3; ++f) permuted(s, t, f) = batch(perm[s], t, f);
    }
  }
  Tape t1, t2;
  const Tensor a = forward_model(t1, params, batch, false, nullptr);
  const Tensor b = forward_model(t2, params, permuted, false, nullptr);
  for (int s = 0; s < 3; ++s) {
    for (int c = 0; c < 2; ++c) CHECK(b(s, c) == a(perm[s], c));
  }
}

TEST_CASE("forward_model rejects mismatched variants and inputs") {
  Rng rng(45);
  ModelSpec spec;
  spec.variant = Variant::gru;
  spec.input_size = 3;
  spec.hidden_sizes = {4};
  ModelParams params = ModelParams::init(spec, rng);
  params.spec.variant = Variant::bilstm;  // now inconsistent with stored tensors
  Tape tape;
  CHECK_THROWS_AS(forward_model(tape, params, random_tensor({2, 4, 3}, rng), false, nullptr),
                  ConfigError);

  ModelParams good = ModelParams::init(spec, rng);
  CHECK_THROWS_AS(forward_model(tape, good, random_tensor({2, 4, 5}, rng), false, nullptr),
                  DimensionError);
}

TEST_CASE("full-model gradient check for all variants") {
  for (const Variant variant : {Variant::bilstm, Variant::gru, Variant::hybrid}) {
    const auto entries = gradient_check(gradcheck_spec(variant), 77);
    CHECK_FALSE(entries.empty());
    for (const auto& e : entries) {
      INFO(variant_name(variant), " ", e.tensor);
      CHECK(e.max_rel_err < 1e-4);
    }
  }
}

TEST_CASE("gradient check corruption hook fails on the named tensor") {
  const auto entries = gradient_check(gradcheck_spec(Variant::gru), 77, 1e-5, "gru.b_update");
  bool saw_failure = false;
  for (const auto& e : entries) {
    if (e.tensor == "gru.b_update") {
      saw_failure = e.max_rel_err > 1e-4;
    } else {
      CHECK(e.max_rel_err < 1e-4);
    }
  }
  CHECK(saw_failure);
}

TEST_CASE("checkpoint round trip is value-exact") {
  Rng rng(47);
  ModelSpec spec;
  spec.variant = Variant::hybrid;
  spec.input_size = 4;
  spec.hidden_sizes = {3, 2};
  ModelParams params = ModelParams::init(spec, rng);

  ScalerState scaler;
  scaler.column_names = {"f1", "f2", "f3", "f4"};
  scaler.mean = {0.1, -0.2, 0.3, 1e-17};
  scaler.spread = {1.0, 2.0, 0.0, 0.5};
  scaler.degenerate = {false, false, true, false};

  const std::string text = checkpoint_text(params, scaler);
  std::optional<ScalerState> loaded_scaler;
  const ModelParams loaded = checkpoint_from_text(text, &loaded_scaler);

  CHECK(loaded.spec == spec);
  const auto a = params.named_tensors();
  const auto b = loaded.named_tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.values() == b[i].second.values());  // bit-exact
  }
  REQUIRE(loaded_scaler.has_value());
  CHECK(loaded_scaler->mean == scaler.mean);
  CHECK(loaded_scaler->spread == scaler.spread);
}

TEST_CASE("checkpoint loader rejects tampered files") {
  Rng rng(49);
  ModelSpec spec;
  spec.variant = Variant::gru;
  spec.input_size = 2;
  spec.hidden_sizes = {2};
  const ModelParams params = ModelParams::init(spec, rng);
  std::string text = checkpoint_text(params, std::nullopt);

  std::optional<ScalerState> none;
  CHECK_THROWS_AS(checkpoint_from_text("{}", &none), SchemaError);

  // renaming a tensor must be caught
  auto pos = text.find("gru.b_reset");
  REQUIRE(pos != std::string::npos);
  std::string renamed = text;
  renamed.replace(pos, 11, "gru.b_wrong");
  CHECK_THROWS_AS(checkpoint_from_text(renamed, &none), SchemaError);
}
