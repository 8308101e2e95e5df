#include "rcad/model.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "rcad/error.hpp"

namespace rcad {

namespace {

// Inverted dropout: zero with probability rate, scale survivors by
// 1/(1-rate) so eval needs no rescaling.
Tensor dropout(Tape& tape, const Tensor& x, double rate, bool training, Rng* rng) {
  if (!training || rate <= 0.0) return x;
  if (rng == nullptr) {
    throw ConfigError("training-mode forward with dropout needs a random source");
  }
  Tensor mask(x.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) {
    m = (rng->uniform() >= rate) ? keep_scale : 0.0;
  }
  return tape.mul(x, mask);
}

Tensor dense_head(Tape& tape, const ModelParams& p, const Tensor& features) {
  return tape.add_bias(tape.matmul(features, tape.transpose(p.head_weight)), p.head_bias);
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::bilstm: return "bilstm";
    case Variant::gru: return "gru";
    case Variant::hybrid: return "hybrid";
  }
  throw ConfigError("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "bilstm") return Variant::bilstm;
  if (name == "gru") return Variant::gru;
  if (name == "hybrid") return Variant::hybrid;
  throw ConfigError("unknown model variant '" + name + "' (expected bilstm, gru, or hybrid)");
}

void ModelSpec::validate() const {
  if (input_size < 1) throw ConfigError("model input_size must be >= 1");
  if (num_classes < 2) throw ConfigError("model num_classes must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }
  const std::size_t want = variant == Variant::hybrid ? 2 : 1;
  if (hidden_sizes.size() != want) {
    throw ConfigError("variant " + variant_name(variant) + " needs " + std::to_string(want) +
                      " hidden size(s), got " + std::to_string(hidden_sizes.size()));
  }
  for (const int h : hidden_sizes) {
    if (h < 1) throw ConfigError("hidden sizes must be >= 1");
  }
}

ModelParams ModelParams::init(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  int feature_dim = 0;
  switch (spec.variant) {
    case Variant::bilstm: {
      const int h = spec.hidden_sizes[0];
      p.lstm_fwd = LstmCellParams::init(spec.input_size, h, rng);
      p.lstm_bwd = LstmCellParams::init(spec.input_size, h, rng);
      feature_dim = 2 * h;
      break;
    }
    case Variant::gru: {
      const int h = spec.hidden_sizes[0];
      p.gru = GruCellParams::init(spec.input_size, h, rng);
      feature_dim = h;
      break;
    }
    case Variant::hybrid: {
      const int h1 = spec.hidden_sizes[0];
      const int h2 = spec.hidden_sizes[1];
      p.lstm_fwd = LstmCellParams::init(spec.input_size, h1, rng);
      p.lstm_bwd = LstmCellParams::init(spec.input_size, h1, rng);
      p.gru = GruCellParams::init(2 * h1, h2, rng);
      feature_dim = h2;
      break;
    }
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  p.head_weight = Tensor({spec.num_classes, feature_dim});
  for (double& v : p.head_weight.values()) v = rng.uniform(-bound, bound);
  p.head_bias = Tensor::zeros({spec.num_classes});
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  if (lstm_fwd) {
    auto fwd = lstm_fwd->named("bilstm.fwd");
    out.insert(out.end(), fwd.begin(), fwd.end());
  }
  if (lstm_bwd) {
    auto bwd = lstm_bwd->named("bilstm.bwd");
    out.insert(out.end(), bwd.begin(), bwd.end());
  }
  if (gru) {
    auto g = gru->named("gru");
    out.insert(out.end(), g.begin(), g.end());
  }
  out.emplace_back("head.weight", head_weight);
  out.emplace_back("head.bias", head_bias);
  return out;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : named_tensors()) {
    t.zero_grad();
  }
}

ModelParams ModelParams::clone() const {
  ModelParams p;
  p.spec = spec;
  auto copy_lstm = [](const LstmCellParams& c) {
    LstmCellParams o;
    o.w_input = c.w_input.clone();   o.u_input = c.u_input.clone();   o.b_input = c.b_input.clone();
    o.w_forget = c.w_forget.clone(); o.u_forget = c.u_forget.clone(); o.b_forget = c.b_forget.clone();
    o.w_cell = c.w_cell.clone();     o.u_cell = c.u_cell.clone();     o.b_cell = c.b_cell.clone();
    o.w_output = c.w_output.clone(); o.u_output = c.u_output.clone(); o.b_output = c.b_output.clone();
    return o;
  };
  auto copy_gru = [](const GruCellParams& c) {
    GruCellParams o;
    o.w_reset = c.w_reset.clone();   o.u_reset = c.u_reset.clone();   o.b_reset = c.b_reset.clone();
    o.w_update = c.w_update.clone(); o.u_update = c.u_update.clone(); o.b_update = c.b_update.clone();
    o.w_cand = c.w_cand.clone();     o.b_cand = c.b_cand.clone();
    return o;
  };
  if (lstm_fwd) p.lstm_fwd = copy_lstm(*lstm_fwd);
  if (lstm_bwd) p.lstm_bwd = copy_lstm(*lstm_bwd);
  if (gru) p.gru = copy_gru(*gru);
  p.head_weight = head_weight.clone();
  p.head_bias = head_bias.clone();
  return p;
}

void ModelParams::check_consistent() const {
  spec.validate();
  const bool needs_lstm = spec.variant != Variant::gru;
  const bool needs_gru = spec.variant != Variant::bilstm;
  if (needs_lstm != (lstm_fwd.has_value() && lstm_bwd.has_value()) ||
      needs_gru != gru.has_value()) {
    throw ConfigError("parameters do not match variant " + variant_name(spec.variant));
  }
  if (lstm_fwd) {
    lstm_fwd->check_shapes();
    lstm_bwd->check_shapes();
  }
  if (gru) gru->check_shapes();
  if (!head_weight.defined() || head_weight.rank() != 2 ||
      head_weight.dim(0) != spec.num_classes) {
    throw ConfigError("head weight shape does not match num_classes");
  }
}

Tensor forward_model(Tape& tape, const ModelParams& params, const Tensor& batch_seq,
                     bool training, Rng* dropout_rng) {
  params.check_consistent();
  const ModelSpec& spec = params.spec;
  if (!batch_seq.defined() || batch_seq.rank() != 3 || batch_seq.dim(2) != spec.input_size) {
    throw DimensionError("forward: batch " +
                         (batch_seq.defined() ? batch_seq.shape_str() : "[?]") +
                         " does not match input size " + std::to_string(spec.input_size));
  }
  const int batch = batch_seq.dim(0);
  const int steps = batch_seq.dim(1);
  const double rate = spec.dropout_rate;

  Tensor features;
  switch (spec.variant) {
    case Variant::bilstm: {
      BilstmTrace trace = bilstm_run(tape, *params.lstm_fwd, *params.lstm_bwd, batch_seq);
      features = tape.concat_cols(trace.last_forward_h, trace.last_backward_h);
      break;
    }
    case Variant::gru: {
      HiddenState state = HiddenState::start(batch, params.gru->hidden_size(), false);
      for (int t = 0; t < steps; ++t) {
        state = gru_step(tape, *params.gru, tape.time_slice(batch_seq, t), state);
      }
      features = state.h;
      break;
    }
    case Variant::hybrid: {
      BilstmTrace trace = bilstm_run(tape, *params.lstm_fwd, *params.lstm_bwd, batch_seq);
      HiddenState state = HiddenState::start(batch, params.gru->hidden_size(), false);
      for (int t = 0; t < steps; ++t) {
        Tensor step = dropout(tape, trace.step_outputs[static_cast<std::size_t>(t)], rate,
                              training, dropout_rng);
        state = gru_step(tape, *params.gru, step, state);
      }
      features = state.h;
      break;
    }
  }
  features = dropout(tape, features, rate, training, dropout_rng);
  return dense_head(tape, params, features);
}

PredictResult predict(const ModelParams& params, const SequenceDataset& data, int batch_size) {
  if (data.empty()) {
    throw InputError("predict: dataset is empty");
  }
  if (batch_size < 1) {
    throw InputError("predict: batch_size must be >= 1");
  }
  PredictResult result;
  result.predictions.reserve(static_cast<std::size_t>(data.size()));
  const bool binary = params.spec.num_classes == 2;
  for (int start = 0; start < data.size(); start += batch_size) {
    std::vector<int> indices;
    for (int i = start; i < std::min(start + batch_size, data.size()); ++i) indices.push_back(i);
    Tape tape;
    Tensor logits = forward_model(tape, params, data.batch_tensor(indices), false, nullptr);
    const Tensor probs = softmax(logits);
    const auto preds = argmax_rows(logits);
    result.predictions.insert(result.predictions.end(), preds.begin(), preds.end());
    if (binary) {
      for (int i = 0; i < static_cast<int>(indices.size()); ++i) {
        result.scores.push_back(probs(i, 1));
      }
    }
  }
  return result;
}

namespace {

nlohmann::json tensor_to_json(const Tensor& t) {
  nlohmann::json j;
  j["shape"] = t.shape();
  j["values"] = t.values();
  return j;
}

Tensor tensor_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.contains("shape") || !j.contains("values")) {
    throw SchemaError("checkpoint tensor '" + name + "' lacks shape/values");
  }
  return Tensor::from_values(j["shape"].get<std::vector<int>>(),
                             j["values"].get<std::vector<double>>());
}

nlohmann::json spec_to_json(const ModelSpec& s) {
  nlohmann::json j;
  j["variant"] = variant_name(s.variant);
  j["input_size"] = s.input_size;
  j["hidden_sizes"] = s.hidden_sizes;
  j["num_classes"] = s.num_classes;
  j["dropout_rate"] = s.dropout_rate;
  return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.variant = variant_from_name(j.at("variant").get<std::string>());
  s.input_size = j.at("input_size").get<int>();
  s.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
  s.num_classes = j.at("num_classes").get<int>();
  s.dropout_rate = j.at("dropout_rate").get<double>();
  s.validate();
  return s;
}

}  // namespace

std::string checkpoint_text(const ModelParams& params,
                            const std::optional<ScalerState>& scaler) {
  params.check_consistent();
  nlohmann::json j;
  j["format"] = "rcad-checkpoint";
  j["version"] = 1;
  j["spec"] = spec_to_json(params.spec);
  nlohmann::json tensors;
  for (const auto& [name, t] : params.named_tensors()) {
    tensors[name] = tensor_to_json(t);
  }
  j["tensors"] = tensors;
  if (scaler) {
    nlohmann::json s;
    s["column_names"] = scaler->column_names;
    s["mean"] = scaler->mean;
    s["spread"] = scaler->spread;
    s["degenerate"] = std::vector<int>(scaler->degenerate.begin(), scaler->degenerate.end());
    j["scaler"] = s;
  } else {
    j["scaler"] = nullptr;
  }
  return j.dump(2) + "\n";
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::optional<ScalerState>& scaler) {
  csvio::write_file(path, checkpoint_text(params, scaler));
}

ModelParams checkpoint_from_text(const std::string& text,
                                 std::optional<ScalerState>* scaler_out) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("format") || j["format"] != "rcad-checkpoint") {
    throw SchemaError("not a checkpoint file");
  }
  if (j.at("version").get<int>() != 1) {
    throw SchemaError("unsupported checkpoint version");
  }
  const ModelSpec spec = spec_from_json(j.at("spec"));

  // Build zero parameters with the right shapes, then fill each tensor
  // from the file, requiring an exact name/shape match both ways.
  ModelParams params;
  params.spec = spec;
  switch (spec.variant) {
    case Variant::bilstm:
      params.lstm_fwd = LstmCellParams::zeros(spec.input_size, spec.hidden_sizes[0]);
      params.lstm_bwd = LstmCellParams::zeros(spec.input_size, spec.hidden_sizes[0]);
      params.head_weight = Tensor::zeros({spec.num_classes, 2 * spec.hidden_sizes[0]});
      break;
    case Variant::gru:
      params.gru = GruCellParams::zeros(spec.input_size, spec.hidden_sizes[0]);
      params.head_weight = Tensor::zeros({spec.num_classes, spec.hidden_sizes[0]});
      break;
    case Variant::hybrid:
      params.lstm_fwd = LstmCellParams::zeros(spec.input_size, spec.hidden_sizes[0]);
      params.lstm_bwd = LstmCellParams::zeros(spec.input_size, spec.hidden_sizes[0]);
      params.gru = GruCellParams::zeros(2 * spec.hidden_sizes[0], spec.hidden_sizes[1]);
      params.head_weight = Tensor::zeros({spec.num_classes, spec.hidden_sizes[1]});
      break;
  }
  params.head_bias = Tensor::zeros({spec.num_classes});

  const auto& tensors = j.at("tensors");
  auto expected = params.named_tensors();
  if (tensors.size() != expected.size()) {
    throw SchemaError("checkpoint holds " + std::to_string(tensors.size()) +
                      " tensors, expected " + std::to_string(expected.size()));
  }
  for (auto& [name, t] : expected) {
    if (!tensors.contains(name)) {
      throw SchemaError("checkpoint is missing tensor '" + name + "'");
    }
    Tensor loaded = tensor_from_json(tensors[name], name);
    if (loaded.shape() != t.shape()) {
      throw SchemaError("checkpoint tensor '" + name + "' has shape " + loaded.shape_str() +
                        ", expected " + t.shape_str());
    }
    t.values() = loaded.values();
  }

  if (scaler_out) {
    scaler_out->reset();
    if (j.contains("scaler") && !j["scaler"].is_null()) {
      const auto& s = j["scaler"];
      ScalerState state;
      state.column_names = s.at("column_names").get<std::vector<std::string>>();
      state.mean = s.at("mean").get<std::vector<double>>();
      state.spread = s.at("spread").get<std::vector<double>>();
      for (const int d : s.at("degenerate").get<std::vector<int>>()) {
        state.degenerate.push_back(d != 0);
      }
      *scaler_out = std::move(state);
    }
  }
  return params;
}

ModelParams load_checkpoint(const std::string& path, std::optional<ScalerState>* scaler_out) {
  return checkpoint_from_text(csvio::read_file(path), scaler_out);
}

ModelSpec gradcheck_spec(Variant variant) {
  ModelSpec spec;
  spec.variant = variant;
  spec.input_size = 3;
  spec.hidden_sizes = variant == Variant::hybrid ? std::vector<int>{4, 3} : std::vector<int>{4};
  spec.num_classes = 2;
  spec.dropout_rate = 0.0;
  return spec;
}

std::vector<GradCheckEntry> gradient_check(const ModelSpec& spec, std::uint64_t seed,
                                           double epsilon, const std::string& corrupt_tensor) {
  spec.validate();
  constexpr int kBatch = 2;
  constexpr int kSteps = 5;

  Rng data_rng = Rng::stream(seed, "gradcheck-data");
  std::vector<double> values(static_cast<std::size_t>(kBatch) * kSteps * spec.input_size);
  for (double& v : values) v = data_rng.normal();
  const Tensor batch({kBatch, kSteps, spec.input_size}, std::move(values));
  std::vector<int> labels(kBatch);
  for (int i = 0; i < kBatch; ++i) labels[static_cast<std::size_t>(i)] = i % spec.num_classes;

  Rng init_rng = Rng::stream(seed, "init");
  ModelParams params = ModelParams::init(spec, init_rng);

  const auto loss_value = [&]() {
    Tape tape;
    Tensor logits = forward_model(tape, params, batch, false, nullptr);
    return tape.softmax_crossentropy(logits, labels).item();
  };

  params.zero_grad();
  {
    Tape tape;
    Tensor logits = forward_model(tape, params, batch, false, nullptr);
    Tensor loss = tape.softmax_crossentropy(logits, labels);
    tape.backward(loss);
  }

  std::vector<GradCheckEntry> entries;
  for (auto& [name, tensor] : params.named_tensors()) {
    std::vector<double> analytic = tensor.grad();
    if (!corrupt_tensor.empty() && name == corrupt_tensor) {
      analytic[0] += 1.0;
    }
    GradCheckEntry entry;
    entry.tensor = name;
    entry.elements = tensor.numel();
    auto& vals = tensor.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + epsilon;
      const double up = loss_value();
      vals[i] = saved - epsilon;
      const double down = loss_value();
      vals[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double rel = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(numeric));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace rcad
