#include "rcad/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "rcad/error.hpp"
#include "rcad/rng.hpp"

namespace rcad {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in (0, 1)");
  }
  if (early_stop_patience < 0) throw ConfigError("early_stop_patience must be >= 0");
}

std::string TrainingHistory::to_csv_text() const {
  std::string out = "epoch,train_loss,val_loss,train_acc,val_acc\n";
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    out += std::to_string(e + 1);
    out += ',' + csvio::format_double(epochs[e].train_loss);
    out += ',' + csvio::format_double(epochs[e].val_loss);
    out += ',' + csvio::format_double(epochs[e].train_accuracy);
    out += ',' + csvio::format_double(epochs[e].val_accuracy);
    out += '\n';
  }
  return out;
}

void TrainingHistory::to_csv(const std::string& path) const {
  csvio::write_file(path, to_csv_text());
}

double TrainingHistory::best_val_accuracy() const {
  double best = 0.0;
  for (const auto& e : epochs) best = std::max(best, e.val_accuracy);
  return best;
}

SplitIndices stratified_split(const SequenceDataset& data, double val_fraction,
                              std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in (0, 1)");
  }
  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < data.size(); ++i) {
    by_class[data.labels[static_cast<std::size_t>(i)]].push_back(i);
  }
  if (by_class.empty()) {
    throw InputError("split: dataset is empty");
  }
  for (const auto& [label, members] : by_class) {
    if (members.size() < 2) {
      throw InputError("split: class " + std::to_string(label) + " has " +
                       std::to_string(members.size()) + " sample(s); need at least 2");
    }
  }
  Rng rng = Rng::stream(seed, "split");
  SplitIndices split;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    const auto count = static_cast<std::int64_t>(members.size());
    auto val_count = std::llround(val_fraction * static_cast<double>(count));
    val_count = std::clamp<std::int64_t>(val_count, 1, count - 1);
    for (std::int64_t i = 0; i < count; ++i) {
      (i < val_count ? split.val : split.train).push_back(members[static_cast<std::size_t>(i)]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::int64_t t, double lr, double beta1, double beta2,
                 double eps) {
  if (t < 1) throw InputError("adam_update: step counter must be >= 1");
  const double m_corr = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / m_corr;
    const double v_hat = v[i] / v_corr;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

void AdamOptimizer::step(std::vector<Tensor>& params) {
  if (m_.empty()) {
    for (const Tensor& p : params) {
      m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
      v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    }
  }
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    adam_update(p.values(), p.grad(), m_[i], v_[i], t_, lr_);
  }
}

void SgdOptimizer::step(std::vector<Tensor>& params) {
  for (Tensor& p : params) {
    auto& vals = p.values();
    const auto& g = p.grad();
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] -= lr_ * g[i];
  }
}

ScalerState fit_sequence_scaler(const SequenceDataset& data, const std::vector<int>& indices) {
  if (indices.empty()) throw InputError("scaler: no samples to fit on");
  ScalerState s;
  const double n = static_cast<double>(indices.size()) * data.seq_len;
  for (int f = 0; f < data.n_features; ++f) {
    s.column_names.push_back("f" + std::to_string(f + 1));
    double total = 0.0;
    for (const int i : indices) {
      for (int t = 0; t < data.seq_len; ++t) total += data.at(i, t, f);
    }
    const double mean = total / n;
    double ss = 0.0;
    for (const int i : indices) {
      for (int t = 0; t < data.seq_len; ++t) {
        const double d = data.at(i, t, f) - mean;
        ss += d * d;
      }
    }
    const double spread = std::sqrt(ss / n);
    s.mean.push_back(mean);
    s.spread.push_back(spread);
    s.degenerate.push_back(spread == 0.0);
  }
  return s;
}

SequenceDataset apply_sequence_scaler(const SequenceDataset& data, const ScalerState& scaler) {
  if (scaler.column_names.empty()) return data;
  if (static_cast<int>(scaler.column_names.size()) != data.n_features) {
    throw SchemaError("scaler covers " + std::to_string(scaler.column_names.size()) +
                      " features, dataset has " + std::to_string(data.n_features));
  }
  SequenceDataset out = data;
  for (int i = 0; i < out.size(); ++i) {
    for (int t = 0; t < out.seq_len; ++t) {
      for (int f = 0; f < out.n_features; ++f) {
        const auto fi = static_cast<std::size_t>(f);
        out.at(i, t, f) = scaler.degenerate[fi]
                              ? 0.0
                              : (out.at(i, t, f) - scaler.mean[fi]) / scaler.spread[fi];
      }
    }
  }
  return out;
}

namespace {

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalStats evaluate_pass(const ModelParams& params, const SequenceDataset& data,
                        const std::vector<int>& indices, int batch_size) {
  double loss_sum = 0.0;
  std::int64_t correct = 0;
  for (std::size_t start = 0; start < indices.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
    const std::vector<int> batch(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                 indices.begin() + static_cast<std::ptrdiff_t>(end));
    const auto labels = data.batch_labels(batch);
    Tape tape;
    Tensor logits = forward_model(tape, params, data.batch_tensor(batch), false, nullptr);
    loss_sum += tape.softmax_crossentropy(logits, labels).item() * static_cast<double>(batch.size());
    const auto preds = argmax_rows(logits);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i] == labels[i]) ++correct;
    }
  }
  EvalStats out;
  out.loss = loss_sum / static_cast<double>(indices.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
  return out;
}

}  // namespace

TrainResult train(const ModelSpec& spec, const TrainConfig& config,
                  const SequenceDataset& data) {
  spec.validate();
  config.validate();
  if (data.empty()) {
    throw InputError("train: dataset is empty");
  }
  if (data.num_classes() > spec.num_classes) {
    throw ConfigError("dataset has labels outside the model's " +
                      std::to_string(spec.num_classes) + " classes");
  }
  if (data.n_features != spec.input_size) {
    throw ConfigError("dataset has " + std::to_string(data.n_features) +
                      " features, model expects " + std::to_string(spec.input_size));
  }

  const SplitIndices split = stratified_split(data, config.val_fraction, config.seed);

  TrainResult result;
  if (config.standardize) {
    result.scaler = fit_sequence_scaler(data, split.train);
  }
  const SequenceDataset scaled = apply_sequence_scaler(data, result.scaler);

  Rng init_rng = Rng::stream(config.seed, "init");
  ModelParams params = ModelParams::init(spec, init_rng);
  std::vector<Tensor> tensors;
  for (auto& [name, t] : params.named_tensors()) tensors.push_back(t);

  AdamOptimizer adam(config.learning_rate);
  SgdOptimizer sgd(config.learning_rate);

  Rng shuffle_rng = Rng::stream(config.seed, "shuffle");
  Rng dropout_rng = Rng::stream(config.seed, "dropout");

  double best_val_acc = -1.0;
  int epochs_since_best = 0;
  ModelParams best_params;

  std::vector<int> order = split.train;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto labels = scaled.batch_labels(batch);

      Tape tape;
      Tensor logits = forward_model(tape, params, scaled.batch_tensor(batch), true, &dropout_rng);
      Tensor loss = tape.softmax_crossentropy(logits, labels);
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        throw TrainingError("non-finite loss " + csvio::format_double(loss_value) +
                            " at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      }
      loss_sum += loss_value * static_cast<double>(batch.size());
      const auto preds = argmax_rows(logits);
      for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == labels[i]) ++correct;
      }

      params.zero_grad();
      tape.backward(loss);
      if (config.optimizer == TrainConfig::Optimizer::adam) {
        adam.step(tensors);
      } else {
        sgd.step(tensors);
      }
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    const EvalStats val = evaluate_pass(params, scaled, split.val, config.batch_size);
    stats.val_loss = val.loss;
    stats.val_accuracy = val.accuracy;
    result.history.epochs.push_back(stats);

    if (config.early_stop_patience > 0) {
      if (stats.val_accuracy > best_val_acc) {
        best_val_acc = stats.val_accuracy;
        best_params = params.clone();
        epochs_since_best = 0;
      } else if (++epochs_since_best >= config.early_stop_patience) {
        break;
      }
    }
  }

  result.params = (config.early_stop_patience > 0) ? std::move(best_params) : std::move(params);
  return result;
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string polyline(const std::vector<double>& ys, double lo, double hi, int epochs,
                     const std::string& color) {
  // plot area: x in [60, 600], y in [40, 340]
  std::string pts;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double x =
        60.0 + (epochs == 1 ? 0.0 : 540.0 * static_cast<double>(i) / (epochs - 1));
    const double span = hi - lo;
    const double y = 340.0 - 300.0 * (span == 0.0 ? 0.5 : (ys[i] - lo) / span);
    pts += fmt2(x) + "," + fmt2(y) + " ";
  }
  return "  <polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"" +
         pts + "\"/>\n";
}

}  // namespace

std::string history_svg_text(const TrainingHistory& history, bool accuracy_plot) {
  const int n = static_cast<int>(history.epochs.size());
  std::vector<double> train, val;
  for (const auto& e : history.epochs) {
    train.push_back(accuracy_plot ? e.train_accuracy : e.train_loss);
    val.push_back(accuracy_plot ? e.val_accuracy : e.val_loss);
  }
  double lo = train.empty() ? 0.0 : train[0];
  double hi = lo;
  for (const double v : train) { lo = std::min(lo, v); hi = std::max(hi, v); }
  for (const double v : val) { lo = std::min(lo, v); hi = std::max(hi, v); }
  const double pad = (hi - lo) * 0.05 + 1e-9;
  lo -= pad;
  hi += pad;

  const std::string title =
      accuracy_plot ? "Training and validation accuracy" : "Training and validation loss";
  const std::string ylabel = accuracy_plot ? "Accuracy" : "Loss";

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
         "viewBox=\"0 0 640 400\">\n";
  svg += "  <rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "  <text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">" + title + "</text>\n";
  svg += "  <line x1=\"60\" y1=\"340\" x2=\"600\" y2=\"340\" stroke=\"black\"/>\n";
  svg += "  <line x1=\"60\" y1=\"40\" x2=\"60\" y2=\"340\" stroke=\"black\"/>\n";
  // axis ticks: 5 y levels, up to 6 x epochs marks
  for (int i = 0; i <= 4; ++i) {
    const double frac = static_cast<double>(i) / 4.0;
    const double y = 340.0 - 300.0 * frac;
    const double value = lo + (hi - lo) * frac;
    svg += "  <line x1=\"56\" y1=\"" + fmt2(y) + "\" x2=\"60\" y2=\"" + fmt2(y) +
           "\" stroke=\"black\"/>\n";
    svg += "  <text x=\"52\" y=\"" + fmt2(y + 4.0) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt2(value) +
           "</text>\n";
  }
  const int xticks = std::min(6, std::max(1, n));
  for (int i = 0; i < xticks; ++i) {
    const int epoch = (n <= 1) ? 1 : 1 + i * (n - 1) / (xticks - 1);
    const double x = 60.0 + (n <= 1 ? 0.0 : 540.0 * (epoch - 1) / (n - 1));
    svg += "  <line x1=\"" + fmt2(x) + "\" y1=\"340\" x2=\"" + fmt2(x) +
           "\" y2=\"344\" stroke=\"black\"/>\n";
    svg += "  <text x=\"" + fmt2(x) + "\" y=\"358\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"11\">" + std::to_string(epoch) + "</text>\n";
  }
  svg += "  <text x=\"330\" y=\"384\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">Epochs</text>\n";
  svg += "  <text x=\"18\" y=\"190\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 18 190)\">" + ylabel + "</text>\n";
  if (n > 0) {
    svg += polyline(train, lo, hi, n, "#1f77b4");
    svg += polyline(val, lo, hi, n, "#ff7f0e");
  }
  svg += "  <rect x=\"470\" y=\"50\" width=\"14\" height=\"3\" fill=\"#1f77b4\"/>\n";
  svg += "  <text x=\"490\" y=\"56\" font-family=\"sans-serif\" font-size=\"12\">train</text>\n";
  svg += "  <rect x=\"470\" y=\"68\" width=\"14\" height=\"3\" fill=\"#ff7f0e\"/>\n";
  svg += "  <text x=\"490\" y=\"74\" font-family=\"sans-serif\" font-size=\"12\">validation"
         "</text>\n";
  svg += "</svg>\n";
  return svg;
}

void write_history_svg(const TrainingHistory& history, const std::string& loss_path,
                       const std::string& accuracy_path) {
  csvio::write_file(loss_path, history_svg_text(history, false));
  csvio::write_file(accuracy_path, history_svg_text(history, true));
}

}  // namespace rcad
