// rcad: sequence-classification pipeline driver.
//
// Subcommands: generate | preprocess | features | train | evaluate |
// gradcheck | report. Every run is seeded and replayable: outputs land in
// a directory named by the hash of the resolved configuration, and the
// manifest carries everything needed to reproduce them (timestamps live
// only in the manifest).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcad/datagen.hpp"
#include "rcad/error.hpp"
#include "rcad/evaluate.hpp"
#include "rcad/features.hpp"
#include "rcad/model.hpp"
#include "rcad/preprocess.hpp"
#include "rcad/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "runs";
  rcad::GenConfig gen;
  struct {
    std::string missing_policy = "impute-mean";
    double impute_value = 0.0;
    std::vector<std::string> no_scale;
  } prep;
  struct {
    std::string target;
    int k = 0;  // 0 = all features
    double redundancy_cap = 0.95;
    double outlier_threshold = 3.0;
  } feat;
  struct {
    std::string variant = "bilstm";
    std::vector<int> hidden_sizes;  // empty = per-variant default
    int num_classes = 2;
    double dropout_rate = 0.2;
  } model;
  struct {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    double val_fraction = 0.2;
    int early_stop_patience = 0;
    bool standardize = true;
  } train;
};

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) {
      throw rcad::ConfigError("unknown config key '" + prefix + key + "'");
    }
  }
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  reject_unknown(j, {"seed", "output_dir", "generate", "preprocess", "features", "model",
                     "train"},
                 "");
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("generate")) {
    const auto& g = j["generate"];
    reject_unknown(g, {"n_samples", "seq_len", "n_features", "class_balance", "separability"},
                   "generate.");
    if (g.contains("n_samples")) c.gen.n_samples = g["n_samples"].get<int>();
    if (g.contains("seq_len")) c.gen.seq_len = g["seq_len"].get<int>();
    if (g.contains("n_features")) c.gen.n_features = g["n_features"].get<int>();
    if (g.contains("class_balance")) c.gen.class_balance = g["class_balance"].get<double>();
    if (g.contains("separability")) c.gen.separability = g["separability"].get<double>();
  }
  if (j.contains("preprocess")) {
    const auto& p = j["preprocess"];
    reject_unknown(p, {"missing_policy", "impute_value", "no_scale"}, "preprocess.");
    if (p.contains("missing_policy")) c.prep.missing_policy = p["missing_policy"];
    if (p.contains("impute_value")) c.prep.impute_value = p["impute_value"].get<double>();
    if (p.contains("no_scale")) c.prep.no_scale = p["no_scale"].get<std::vector<std::string>>();
  }
  if (j.contains("features")) {
    const auto& f = j["features"];
    reject_unknown(f, {"target", "k", "redundancy_cap", "outlier_threshold"}, "features.");
    if (f.contains("target")) c.feat.target = f["target"];
    if (f.contains("k")) c.feat.k = f["k"].get<int>();
    if (f.contains("redundancy_cap")) c.feat.redundancy_cap = f["redundancy_cap"].get<double>();
    if (f.contains("outlier_threshold")) {
      c.feat.outlier_threshold = f["outlier_threshold"].get<double>();
    }
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, {"variant", "hidden_sizes", "num_classes", "dropout_rate"}, "model.");
    if (m.contains("variant")) c.model.variant = m["variant"];
    if (m.contains("hidden_sizes")) {
      c.model.hidden_sizes = m["hidden_sizes"].get<std::vector<int>>();
    }
    if (m.contains("num_classes")) c.model.num_classes = m["num_classes"].get<int>();
    if (m.contains("dropout_rate")) c.model.dropout_rate = m["dropout_rate"].get<double>();
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t,
                   {"epochs", "batch_size", "learning_rate", "optimizer", "val_fraction",
                    "early_stop_patience", "standardize"},
                   "train.");
    if (t.contains("epochs")) c.train.epochs = t["epochs"].get<int>();
    if (t.contains("batch_size")) c.train.batch_size = t["batch_size"].get<int>();
    if (t.contains("learning_rate")) c.train.learning_rate = t["learning_rate"].get<double>();
    if (t.contains("optimizer")) c.train.optimizer = t["optimizer"];
    if (t.contains("val_fraction")) c.train.val_fraction = t["val_fraction"].get<double>();
    if (t.contains("early_stop_patience")) {
      c.train.early_stop_patience = t["early_stop_patience"].get<int>();
    }
    if (t.contains("standardize")) c.train.standardize = t["standardize"].get<bool>();
  }
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["generate"] = {{"n_samples", c.gen.n_samples},
                   {"seq_len", c.gen.seq_len},
                   {"n_features", c.gen.n_features},
                   {"class_balance", c.gen.class_balance},
                   {"separability", c.gen.separability}};
  j["preprocess"] = {{"missing_policy", c.prep.missing_policy},
                     {"impute_value", c.prep.impute_value},
                     {"no_scale", c.prep.no_scale}};
  j["features"] = {{"target", c.feat.target},
                   {"k", c.feat.k},
                   {"redundancy_cap", c.feat.redundancy_cap},
                   {"outlier_threshold", c.feat.outlier_threshold}};
  j["model"] = {{"variant", c.model.variant},
                {"hidden_sizes", c.model.hidden_sizes},
                {"num_classes", c.model.num_classes},
                {"dropout_rate", c.model.dropout_rate}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"optimizer", c.train.optimizer},
                {"val_fraction", c.train.val_fraction},
                {"early_stop_patience", c.train.early_stop_patience},
                {"standardize", c.train.standardize}};
  return j;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (const char ch : text) {
    hash ^= static_cast<unsigned char>(ch);
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string hash12(const std::string& payload) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(payload)));
  return std::string(buf).substr(0, 12);
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// Run directory named by the hash of (command, inputs, resolved config).
// Existing directories are only reused with --force.
fs::path prepare_run_dir(const RunConfig& config, const std::string& command,
                         const std::vector<std::string>& inputs, bool force,
                         std::string* hash_out) {
  std::string payload = command;
  for (const auto& in : inputs) payload += "\n" + in;
  payload += "\n" + config_to_json(config).dump();
  const std::string hash = hash12(payload);
  if (hash_out) *hash_out = hash;
  const fs::path dir = fs::path(config.output_dir) / (command + "-" + hash);
  if (fs::exists(dir)) {
    if (!force) {
      throw rcad::IoError("run directory '" + dir.string() +
                          "' already exists; pass --force to overwrite");
    }
  } else {
    fs::create_directories(dir);
  }
  return dir;
}

void write_manifest(const fs::path& dir, const RunConfig& config, const std::string& command,
                    const std::string& hash, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["config"] = config_to_json(config);
  m["config_hash"] = hash;
  m["seed"] = config.seed;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["timestamp"] = iso_timestamp();
  rcad::csvio::write_file((dir / "manifest.json").string(), m.dump(2) + "\n");
}

rcad::CleanPolicy clean_policy(const RunConfig& c) {
  rcad::CleanPolicy policy;
  if (c.prep.missing_policy == "drop-row") {
    policy.missing = rcad::MissingPolicy::drop_row;
  } else if (c.prep.missing_policy == "impute-mean") {
    policy.missing = rcad::MissingPolicy::impute_mean;
  } else if (c.prep.missing_policy == "impute-constant") {
    policy.missing = rcad::MissingPolicy::impute_constant;
  } else {
    throw rcad::ConfigError("unknown missing_policy '" + c.prep.missing_policy +
                            "' (expected drop-row, impute-mean, or impute-constant)");
  }
  policy.constant = c.prep.impute_value;
  return policy;
}

rcad::ModelSpec build_model_spec(const RunConfig& c, int input_size, int data_classes) {
  rcad::ModelSpec spec;
  spec.variant = rcad::variant_from_name(c.model.variant);
  spec.input_size = input_size;
  spec.num_classes = std::max(c.model.num_classes, data_classes);
  spec.dropout_rate = c.model.dropout_rate;
  spec.hidden_sizes = c.model.hidden_sizes;
  if (spec.hidden_sizes.empty()) {
    spec.hidden_sizes = spec.variant == rcad::Variant::hybrid ? std::vector<int>{16, 8}
                                                              : std::vector<int>{16};
  }
  spec.validate();
  return spec;
}

rcad::TrainConfig build_train_config(const RunConfig& c) {
  rcad::TrainConfig t;
  t.epochs = c.train.epochs;
  t.batch_size = c.train.batch_size;
  t.learning_rate = c.train.learning_rate;
  if (c.train.optimizer == "adam") {
    t.optimizer = rcad::TrainConfig::Optimizer::adam;
  } else if (c.train.optimizer == "sgd") {
    t.optimizer = rcad::TrainConfig::Optimizer::sgd;
  } else {
    throw rcad::ConfigError("unknown optimizer '" + c.train.optimizer +
                            "' (expected adam or sgd)");
  }
  t.val_fraction = c.train.val_fraction;
  t.seed = c.seed;
  t.early_stop_patience = c.train.early_stop_patience;
  t.standardize = c.train.standardize;
  t.validate();
  return t;
}

int cmd_generate(const RunConfig& config, bool force) {
  std::string hash;
  const fs::path dir = prepare_run_dir(config, "generate", {}, force, &hash);
  rcad::GenConfig gen = config.gen;
  gen.seed = config.seed;
  const rcad::SequenceDataset data = rcad::generate(gen);
  rcad::export_csv(data, (dir / "dataset.csv").string());
  write_manifest(dir, config, "generate", hash, {}, {"dataset.csv"});
  std::cout << "wrote " << (dir / "dataset.csv").string() << " (" << data.size()
            << " samples)\n";
  return 0;
}

int cmd_preprocess(const RunConfig& config, const std::string& input, bool force) {
  std::string hash;
  const fs::path dir = prepare_run_dir(config, "preprocess", {input}, force, &hash);
  const rcad::DataTable table = rcad::DataTable::from_csv(input);
  const auto [cleaned, report] = rcad::clean(table, clean_policy(config));

  // standardize everything except the opt-out columns
  std::set<std::string> skip(config.prep.no_scale.begin(), config.prep.no_scale.end());
  for (const auto& name : skip) {
    if (cleaned.column_index(name) < 0) {
      throw rcad::SchemaError("no_scale column '" + name + "' is not in the table");
    }
  }
  rcad::DataTable to_scale;
  for (std::size_t c = 0; c < cleaned.col_count(); ++c) {
    if (!skip.contains(cleaned.column_names[c])) {
      to_scale.column_names.push_back(cleaned.column_names[c]);
      to_scale.columns.push_back(cleaned.columns[c]);
    }
  }
  to_scale.row_count = cleaned.row_count;
  const auto [scaled, scaler] = rcad::standardize(to_scale);

  rcad::DataTable out = cleaned;
  for (std::size_t c = 0; c < scaled.col_count(); ++c) {
    out.columns[static_cast<std::size_t>(out.column_index(scaled.column_names[c]))] =
        scaled.columns[c];
  }
  out.to_csv((dir / "cleaned.csv").string());
  scaler.save((dir / "scaler.json").string());

  json rj;
  rj["duplicates_removed"] = report.duplicates_removed;
  rj["rows_dropped"] = report.rows_dropped;
  rj["missing_imputed"] = report.missing_imputed;
  rcad::csvio::write_file((dir / "clean_report.json").string(), rj.dump(2) + "\n");

  write_manifest(dir, config, "preprocess", hash, {input},
                 {"cleaned.csv", "scaler.json", "clean_report.json"});
  std::cout << "wrote " << (dir / "cleaned.csv").string() << " (" << out.row_count
            << " rows; " << report.duplicates_removed << " duplicates removed, "
            << report.rows_dropped << " rows dropped)\n";
  return 0;
}

int cmd_features(const RunConfig& config, const std::string& input, bool force) {
  std::string hash;
  const fs::path dir = prepare_run_dir(config, "features", {input}, force, &hash);
  const rcad::DataTable table = rcad::DataTable::from_csv(input);
  const rcad::CorrelationMatrix corr = rcad::pearson_matrix(table);
  corr.to_csv((dir / "correlation.csv").string());
  std::vector<std::string> outputs{"correlation.csv"};

  if (!config.feat.target.empty()) {
    const int k =
        config.feat.k > 0 ? config.feat.k : static_cast<int>(corr.size()) - 1;
    const rcad::FeatureSelection sel =
        rcad::select_features(corr, config.feat.target, k, config.feat.redundancy_cap);
    json sj;
    sj["target"] = config.feat.target;
    sj["k"] = k;
    sj["redundancy_cap"] = config.feat.redundancy_cap;
    sj["features"] = sel.features;
    sj["truncated"] = sel.truncated;
    rcad::csvio::write_file((dir / "selection.json").string(), sj.dump(2) + "\n");
    outputs.push_back("selection.json");
    if (sel.truncated) {
      std::cout << "warning: redundancy cap left only " << sel.features.size() << " of " << k
                << " requested features\n";
    }
  }

  const rcad::OutlierReport outliers =
      rcad::flag_outliers(table, corr, config.feat.outlier_threshold);
  json oj;
  oj["threshold"] = config.feat.outlier_threshold;
  oj["rows"] = outliers.rows;
  oj["degenerate"] = outliers.degenerate;
  oj["feature_x"] = outliers.feature_x;
  oj["feature_y"] = outliers.feature_y;
  rcad::csvio::write_file((dir / "outliers.json").string(), oj.dump(2) + "\n");
  outputs.push_back("outliers.json");

  write_manifest(dir, config, "features", hash, {input}, outputs);
  std::cout << "wrote " << (dir / "correlation.csv").string() << " (" << corr.size()
            << " features, " << outliers.rows.size() << " flagged rows)\n";
  return 0;
}

int cmd_train(const RunConfig& config, const std::string& data_path, bool svg, bool force) {
  std::string hash;
  const fs::path dir = prepare_run_dir(config, "train", {data_path}, force, &hash);
  const rcad::SequenceDataset data = rcad::import_csv(data_path);
  if (data.empty()) {
    throw rcad::InputError("training dataset '" + data_path + "' is empty");
  }
  const rcad::ModelSpec spec = build_model_spec(config, data.n_features, data.num_classes());
  const rcad::TrainConfig train_config = build_train_config(config);

  const rcad::TrainResult result = rcad::train(spec, train_config, data);

  rcad::save_checkpoint((dir / "checkpoint.json").string(), result.params,
                        result.scaler.column_names.empty()
                            ? std::nullopt
                            : std::make_optional(result.scaler));
  result.history.to_csv((dir / "history.csv").string());
  std::vector<std::string> outputs{"checkpoint.json", "history.csv"};
  if (svg) {
    rcad::write_history_svg(result.history, (dir / "history_loss.svg").string(),
                            (dir / "history_accuracy.svg").string());
    outputs.push_back("history_loss.svg");
    outputs.push_back("history_accuracy.svg");
  }
  write_manifest(dir, config, "train", hash, {data_path}, outputs);

  const auto& last = result.history.epochs.back();
  std::printf("%s: %zu epochs, final val_acc %.4f (best %.4f), final val_loss %.4f\n",
              rcad::variant_name(spec.variant).c_str(), result.history.epochs.size(),
              last.val_accuracy, result.history.best_val_accuracy(), last.val_loss);
  std::cout << "wrote " << (dir / "checkpoint.json").string() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& config, const std::string& checkpoint_path,
                 const std::vector<std::string>& compare, const std::string& data_path,
                 const std::string& format, bool force) {
  std::vector<std::string> inputs{checkpoint_path};
  inputs.insert(inputs.end(), compare.begin(), compare.end());
  inputs.push_back(data_path);
  std::string hash;
  const fs::path dir = prepare_run_dir(config, "evaluate", inputs, force, &hash);

  const rcad::SequenceDataset data = rcad::import_csv(data_path);
  if (data.empty()) {
    throw rcad::InputError("evaluation dataset '" + data_path + "' is empty");
  }

  std::vector<rcad::EvalReport> reports;
  std::vector<std::string> checkpoints{checkpoint_path};
  checkpoints.insert(checkpoints.end(), compare.begin(), compare.end());
  for (const auto& ck : checkpoints) {
    std::optional<rcad::ScalerState> scaler;
    const rcad::ModelParams params = rcad::load_checkpoint(ck, &scaler);
    if (params.spec.input_size != data.n_features) {
      throw rcad::ConfigError("checkpoint '" + ck + "' expects " +
                              std::to_string(params.spec.input_size) +
                              " features, dataset has " + std::to_string(data.n_features));
    }
    if (data.num_classes() > params.spec.num_classes) {
      throw rcad::ConfigError("dataset labels exceed the checkpoint's class count");
    }
    const rcad::SequenceDataset scaled =
        scaler ? rcad::apply_sequence_scaler(data, *scaler) : data;
    const rcad::PredictResult pred = rcad::predict(params, scaled);
    std::string name = fs::path(ck).stem().string();
    if (name == "checkpoint") {
      name = rcad::variant_name(params.spec.variant);
    }
    reports.push_back(rcad::make_report(name, data.labels, pred.predictions, pred.scores,
                                        params.spec.num_classes, "history.csv"));
  }

  rcad::csvio::write_file((dir / "report.json").string(), rcad::reports_to_json_text(reports));
  write_manifest(dir, config, "evaluate", hash, inputs, {"report.json"});
  std::cout << rcad::render_report(reports, rcad::report_format_from_name(format));
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& variant, std::uint64_t seed, double eps,
                  const std::string& corrupt) {
  std::vector<rcad::Variant> variants;
  if (variant == "all") {
    variants = {rcad::Variant::bilstm, rcad::Variant::gru, rcad::Variant::hybrid};
  } else {
    variants = {rcad::variant_from_name(variant)};
  }
  constexpr double kTol = 1e-4;
  bool all_pass = true;
  std::printf("%-8s %-22s %10s %12s  %s\n", "variant", "tensor", "elements", "max_rel_err",
              "status");
  for (const rcad::Variant v : variants) {
    const auto entries = rcad::gradient_check(rcad::gradcheck_spec(v), seed, eps, corrupt);
    for (const auto& e : entries) {
      const bool ok = e.max_rel_err < kTol;
      all_pass = all_pass && ok;
      std::printf("%-8s %-22s %10lld %12.3e  %s\n", rcad::variant_name(v).c_str(),
                  e.tensor.c_str(), static_cast<long long>(e.elements), e.max_rel_err,
                  ok ? "PASS" : "FAIL");
    }
  }
  std::printf("gradcheck: %s (tolerance %.1e)\n", all_pass ? "PASS" : "FAIL", kTol);
  return all_pass ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& format,
               const std::string& out_file) {
  std::vector<rcad::EvalReport> reports;
  for (const auto& path : inputs) {
    const auto batch = rcad::reports_from_json_text(rcad::csvio::read_file(path));
    reports.insert(reports.end(), batch.begin(), batch.end());
  }
  const std::string rendered =
      rcad::render_report(reports, rcad::report_format_from_name(format));
  if (out_file.empty()) {
    std::cout << rendered;
  } else {
    rcad::csvio::write_file(out_file, rendered);
    std::cout << "wrote " << out_file << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rcad: recurrent sequence classification pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::uint64_t seed_flag = 0;
  bool force = false;
  app.add_option("--config", config_path, "JSON config file (flags override it)");
  app.add_option("--out", output_dir, "output base directory (default: runs)");
  auto* seed_opt = app.add_option("--seed", seed_flag, "seed override (beats RCAD_SEED)");
  app.add_flag("--force", force, "overwrite an existing run directory");

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic sequence dataset");
  int g_n = 0, g_t = 0, g_f = 0;
  double g_balance = 0.0, g_sep = 0.0;
  auto* g_n_opt = gen->add_option("--n-samples", g_n, "sample count");
  auto* g_t_opt = gen->add_option("--seq-len", g_t, "timesteps per sequence");
  auto* g_f_opt = gen->add_option("--n-features", g_f, "features per timestep");
  auto* g_b_opt = gen->add_option("--class-balance", g_balance, "positive-class fraction");
  auto* g_s_opt = gen->add_option("--separability", g_sep, "class separation in noise spreads");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "clean and standardize a CSV table");
  std::string p_input, p_policy;
  double p_constant = 0.0;
  std::vector<std::string> p_no_scale;
  prep->add_option("--input", p_input, "input CSV")->required();
  auto* p_policy_opt =
      prep->add_option("--policy", p_policy, "drop-row | impute-mean | impute-constant");
  auto* p_const_opt = prep->add_option("--impute-value", p_constant, "impute-constant fill");
  auto* p_skip_opt =
      prep->add_option("--no-scale", p_no_scale, "columns to exclude from standardization");

  // features
  auto* feat = app.add_subcommand("features", "correlation matrix, selection, outliers");
  std::string f_input, f_target;
  int f_k = 0;
  double f_cap = 0.0, f_thresh = 0.0;
  feat->add_option("--input", f_input, "input CSV (no missing cells)")->required();
  auto* f_target_opt = feat->add_option("--target", f_target, "selection target column");
  auto* f_k_opt = feat->add_option("--k", f_k, "features to select (0 = all)");
  auto* f_cap_opt = feat->add_option("--cap", f_cap, "redundancy cap on |r|");
  auto* f_thresh_opt =
      feat->add_option("--outlier-threshold", f_thresh, "standardized residual threshold");

  // train
  auto* tr = app.add_subcommand("train", "train a model on a sequence CSV");
  std::string t_data, t_variant, t_optimizer;
  std::vector<int> t_hidden;
  int t_epochs = 0, t_batch = 0, t_patience = 0, t_classes = 0;
  double t_lr = 0.0, t_val = 0.0, t_dropout = 0.0;
  bool t_no_svg = false, t_no_standardize = false;
  tr->add_option("--data", t_data, "training dataset CSV")->required();
  auto* t_variant_opt = tr->add_option("--variant", t_variant, "bilstm | gru | hybrid");
  auto* t_hidden_opt = tr->add_option("--hidden", t_hidden, "hidden sizes (1; 2 for hybrid)");
  auto* t_classes_opt = tr->add_option("--num-classes", t_classes, "class count");
  auto* t_dropout_opt = tr->add_option("--dropout", t_dropout, "dropout rate in [0,1)");
  auto* t_epochs_opt = tr->add_option("--epochs", t_epochs, "training epochs");
  auto* t_batch_opt = tr->add_option("--batch-size", t_batch, "mini-batch size");
  auto* t_lr_opt = tr->add_option("--lr", t_lr, "learning rate");
  auto* t_opt_opt = tr->add_option("--optimizer", t_optimizer, "adam | sgd");
  auto* t_val_opt = tr->add_option("--val-fraction", t_val, "validation fraction");
  auto* t_patience_opt =
      tr->add_option("--patience", t_patience, "early-stop patience (0 = off)");
  tr->add_flag("--no-svg", t_no_svg, "skip the SVG curve plots");
  tr->add_flag("--no-standardize", t_no_standardize, "skip train-split standardization");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "evaluate checkpoints on a dataset");
  std::string e_checkpoint, e_data, e_format = "table";
  std::vector<std::string> e_compare;
  ev->add_option("--checkpoint", e_checkpoint, "checkpoint JSON")->required();
  ev->add_option("--data", e_data, "dataset CSV")->required();
  ev->add_option("--compare", e_compare, "additional checkpoints for comparison");
  ev->add_option("--format", e_format, "table | json | csv");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of all gradients");
  std::string gc_variant = "all", gc_corrupt;
  double gc_eps = 1e-5;
  std::uint64_t gc_seed = 7;
  gc->add_option("--variant", gc_variant, "all | bilstm | gru | hybrid");
  gc->add_option("--eps", gc_eps, "finite-difference step");
  gc->add_option("--gradcheck-seed", gc_seed, "seed for data and parameters");
  gc->add_option("--corrupt-tensor", gc_corrupt,
                 "perturb this tensor's analytic gradient (harness self-test)");

  // report
  auto* rp = app.add_subcommand("report", "render saved evaluation reports");
  std::vector<std::string> r_inputs;
  std::string r_format = "table", r_out;
  rp->add_option("--inputs", r_inputs, "report JSON files")->required();
  rp->add_option("--format", r_format, "table | json | csv");
  rp->add_option("--output", r_out, "write here instead of stdout");

  try {
    app.parse(argc, argv);

    json file_config = json::object();
    if (!config_path.empty()) {
      file_config = json::parse(rcad::csvio::read_file(config_path));
    }
    RunConfig config = parse_config(file_config);

    // precedence: --seed flag > RCAD_SEED > config file
    if (const char* env_seed = std::getenv("RCAD_SEED")) {
      try {
        config.seed = std::stoull(env_seed);
      } catch (const std::exception&) {
        throw rcad::ConfigError("RCAD_SEED is not a valid integer: '" + std::string(env_seed) +
                                "'");
      }
    }
    if (seed_opt->count() > 0) config.seed = seed_flag;
    if (!output_dir.empty()) config.output_dir = output_dir;

    if (gen->parsed()) {
      if (g_n_opt->count()) config.gen.n_samples = g_n;
      if (g_t_opt->count()) config.gen.seq_len = g_t;
      if (g_f_opt->count()) config.gen.n_features = g_f;
      if (g_b_opt->count()) config.gen.class_balance = g_balance;
      if (g_s_opt->count()) config.gen.separability = g_sep;
      return cmd_generate(config, force);
    }
    if (prep->parsed()) {
      if (p_policy_opt->count()) config.prep.missing_policy = p_policy;
      if (p_const_opt->count()) config.prep.impute_value = p_constant;
      if (p_skip_opt->count()) config.prep.no_scale = p_no_scale;
      return cmd_preprocess(config, p_input, force);
    }
    if (feat->parsed()) {
      if (f_target_opt->count()) config.feat.target = f_target;
      if (f_k_opt->count()) config.feat.k = f_k;
      if (f_cap_opt->count()) config.feat.redundancy_cap = f_cap;
      if (f_thresh_opt->count()) config.feat.outlier_threshold = f_thresh;
      return cmd_features(config, f_input, force);
    }
    if (tr->parsed()) {
      if (t_variant_opt->count()) config.model.variant = t_variant;
      if (t_hidden_opt->count()) config.model.hidden_sizes = t_hidden;
      if (t_classes_opt->count()) config.model.num_classes = t_classes;
      if (t_dropout_opt->count()) config.model.dropout_rate = t_dropout;
      if (t_epochs_opt->count()) config.train.epochs = t_epochs;
      if (t_batch_opt->count()) config.train.batch_size = t_batch;
      if (t_lr_opt->count()) config.train.learning_rate = t_lr;
      if (t_opt_opt->count()) config.train.optimizer = t_optimizer;
      if (t_val_opt->count()) config.train.val_fraction = t_val;
      if (t_patience_opt->count()) config.train.early_stop_patience = t_patience;
      if (t_no_standardize) config.train.standardize = false;
      return cmd_train(config, t_data, !t_no_svg, force);
    }
    if (ev->parsed()) {
      return cmd_evaluate(config, e_checkpoint, e_compare, e_data, e_format, force);
    }
    if (gc->parsed()) {
      return cmd_gradcheck(gc_variant, gc_seed, gc_eps, gc_corrupt);
    }
    if (rp->parsed()) {
      return cmd_report(r_inputs, r_format, r_out);
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const rcad::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
