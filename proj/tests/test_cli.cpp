// End-to-end checks of the rcad binary (path supplied via RCAD_BIN).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <sstream>
#include <string>

#include <json.hpp>

#include "doctest.h"
#include "rcad/preprocess.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string rcad_bin() {
  const char* bin = std::getenv("RCAD_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

struct RunOutput {
  int exit_code = 0;
  std::string out;
  std::string err;
};

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "rcad_cli_scratch";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunOutput run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const fs::path out = scratch() / ("out" + std::to_string(counter));
  const fs::path err = scratch() / ("err" + std::to_string(counter));
  ++counter;
  const std::string cmd = env + (env.empty() ? "" : " ") + rcad_bin() + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunOutput r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path only_run_dir(const fs::path& base, const std::string& command) {
  fs::path found;
  int count = 0;
  for (const auto& entry : fs::directory_iterator(base)) {
    if (entry.path().filename().string().rfind(command + "-", 0) == 0) {
      found = entry.path();
      ++count;
    }
  }
  REQUIRE(count == 1);
  return found;
}

}  // namespace

TEST_CASE("generate is byte-identical across reruns and writes a manifest") {
  const fs::path base = scratch() / "gen";
  const std::string common = "--out " + base.string() + " generate --n-samples 40 --seq-len 4";
  REQUIRE(run(common).exit_code == 0);
  const fs::path dir = only_run_dir(base, "generate");
  const std::string first = slurp(dir / "dataset.csv");

  // identical config maps to the same run directory; --force reruns it
  CHECK(run(common).exit_code != 0);
  REQUIRE(run("--force " + common).exit_code == 0);
  CHECK(slurp(dir / "dataset.csv") == first);

  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["command"] == "generate");
  CHECK(manifest["seed"] == 42);
  CHECK(manifest.contains("config_hash"));
  CHECK(manifest.contains("timestamp"));
}

TEST_CASE("RCAD_SEED overrides the config seed and --seed beats both") {
  const fs::path base = scratch() / "seeds";
  REQUIRE(run("--out " + base.string() + "/a generate --n-samples 20",
              "RCAD_SEED=123").exit_code == 0);
  REQUIRE(run("--out " + base.string() + "/b --seed 123 generate --n-samples 20",
              "RCAD_SEED=999").exit_code == 0);
  REQUIRE(run("--out " + base.string() + "/c generate --n-samples 20").exit_code == 0);

  const std::string a = slurp(only_run_dir(base / "a", "generate") / "dataset.csv");
  const std::string b = slurp(only_run_dir(base / "b", "generate") / "dataset.csv");
  const std::string c = slurp(only_run_dir(base / "c", "generate") / "dataset.csv");
  CHECK(a == b);  // env seed == flag seed
  CHECK(a != c);  // default seed 42 differs
  const json ma = json::parse(slurp(only_run_dir(base / "a", "generate") / "manifest.json"));
  CHECK(ma["seed"] == 123);
}

TEST_CASE("unknown config keys are rejected by name") {
  const fs::path cfg = scratch() / "bad.json";
  std::ofstream(cfg) << R"({"seed": 1, "generate": {"n_sample": 10}})";
  const RunOutput r = run("--config " + cfg.string() + " generate");
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("n_sample") != std::string::npos);
}

TEST_CASE("config file values are applied and flags win over them") {
  const fs::path cfg = scratch() / "gen.json";
  std::ofstream(cfg) << R"({"seed": 7, "generate": {"n_samples": 24, "seq_len": 3}})";
  const fs::path base = scratch() / "cfggen";
  REQUIRE(run("--config " + cfg.string() + " --out " + base.string() +
              " generate --seq-len 2").exit_code == 0);
  const fs::path dir = only_run_dir(base, "generate");
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["config"]["generate"]["n_samples"] == 24);
  CHECK(manifest["config"]["generate"]["seq_len"] == 2);  // flag override
  CHECK(manifest["seed"] == 7);
}

TEST_CASE("preprocess reports duplicates and zeroes degenerate columns") {
  const fs::path input = scratch() / "table.csv";
  // three identical rows plus a constant column and a missing cell
  std::ofstream(input) << "a,b,const\n1,2,9\n1,2,9\n1,2,9\n4,,9\n5,6,9\n";
  const fs::path base = scratch() / "prep";
  const RunOutput r = run("--out " + base.string() + " preprocess --input " + input.string());
  REQUIRE(r.exit_code == 0);
  const fs::path dir = only_run_dir(base, "preprocess");

  const json report = json::parse(slurp(dir / "clean_report.json"));
  CHECK(report["duplicates_removed"] == 2);
  CHECK(report["missing_imputed"]["b"] == 1);

  const json scaler = json::parse(slurp(dir / "scaler.json"));
  CHECK(scaler["degenerate"][2] == 1);

  const rcad::DataTable cleaned = rcad::DataTable::from_csv((dir / "cleaned.csv").string());
  CHECK(cleaned.row_count == 3);
  const int ci = cleaned.column_index("const");
  for (std::size_t row = 0; row < cleaned.row_count; ++row) {
    CHECK(*cleaned.columns[static_cast<std::size_t>(ci)][row] == 0.0);
  }
}

TEST_CASE("clean input passes through preprocess with all-zero counts") {
  const fs::path input = scratch() / "clean_table.csv";
  std::ofstream(input) << "a,b\n1,10\n2,20\n3,15\n";
  const fs::path base = scratch() / "prep_clean";
  REQUIRE(run("--out " + base.string() + " preprocess --input " + input.string()).exit_code ==
          0);
  const fs::path dir = only_run_dir(base, "preprocess");
  const json report = json::parse(slurp(dir / "clean_report.json"));
  CHECK(report["duplicates_removed"] == 0);
  CHECK(report["rows_dropped"] == 0);
  CHECK(report["missing_imputed"].empty());
  // output equals the standardized input
  const auto [expected, state] = rcad::standardize(rcad::DataTable::from_csv(input.string()));
  const rcad::DataTable got = rcad::DataTable::from_csv((dir / "cleaned.csv").string());
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t row = 0; row < 3; ++row) {
      CHECK(*got.columns[c][row] == doctest::Approx(*expected.columns[c][row]).epsilon(1e-12));
    }
  }
}

TEST_CASE("features writes the matrix, selection, and outliers") {
  const fs::path input = scratch() / "feat.csv";
  std::ofstream(input) << "x,y,z\n1,2,5\n2,4,1\n3,6,4\n4,8,2\n5,10.5,3\n";
  const fs::path base = scratch() / "feat";
  REQUIRE(run("--out " + base.string() + " features --input " + input.string() +
              " --target x --k 1").exit_code == 0);
  const fs::path dir = only_run_dir(base, "features");
  CHECK(fs::exists(dir / "correlation.csv"));
  const json sel = json::parse(slurp(dir / "selection.json"));
  CHECK(sel["features"][0] == "y");
  CHECK(sel["truncated"] == false);
  CHECK(fs::exists(dir / "outliers.json"));
}

TEST_CASE("train produces checkpoint, history, svg plots, and is replayable") {
  const fs::path base = scratch() / "trainrun";
  REQUIRE(run("--out " + base.string() + " generate --n-samples 40 --seq-len 4").exit_code ==
          0);
  const fs::path data = only_run_dir(base, "generate") / "dataset.csv";
  const std::string train_cmd = "--out " + base.string() + " --seed 5 train --data " +
                                data.string() + " --variant gru --hidden 6 --epochs 3";
  REQUIRE(run(train_cmd).exit_code == 0);
  const fs::path dir = only_run_dir(base, "train");
  CHECK(fs::exists(dir / "checkpoint.json"));
  CHECK(fs::exists(dir / "history_loss.svg"));
  CHECK(fs::exists(dir / "history_accuracy.svg"));
  const std::string history = slurp(dir / "history.csv");
  CHECK(history.rfind("epoch,", 0) == 0);

  const std::string checkpoint = slurp(dir / "checkpoint.json");
  REQUIRE(run("--force " + train_cmd).exit_code == 0);
  CHECK(slurp(dir / "history.csv") == history);  // byte-identical replay
  CHECK(slurp(dir / "checkpoint.json") == checkpoint);
}

TEST_CASE("hybrid training with the default budget yields 30 history rows") {
  const fs::path base = scratch() / "defaults";
  REQUIRE(run("--out " + base.string() + " generate --n-samples 60 --seq-len 4").exit_code ==
          0);
  const fs::path data = only_run_dir(base, "generate") / "dataset.csv";
  REQUIRE(run("--out " + base.string() + " train --data " + data.string() +
              " --variant hybrid --hidden 6 4 --no-svg")
              .exit_code == 0);
  const std::string history = slurp(only_run_dir(base, "train") / "history.csv");
  CHECK(std::count(history.begin(), history.end(), '\n') == 31);  // header + 30 epochs
}

TEST_CASE("lr 0 training leaves the seeded initialization untouched") {
  const fs::path base = scratch() / "lr0";
  REQUIRE(run("--out " + base.string() + " generate --n-samples 24 --seq-len 3").exit_code ==
          0);
  const fs::path data = only_run_dir(base, "generate") / "dataset.csv";
  // two different epoch budgets; with lr 0 both checkpoints hold the init
  REQUIRE(run("--out " + base.string() + "/e1 --seed 9 train --data " + data.string() +
              " --variant gru --hidden 5 --lr 0 --epochs 1 --dropout 0").exit_code == 0);
  REQUIRE(run("--out " + base.string() + "/e3 --seed 9 train --data " + data.string() +
              " --variant gru --hidden 5 --lr 0 --epochs 3 --dropout 0").exit_code == 0);
  const json a = json::parse(slurp(only_run_dir(base / "e1", "train") / "checkpoint.json"));
  const json b = json::parse(slurp(only_run_dir(base / "e3", "train") / "checkpoint.json"));
  CHECK(a["tensors"] == b["tensors"]);
}

TEST_CASE("evaluate on the training data of a converged separable run") {
  const fs::path base = scratch() / "converged";
  REQUIRE(run("--out " + base.string() +
              " generate --n-samples 120 --seq-len 6 --separability 4.0").exit_code == 0);
  const fs::path data = only_run_dir(base, "generate") / "dataset.csv";
  REQUIRE(run("--out " + base.string() + " --seed 2 train --data " + data.string() +
              " --variant bilstm --epochs 12 --no-svg").exit_code == 0);
  const fs::path ck = only_run_dir(base, "train") / "checkpoint.json";
  const RunOutput r = run("--out " + base.string() + " evaluate --checkpoint " + ck.string() +
                          " --data " + data.string());
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(slurp(only_run_dir(base, "evaluate") / "report.json"));
  CHECK(report["reports"][0]["metrics"]["accuracy"].get<double>() >= 0.95);
  CHECK(r.out.find("Parameters | Value (%)") != std::string::npos);
}

TEST_CASE("evaluate --compare renders a multi-model comparison block") {
  const fs::path base = scratch() / "compare";
  REQUIRE(run("--out " + base.string() + " generate --n-samples 30 --seq-len 3").exit_code ==
          0);
  const fs::path data = only_run_dir(base, "generate") / "dataset.csv";
  for (const std::string variant : {"gru", "bilstm", "hybrid"}) {
    REQUIRE(run("--out " + base.string() + "/" + variant + " --seed 4 train --data " +
                data.string() + " --variant " + variant + " --epochs 2 --no-svg")
                .exit_code == 0);
  }
  const auto ck = [&](const std::string& v) {
    return (only_run_dir(base / v, "train") / "checkpoint.json").string();
  };
  const RunOutput r = run("--out " + base.string() + " evaluate --checkpoint " + ck("gru") +
                          " --compare " + ck("bilstm") + " " + ck("hybrid") + " --data " +
                          data.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("Comparison") != std::string::npos);
  CHECK(r.out.find("gru | ") != std::string::npos);
  CHECK(r.out.find("bilstm | ") != std::string::npos);
  CHECK(r.out.find("hybrid | ") != std::string::npos);

  // re-render from the saved report file
  const fs::path report = only_run_dir(base, "evaluate") / "report.json";
  const RunOutput rr = run("report --inputs " + report.string() + " --format csv");
  REQUIRE(rr.exit_code == 0);
  CHECK(rr.out.rfind("model,accuracy", 0) == 0);
}

TEST_CASE("evaluate rejects mismatched checkpoints and empty datasets") {
  const fs::path base = scratch() / "mismatch";
  REQUIRE(run("--out " + base.string() + " generate --n-samples 24 --seq-len 3 "
              "--n-features 4")
              .exit_code == 0);
  const fs::path data = only_run_dir(base, "generate") / "dataset.csv";
  REQUIRE(run("--out " + base.string() + " --seed 3 train --data " + data.string() +
              " --variant gru --epochs 1 --no-svg")
              .exit_code == 0);
  const fs::path ck = only_run_dir(base, "train") / "checkpoint.json";

  // dataset with a different feature count
  REQUIRE(run("--out " + base.string() + "/other generate --n-samples 24 --seq-len 3 "
              "--n-features 2")
              .exit_code == 0);
  const fs::path other = only_run_dir(base / "other", "generate") / "dataset.csv";
  CHECK(run("--out " + base.string() + " evaluate --checkpoint " + ck.string() + " --data " +
            other.string())
            .exit_code != 0);

  // header-only dataset
  const fs::path empty = scratch() / "empty.csv";
  std::ofstream(empty) << "sample_id,t,f1,f2,f3,f4,label\n";
  CHECK(run("--out " + base.string() + " evaluate --checkpoint " + ck.string() + " --data " +
            empty.string())
            .exit_code != 0);
}

TEST_CASE("gradcheck passes by default and fails when corrupted") {
  const RunOutput ok = run("gradcheck --variant gru");
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("gradcheck: PASS") != std::string::npos);

  const RunOutput bad = run("gradcheck --variant gru --corrupt-tensor gru.b_update");
  CHECK(bad.exit_code != 0);
  CHECK(bad.out.find("gru.b_update") != std::string::npos);
  CHECK(bad.out.find("FAIL") != std::string::npos);

  // variant filtering: only GRU tensors appear
  CHECK(ok.out.find("bilstm.") == std::string::npos);
}
