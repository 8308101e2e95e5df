// Synthetic sequence generator and its long-format CSV.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "rcad/datagen.hpp"
#include "rcad/error.hpp"

using namespace rcad;

namespace {

// Depth-1 decision stump on per-sequence feature means; exhaustive search
// over features, thresholds, and polarity.
double best_stump_accuracy(const SequenceDataset& data) {
  double best = 0.0;
  for (int f = 0; f < data.n_features; ++f) {
    std::vector<std::pair<double, int>> means;
    for (int i = 0; i < data.size(); ++i) {
      double m = 0.0;
      for (int t = 0; t < data.seq_len; ++t) m += data.at(i, t, f);
      means.emplace_back(m / data.seq_len, data.labels[static_cast<std::size_t>(i)]);
    }
    std::sort(means.begin(), means.end());
    const auto n = static_cast<double>(means.size());
    // sweep every split point; count label-1 above the threshold
    std::int64_t ones_total = 0;
    for (const auto& [m, y] : means) ones_total += y;
    std::int64_t ones_below = 0;
    for (std::size_t split = 0; split <= means.size(); ++split) {
      const auto zeros_below = static_cast<std::int64_t>(split) - ones_below;
      const std::int64_t correct_up = zeros_below + (ones_total - ones_below);
      const auto correct_down =
          static_cast<std::int64_t>(means.size()) - correct_up;
      best = std::max(best, static_cast<double>(std::max(correct_up, correct_down)) / n);
      if (split < means.size()) ones_below += means[split].second;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("same seed reproduces the dataset bit for bit") {
  GenConfig config;
  config.n_samples = 50;
  config.seq_len = 6;
  config.n_features = 4;
  config.seed = 123;
  const SequenceDataset a = generate(config);
  const SequenceDataset b = generate(config);
  CHECK(a.values == b.values);
  CHECK(a.labels == b.labels);

  config.seed = 124;
  const SequenceDataset c = generate(config);
  CHECK(a.values != c.values);
}

TEST_CASE("class proportions follow class_balance within one sample") {
  for (const double balance : {0.5, 0.3, 0.7}) {
    GenConfig config;
    config.n_samples = 101;
    config.class_balance = balance;
    const SequenceDataset d = generate(config);
    std::int64_t ones = 0;
    for (const int y : d.labels) ones += y;
    CHECK(std::fabs(static_cast<double>(ones) - balance * 101.0) <= 1.0);
  }
}

TEST_CASE("config validation") {
  GenConfig config;
  config.n_samples = 3;
  CHECK_THROWS_AS(generate(config), ConfigError);
  config.n_samples = 10;
  config.class_balance = 0.0;
  CHECK_THROWS_AS(generate(config), ConfigError);
  config.class_balance = 0.5;
  config.separability = -1.0;
  CHECK_THROWS_AS(generate(config), ConfigError);
  config.separability = 0.0;
  config.seq_len = 0;
  CHECK_THROWS_AS(generate(config), ConfigError);
}

TEST_CASE("zero separability carries no label signal in the values") {
  GenConfig config;
  config.n_samples = 40;
  config.separability = 0.0;
  config.seed = 9;
  const SequenceDataset with_labels = generate(config);
  // flipping the balance only relabels, the draws are identical
  config.class_balance = 0.25;
  const SequenceDataset relabeled = generate(config);
  CHECK(with_labels.values == relabeled.values);
  CHECK(with_labels.labels != relabeled.labels);
}

TEST_CASE("a stump on sequence means solves the well-separated task") {
  GenConfig config;
  config.n_samples = 400;
  config.seq_len = 10;
  config.n_features = 6;
  config.separability = 4.0;
  config.seed = 17;
  const SequenceDataset d = generate(config);
  CHECK(best_stump_accuracy(d) >= 0.9);
}

TEST_CASE("csv export/import round trip is exact") {
  GenConfig config;
  config.n_samples = 8;
  config.seq_len = 3;
  config.n_features = 2;
  config.seed = 3;
  const SequenceDataset d = generate(config);
  const SequenceDataset back = import_csv_text(export_csv_text(d));
  CHECK(back.seq_len == d.seq_len);
  CHECK(back.n_features == d.n_features);
  CHECK(back.values == d.values);
  CHECK(back.labels == d.labels);
}

TEST_CASE("csv layout: row count and label placement") {
  GenConfig config;
  config.n_samples = 4;
  config.seq_len = 2;
  config.n_features = 2;
  const SequenceDataset d = generate(config);
  const std::string text = export_csv_text(d);
  const auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  CHECK(lines == 1 + 4 * 2);  // header + n*T data rows
  CHECK(text.rfind("sample_id,t,f1,f2,label\n", 0) == 0);
  // t=1 rows end with an empty label field
  CHECK(text.find(",1,") != std::string::npos);
}

TEST_CASE("empty dataset round trips as a header-only file") {
  SequenceDataset empty;
  empty.seq_len = 0;
  empty.n_features = 3;
  const std::string text = export_csv_text(empty);
  CHECK(text == "sample_id,t,f1,f2,f3,label\n");
  const SequenceDataset back = import_csv_text(text);
  CHECK(back.empty());
  CHECK(back.n_features == 3);
}

TEST_CASE("import rejects malformed sequence files") {
  CHECK_THROWS_AS(import_csv_text("a,b\n1,2\n"), SchemaError);
  // missing label on the t=0 row
  CHECK_THROWS_AS(import_csv_text("sample_id,t,f1,label\n0,0,1.5,\n"), SchemaError);
  // t does not start at 0
  CHECK_THROWS_AS(import_csv_text("sample_id,t,f1,label\n0,1,1.5,1\n"), SchemaError);
  // ragged sequence lengths
  CHECK_THROWS_AS(
      import_csv_text("sample_id,t,f1,label\n0,0,1,1\n0,1,2,\n1,0,3,0\n2,0,4,1\n2,1,5,\n2,2,6,\n"),
      SchemaError);
  // non-integer label
  CHECK_THROWS_AS(import_csv_text("sample_id,t,f1,label\n0,0,1.5,0.5\n"), SchemaError);
}
