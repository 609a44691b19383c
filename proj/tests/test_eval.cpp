#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hsad/eval.hpp"
#include "hsad/toy_transformer.hpp"
#include "oracles.hpp"

using namespace hsad;

TEST(Auroc, Examples) {
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.9, 0.1, 0.8, 0.2}, std::vector<int>{1, 1, 0, 0}), 0.5);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}), 0.0);
}

TEST(Auroc, Errors) {
  try {
    auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClass);
  }
  EXPECT_THROW(auroc(std::vector<double>{0.1}, std::vector<int>{1, 0}), Error);
  EXPECT_THROW(auroc(std::vector<double>{NAN, 0.2}, std::vector<int>{1, 0}), Error);
}

TEST(Auroc, MatchesBruteForceWithTies) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng.below(7)) / 7.0;  // coarse grid, plenty of ties
      y[i] = int(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(auroc(s, y), oracle::brute_force_auroc(s, y));
  }
}

TEST(Auroc, InvariantUnderMonotoneMaps) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng.below(40);
    std::vector<double> s(n), a(n), b(n), neg(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng.below(10)) / 4.0;
      y[i] = int(i % 2);
      a[i] = 2.0 * s[i] + 1.0;
      b[i] = std::exp(s[i]);
      neg[i] = -s[i];
    }
    const double base = auroc(s, y);
    EXPECT_EQ(auroc(a, y), base);
    EXPECT_EQ(auroc(b, y), base);
    EXPECT_NEAR(auroc(neg, y), 1.0 - base, 1e-15);
  }
}

TEST(Split, StratifiedSizes) {
  std::vector<int> labels(100, 0);
  std::fill(labels.begin(), labels.begin() + 60, 1);
  const auto idx = split_indices(labels, {0.7, 5, true});
  std::size_t train_pos = 0;
  for (auto i : idx.train) train_pos += labels[i] == 1;
  EXPECT_NEAR(double(train_pos), 42.0, 1.0);
  EXPECT_NEAR(double(idx.train.size() - train_pos), 28.0, 1.0);

  std::set<std::size_t> all(idx.train.begin(), idx.train.end());
  for (auto i : idx.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), labels.size());
}

TEST(Split, DeterministicAndSeedSensitive) {
  std::vector<int> labels(50);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = int(i % 3 == 0);
  const auto a = split_indices(labels, {0.7, 1, true});
  const auto b = split_indices(labels, {0.7, 1, true});
  const auto c = split_indices(labels, {0.7, 2, true});
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.train, c.train);
}

TEST(Split, KeepsBothClassesOnEachSide) {
  std::vector<int> labels = {1, 1, 0, 0, 0, 0, 0, 0, 0, 0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto idx = split_indices(labels, {0.9, seed, true});
    int test_pos = 0;
    for (auto i : idx.test) test_pos += labels[i];
    EXPECT_EQ(test_pos, 1);
  }
  EXPECT_THROW(split_indices(std::vector<int>{1, 0, 0, 0}, {0.7, 0, true}), Error);
  EXPECT_THROW(split_indices(labels, {1.0, 0, true}), Error);
}

namespace {

PipelineConfig quick_config() {
  PipelineConfig cfg;
  cfg.detector.hidden_dims = {256};
  cfg.detector.epochs = 40;
  return cfg;
}

toy::SyntheticData small_synthetic() {
  toy::SyntheticSpec spec;
  spec.n_per_class = 20;
  spec.class_b_bin = 4;  // Nyquist for l = 2; bin 3 would have the same amplitude as bin 1
  return toy::generate_synthetic_traces(spec, 4, 2);
}

}  // namespace

TEST(Pipeline, DeterministicAndSeparates) {
  const auto data = small_synthetic();
  const auto a = run_pipeline(data.traces, data.metas, quick_config());
  const auto b = run_pipeline(data.traces, data.metas, quick_config());
  EXPECT_EQ(a.auroc, b.auroc);
  EXPECT_GE(a.auroc, 0.95);
  EXPECT_EQ(a.n_pos + a.n_neg + a.n_train, 40u);
  EXPECT_EQ(a.layer_count, 2u);
}

TEST(Pipeline, SingleClassNamesLabelStage) {
  auto data = small_synthetic();
  for (auto& m : data.metas) m.similarity_score = 0.9;
  try {
    run_pipeline(data.traces, data.metas, quick_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClass);
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
  }
}

TEST(Pipeline, MissingCaptureNamesExample) {
  auto data = small_synthetic();
  data.traces[3].captures.pop_back();
  try {
    run_pipeline(data.traces, data.metas, quick_config());
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("features"), std::string::npos);
    EXPECT_NE(msg.find(data.traces[3].example_id), std::string::npos);
  }
}

TEST(Ablation, TableShapes) {
  const auto data = small_synthetic();
  auto base = quick_config();
  base.detector.epochs = 10;

  const auto obs = run_ablation(data.traces, data.metas, AblationMode::kObservationPoints, base);
  ASSERT_EQ(obs.rows.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(obs.rows[i].report.config.observation, kAllObservationPoints[i]);
  }

  AblationOptions opts;
  opts.seeds_per_count = 3;
  opts.threads = 3;
  const auto layers = run_ablation(data.traces, data.metas, AblationMode::kLayerSampling, base, opts);
  ASSERT_EQ(layers.rows.size(), 2u * 3u);  // grid {1, 2}
  EXPECT_EQ(layers.rows[0].report.layer_count, 1u);
  EXPECT_EQ(layers.rows[5].report.layer_count, 2u);

  opts.threads = 1;
  const auto serial = run_ablation(data.traces, data.metas, AblationMode::kLayerSampling, base, opts);
  EXPECT_EQ(results_tsv(serial), results_tsv(layers));

  const auto src = run_ablation(data.traces, data.metas, AblationMode::kFeatureSource, base);
  ASSERT_EQ(src.rows.size(), 2u);
  EXPECT_EQ(src.rows[1].report.config.source, FeatureSource::kTimeMax);

  const auto tsv = results_tsv(obs);
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 7);
}

TEST(Ablation, FullLayerCountMatchesPipeline) {
  const auto data = small_synthetic();
  auto base = quick_config();
  base.detector.epochs = 10;
  AblationOptions opts;
  opts.layer_grid = {2};
  opts.seeds_per_count = 2;
  const auto table = run_ablation(data.traces, data.metas, AblationMode::kLayerSampling, base, opts);
  const auto full = run_pipeline(data.traces, data.metas, base);
  for (const auto& row : table.rows) EXPECT_EQ(row.report.auroc, full.auroc);
}

TEST(Ablation, GridDefaults) {
  EXPECT_EQ(default_layer_grid(32), (std::vector<std::uint32_t>{1, 2, 4, 8, 16, 32}));
  EXPECT_EQ(default_layer_grid(28), (std::vector<std::uint32_t>{1, 2, 4, 8, 16, 28}));
  EXPECT_EQ(default_layer_grid(1), (std::vector<std::uint32_t>{1}));
}
