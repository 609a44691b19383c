#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsad/detector.hpp"
#include "hsad/error.hpp"
#include "hsad/labeler.hpp"
#include "hsad/manifest.hpp"
#include "hsad/rng.hpp"
#include "hsad/signal.hpp"
#include "hsad/spectral.hpp"
#include "hsad/trace.hpp"

namespace hsad {

// Probability that a random positive outscores a random negative, ties
// counted one half. Computed from the Mann-Whitney rank sum with average
// ranks; ranks are kept doubled so the arithmetic stays in integers.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorCode::kShapeMismatch,
          "auroc: score/label length mismatch");
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(std::isfinite(scores[i]), ErrorCode::kInvalidArgument, "auroc: non-finite score");
    require(labels[i] == 0 || labels[i] == 1, ErrorCode::kInvalidArgument, "auroc: label not 0/1");
    pos += labels[i];
  }
  const std::int64_t neg = static_cast<std::int64_t>(scores.size()) - pos;
  require(pos >= 1 && neg >= 1, ErrorCode::kSingleClass,
          "auroc: undefined without both classes (" + std::to_string(pos) + " positive, " +
              std::to_string(neg) + " negative)");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::int64_t rank_sum_x2 = 0;
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start + 1;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
    // ranks start+1..end share the average (start+1+end)/2
    const auto doubled = static_cast<std::int64_t>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) {
      if (labels[order[k]] == 1) rank_sum_x2 += doubled;
    }
    start = end;
  }
  const std::int64_t u_x2 = rank_sum_x2 - pos * (pos + 1);
  return static_cast<double>(u_x2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  bool stratified = true;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded partition. Stratified splits keep at least one example of each class
// on both sides; indices are returned in ascending order.
inline SplitIndices split_indices(std::span<const int> labels, const SplitSpec& spec) {
  require(spec.train_fraction > 0.0 && spec.train_fraction < 1.0, ErrorCode::kInvalidArgument,
          "split: train_fraction must be in (0, 1)");
  Rng rng(derive_seed(spec.seed, 2));
  SplitIndices out;
  auto take = [&](std::vector<std::size_t> idx, bool keep_both) {
    rng.shuffle(idx);
    auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * double(idx.size())));
    if (keep_both) n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + std::ptrdiff_t(n_train));
    out.test.insert(out.test.end(), idx.begin() + std::ptrdiff_t(n_train), idx.end());
  };
  if (spec.stratified) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    require(pos.size() >= 2 && neg.size() >= 2, ErrorCode::kSingleClass,
            "split: stratified split needs at least 2 examples per class, have " +
                std::to_string(pos.size()) + " positive / " + std::to_string(neg.size()) +
                " negative");
    take(std::move(pos), true);
    take(std::move(neg), true);
  } else {
    require(labels.size() >= 2, ErrorCode::kInvalidArgument, "split: need at least 2 examples");
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), 0);
    take(std::move(all), true);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                       const SplitSpec& spec) {
  const auto idx = split_indices(data.labels, spec);
  return {data.subset(idx.train), data.subset(idx.test)};
}

inline std::vector<double> score_dataset(const DetectorModel& model, const LabeledDataset& data) {
  require(data.d == model.input_dim(), ErrorCode::kShapeMismatch,
          "feature width " + std::to_string(data.d) + " does not match model input " +
              std::to_string(model.input_dim()));
  if (data.size() == 0) return {};
  return forward_eval(model, Matrix::from_rows(data.features));
}

// Features for every trace at one observation point and layer selection.
// An empty `layer_ids` selects all layers.
inline FeatureSet compute_features(const std::vector<ActivationTrace>& traces,
                                   ObservationPoint point, std::vector<std::uint32_t> layer_ids,
                                   FeatureSource source) {
  require(!traces.empty(), ErrorCode::kMissingData, "no traces");
  FeatureSet fs;
  fs.d = traces.front().d;
  fs.source = source;
  fs.observation = point;
  if (layer_ids.empty()) layer_ids = all_layers(traces.front().l);
  fs.layer_count = static_cast<std::uint32_t>(layer_ids.size());
  for (const auto& t : traces) {
    try {
      require(t.d == fs.d, ErrorCode::kShapeMismatch,
              "hidden width " + std::to_string(t.d) + " differs from first trace");
      const auto signal = build_signal_matrix(t, point, layer_ids);
      fs.ids.push_back(t.example_id);
      fs.features.push_back(extract_features(signal, source).f);
    } catch (const Error& e) {
      fail(e.code(), "example '" + t.example_id + "': " + e.what());
    }
  }
  return fs;
}

struct PipelineConfig {
  ObservationPoint observation = ObservationPoint::kAEnd;
  std::vector<std::uint32_t> layer_ids;  // empty = all layers
  FeatureSource source = FeatureSource::kFftMaxNonDc;
  LabelConfig label;
  DetectorConfig detector;  // input_dim is taken from the features
  SplitSpec split;
};

struct EvalReport {
  double auroc = 0.0;
  std::size_t n_pos = 0;  // test split
  std::size_t n_neg = 0;
  std::size_t n_train = 0;
  PipelineConfig config;
  std::uint32_t layer_count = 0;
};

inline nlohmann::json detector_config_json(const DetectorConfig& c) {
  return {{"input_dim", c.input_dim},       {"hidden_dims", c.hidden_dims},
          {"dropout_rate", c.dropout_rate}, {"lambda_l1", c.lambda_l1},
          {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},     {"seed", c.seed}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  const auto& c = r.config;
  return {{"auroc", r.auroc},
          {"n_pos", r.n_pos},
          {"n_neg", r.n_neg},
          {"n_train", r.n_train},
          {"observation", std::string(to_string(c.observation))},
          {"layer_count", r.layer_count},
          {"layer_ids", c.layer_ids},
          {"source", std::string(to_string(c.source))},
          {"tau", c.label.tau},
          {"scorer", std::string(to_string(c.label.scorer))},
          {"detector", detector_config_json(c.detector)},
          {"split",
           {{"train_fraction", c.split.train_fraction},
            {"seed", c.split.seed},
            {"stratified", c.split.stratified}}}};
}

namespace detail {

template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    fail(e.code(), std::string("stage '") + stage + "': " + e.what());
  }
}

}  // namespace detail

// Training and scoring on pre-labeled data: split, train on the train part,
// AUROC on the held-out part.
inline EvalReport evaluate_labeled(const LabeledDataset& data, PipelineConfig cfg) {
  const auto parts = detail::run_stage("split", [&] { return split(data, cfg.split); });
  cfg.detector.input_dim = data.d;
  const auto trained = detail::run_stage("train", [&] {
    const bool full = cfg.detector.hidden_dims.back() == kDetectorBottleneck;
    cfg.detector.validate(full);
    auto model = full ? init_model(cfg.detector) : detail::init_model_unchecked(cfg.detector);
    return train(std::move(model), parts.first, cfg.detector).model;
  });
  EvalReport report;
  report.auroc = detail::run_stage("eval", [&] {
    const auto scores = score_dataset(trained, parts.second);
    return auroc(scores, parts.second.labels);
  });
  report.n_pos = parts.second.positives();
  report.n_neg = parts.second.negatives();
  report.n_train = parts.first.size();
  report.layer_count = data.layer_count;
  report.config = std::move(cfg);
  return report;
}

inline EvalReport run_pipeline(const std::vector<ActivationTrace>& traces,
                               const std::vector<ExampleMeta>& metas, PipelineConfig cfg) {
  const auto features = detail::run_stage("features", [&] {
    return compute_features(traces, cfg.observation, cfg.layer_ids, cfg.source);
  });
  const auto labeled = detail::run_stage("label", [&] {
    auto result = label_dataset(metas, features, cfg.label);
    const auto pos = result.data.positives();
    const auto neg = result.data.negatives();
    require(pos > 0 && neg > 0, ErrorCode::kSingleClass,
            "all " + std::to_string(result.data.size()) + " examples labeled " +
                (pos > 0 ? "1" : "0") + " at tau=" + std::to_string(cfg.label.tau));
    return result.data;
  });
  if (cfg.layer_ids.empty()) cfg.layer_ids = all_layers(traces.front().l);
  auto report = evaluate_labeled(labeled, std::move(cfg));
  report.layer_count = features.layer_count;
  return report;
}

enum class AblationMode { kObservationPoints, kLayerSampling, kFeatureSource };

inline std::optional<AblationMode> parse_ablation_mode(std::string_view s) {
  if (s == "observation-points") return AblationMode::kObservationPoints;
  if (s == "layer-sampling") return AblationMode::kLayerSampling;
  if (s == "feature-source") return AblationMode::kFeatureSource;
  return std::nullopt;
}

inline std::string_view to_string(AblationMode m) {
  switch (m) {
    case AblationMode::kObservationPoints: return "observation-points";
    case AblationMode::kLayerSampling: return "layer-sampling";
    case AblationMode::kFeatureSource: return "feature-source";
  }
  return "?";
}

struct AblationOptions {
  std::vector<std::uint32_t> layer_grid;  // empty = 1, 2, 4, ... plus l
  std::uint32_t seeds_per_count = 5;
  std::uint64_t layer_seed = 0;  // repetition r uses layer_seed + r
  LayerSampling sampling = LayerSampling::kRandom;
  unsigned threads = 1;
};

struct AblationRow {
  std::uint32_t layer_seed = 0;
  EvalReport report;
};

struct AblationTable {
  AblationMode mode = AblationMode::kObservationPoints;
  LayerSampling sampling = LayerSampling::kRandom;
  std::vector<AblationRow> rows;
};

inline std::vector<std::uint32_t> default_layer_grid(std::uint32_t l) {
  std::vector<std::uint32_t> grid;
  for (std::uint32_t k = 1; k < l; k *= 2) grid.push_back(k);
  grid.push_back(l);
  return grid;
}

// Runs every cell of the chosen ablation. Cells are independent and may run
// on several threads; row order and values do not depend on the thread count.
inline AblationTable run_ablation(const std::vector<ActivationTrace>& traces,
                                  const std::vector<ExampleMeta>& metas, AblationMode mode,
                                  const PipelineConfig& base, const AblationOptions& opts = {}) {
  require(!traces.empty(), ErrorCode::kMissingData, "ablation: no traces");
  AblationTable table;
  table.mode = mode;
  table.sampling = opts.sampling;
  std::vector<std::pair<PipelineConfig, std::uint32_t>> cells;
  switch (mode) {
    case AblationMode::kObservationPoints:
      for (auto p : kAllObservationPoints) {
        auto c = base;
        c.observation = p;
        cells.emplace_back(std::move(c), 0);
      }
      break;
    case AblationMode::kFeatureSource:
      for (auto s : {FeatureSource::kFftMaxNonDc, FeatureSource::kTimeMax}) {
        auto c = base;
        c.source = s;
        cells.emplace_back(std::move(c), 0);
      }
      break;
    case AblationMode::kLayerSampling: {
      const auto l = traces.front().l;
      const auto grid = opts.layer_grid.empty() ? default_layer_grid(l) : opts.layer_grid;
      require(opts.seeds_per_count >= 1, ErrorCode::kInvalidArgument,
              "ablation: seeds_per_count must be >= 1");
      for (auto count : grid) {
        for (std::uint32_t r = 0; r < opts.seeds_per_count; ++r) {
          auto c = base;
          const auto seed = static_cast<std::uint32_t>(opts.layer_seed + r);
          c.layer_ids = subsample_layers(l, count, seed, opts.sampling);
          cells.emplace_back(std::move(c), seed);
        }
      }
      break;
    }
  }

  table.rows.resize(cells.size());
  std::vector<std::optional<Error>> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        table.rows[i] = {cells[i].second, run_pipeline(traces, metas, cells[i].first)};
      } catch (const Error& e) {
        errors[i] = e;
      }
    }
  };
  const unsigned nthreads = std::max(1u, std::min<unsigned>(opts.threads, unsigned(cells.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) throw *e;
  }
  return table;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string join_dims(const std::vector<std::uint32_t>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> results_header() {
  return {"mode",        "observation",   "layer_count",   "layer_seed",  "sampling",
          "layer_ids",   "source",        "tau",           "scorer",      "hidden_dims",
          "dropout",     "lambda_l1",     "learning_rate", "epochs",      "batch_size",
          "detector_seed", "train_fraction", "split_seed", "n_train",     "n_pos",
          "n_neg",       "auroc"};
}

inline std::vector<std::vector<std::string>> results_cells(const AblationTable& table) {
  std::vector<std::vector<std::string>> out;
  for (const auto& row : table.rows) {
    const auto& r = row.report;
    const auto& c = r.config;
    out.push_back({std::string(to_string(table.mode)),
                   std::string(to_string(c.observation)),
                   std::to_string(r.layer_count),
                   std::to_string(row.layer_seed),
                   table.sampling == LayerSampling::kRandom ? "random" : "strided",
                   detail::join_dims(c.layer_ids, ','),
                   std::string(to_string(c.source)),
                   detail::format_double(c.label.tau),
                   std::string(to_string(c.label.scorer)),
                   detail::join_dims(c.detector.hidden_dims, ','),
                   detail::format_double(c.detector.dropout_rate),
                   detail::format_double(c.detector.lambda_l1),
                   detail::format_double(c.detector.learning_rate),
                   std::to_string(c.detector.epochs),
                   std::to_string(c.detector.batch_size),
                   std::to_string(c.detector.seed),
                   detail::format_double(c.split.train_fraction),
                   std::to_string(c.split.seed),
                   std::to_string(r.n_train),
                   std::to_string(r.n_pos),
                   std::to_string(r.n_neg),
                   detail::format_double(r.auroc)});
  }
  return out;
}

// Tab-separated, one header row, UTF-8.
inline std::string results_tsv(const AblationTable& table) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += '\t';
      out += cells[i];
    }
    out += '\n';
  };
  emit(results_header());
  for (const auto& row : results_cells(table)) emit(row);
  return out;
}

inline std::string results_summary(const AblationTable& table) {
  std::ostringstream out;
  out << "ablation: " << to_string(table.mode) << "\n";
  if (table.mode == AblationMode::kLayerSampling) {
    out << std::left << std::setw(12) << "layers" << std::setw(8) << "runs" << std::setw(12)
        << "mean" << "std\n";
    std::size_t i = 0;
    while (i < table.rows.size()) {
      const auto count = table.rows[i].report.layer_count;
      std::vector<double> v;
      for (; i < table.rows.size() && table.rows[i].report.layer_count == count; ++i) {
        v.push_back(table.rows[i].report.auroc);
      }
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / double(v.size() - 1)) : 0.0;
      out << std::setw(12) << count << std::setw(8) << v.size() << std::setw(12)
          << detail::format_double(mean) << detail::format_double(sd) << "\n";
    }
    return out.str();
  }
  out << std::left << std::setw(14) << "observation" << std::setw(18) << "source"
      << std::setw(8) << "layers" << "auroc\n";
  for (const auto& row : table.rows) {
    const auto& r = row.report;
    out << std::setw(14) << to_string(r.config.observation) << std::setw(18)
        << to_string(r.config.source) << std::setw(8) << r.layer_count
        << detail::format_double(r.auroc) << "\n";
  }
  return out.str();
}

}  // namespace hsad
