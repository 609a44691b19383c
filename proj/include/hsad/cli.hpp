#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hsad/hsad.hpp"

namespace hsad::cli {

inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// FNV-1a over the file bytes; identifies inputs in run manifests.
inline std::string file_digest(const std::string& path) {
  const auto bytes = io::read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline std::vector<std::uint32_t> parse_u32_list(const std::string& s, const std::string& what) {
  std::vector<std::uint32_t> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const auto v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "expected comma-separated integers, got '" + s + "'");
    }
  }
  if (out.empty()) throw CLI::ValidationError(what, "empty list");
  return out;
}

struct DetectorFlags {
  std::string hidden = "1024,512,256";
  double dropout = 0.2;
  double lambda = 1e-4;
  double lr = 0.01;
  std::uint32_t epochs = 200;
  std::uint32_t batch_size = 64;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--hidden", hidden, "hidden layer widths, ending in 256")->capture_default_str();
    app->add_option("--dropout", dropout, "dropout rate")->capture_default_str();
    app->add_option("--lambda", lambda, "L1 weight on first-layer weights")->capture_default_str();
    app->add_option("--lr", lr, "learning rate")->capture_default_str();
    app->add_option("--epochs", epochs, "training epochs")->capture_default_str();
    app->add_option("--batch-size", batch_size, "mini-batch size")->capture_default_str();
    app->add_option("--seed", seed, "detector seed")->capture_default_str();
  }

  DetectorConfig config() const {
    DetectorConfig c;
    c.hidden_dims = parse_u32_list(hidden, "--hidden");
    c.dropout_rate = dropout;
    c.lambda_l1 = lambda;
    c.learning_rate = lr;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.seed = seed;
    return c;
  }
};

struct SplitFlags {
  double fraction = 0.7;
  std::uint64_t seed = 0;
  bool no_stratify = false;

  void add(CLI::App* app) {
    app->add_option("--train-fraction", fraction, "train share of the split")->capture_default_str();
    app->add_option("--split-seed", seed, "split seed")->capture_default_str();
    app->add_flag("--no-stratify", no_stratify, "plain random split");
  }

  SplitSpec spec() const { return {fraction, seed, !no_stratify}; }
};

struct FeatureFlags {
  std::string observation = "a-end";
  std::string layers = "all";
  std::string source = "fft";
  std::uint64_t seed = 0;
  bool strided = false;

  void add(CLI::App* app) {
    app->add_option("--observation", observation, "q-start|q-mid|q-end|a-start|a-mid|a-end")
        ->capture_default_str();
    app->add_option("--layers", layers, "all | k (random subset of k layers) | id list a,b,c")
        ->capture_default_str();
    app->add_option("--source", source, "fft|time-max")->capture_default_str();
    app->add_option("--layer-seed", seed, "seed for random layer subsets")->capture_default_str();
    app->add_flag("--strided", strided, "evenly spaced layer subsets instead of random");
  }

  ObservationPoint point() const {
    auto p = parse_observation_point(observation);
    if (!p) throw CLI::ValidationError("--observation", "unknown observation point '" + observation + "'");
    return *p;
  }

  FeatureSource feature_source() const {
    auto s = parse_feature_source(source);
    if (!s) throw CLI::ValidationError("--source", "unknown source '" + source + "'");
    return *s;
  }

  std::vector<std::uint32_t> layer_ids(std::uint32_t l) const {
    if (layers == "all") return all_layers(l);
    if (layers.find(',') == std::string::npos) {
      const auto k = parse_u32_list(layers, "--layers").front();
      return subsample_layers(l, k, seed, strided ? LayerSampling::kStrided : LayerSampling::kRandom);
    }
    return parse_u32_list(layers, "--layers");
  }
};

struct LabelFlags {
  double tau = 0.5;
  std::string scorer = "external";

  void add(CLI::App* app) {
    app->add_option("--tau", tau, "similarity threshold; sim <= tau is a hallucination")
        ->capture_default_str();
    app->add_option("--scorer", scorer, "external|lexical")->capture_default_str();
  }

  LabelConfig config() const {
    auto s = parse_scorer(scorer);
    if (!s) throw CLI::ValidationError("--scorer", "unknown scorer '" + scorer + "'");
    return {tau, *s};
  }
};

inline std::filesystem::path prepare_out(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create output directory '" + out + "': " + ec.message());
  return out;
}

// Everything needed to replay a run: the argument vector, the resolved option
// values, input digests and the tool version.
inline void write_run_manifest(const std::filesystem::path& dir, const std::vector<std::string>& args,
                               const CLI::App& sub, const std::vector<std::string>& inputs,
                               std::uint64_t seed) {
  nlohmann::json j;
  j["tool"] = "hsad";
  j["version"] = kToolVersion;
  j["command"] = sub.get_name();
  j["args"] = args;
  j["config"] = sub.config_to_str(true, false);
  j["seed"] = seed;
  nlohmann::json digests = nlohmann::json::object();
  for (const auto& in : inputs) digests[in] = file_digest(in);
  j["inputs"] = digests;
  io::write_file((dir / "run.json").string(), j.dump(2) + "\n");
}

inline std::vector<std::string> toy_words(const std::vector<std::uint32_t>& tokens) {
  std::vector<std::string> out;
  for (auto t : tokens) out.push_back("w" + std::to_string(t));
  return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace detail

// Parses and runs one command line. `args` excludes the program name.
// Returns 0 on success, 1 on usage errors and 2 on data errors.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Hallucination detection from hidden-state spectral features", "hsad"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic or toy-transformer trace set");
  std::string synth_out, synth_classes = "two-tone";
  std::uint64_t synth_seed = 0;
  std::uint32_t synth_per_class = 100, synth_l = 4, synth_d = 16, synth_bin_a = 1, synth_bin_b = 0;
  std::uint32_t synth_m = 8, synth_n = 6, toy_heads = 2, toy_vocab = 64, toy_examples = 20;
  double synth_noise = 0.1, synth_offset = 1.0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--classes", synth_classes, "two-tone|toy")->capture_default_str();
  synth->add_option("--n-per-class", synth_per_class)->capture_default_str();
  synth->add_option("--noise", synth_noise, "gaussian noise std")->capture_default_str();
  synth->add_option("--offset", synth_offset, "per-dimension DC offset std")->capture_default_str();
  synth->add_option("--num-layers", synth_l, "layer count l")->capture_default_str();
  synth->add_option("--dim", synth_d, "hidden width d")->capture_default_str();
  synth->add_option("--bin-a", synth_bin_a, "class a frequency bin")->capture_default_str();
  synth->add_option("--bin-b", synth_bin_b, "class b frequency bin (0 = 2l)")->capture_default_str();
  synth->add_option("--question-len", synth_m, "question tokens per example")->capture_default_str();
  synth->add_option("--answer-len", synth_n, "answer tokens per example")->capture_default_str();
  synth->add_option("--heads", toy_heads, "toy model attention heads")->capture_default_str();
  synth->add_option("--vocab", toy_vocab, "toy model vocabulary")->capture_default_str();
  synth->add_option("--examples", toy_examples, "toy model example count")->capture_default_str();

  // features
  auto* features = app.add_subcommand("features", "traces -> feature file");
  std::string feat_traces, feat_out;
  detail::FeatureFlags feat_flags;
  features->add_option("--traces", feat_traces, "HSADTRC1 trace file")->required()->check(CLI::ExistingFile);
  features->add_option("--out", feat_out, "output directory")->required();
  feat_flags.add(features);

  // label
  auto* label = app.add_subcommand("label", "manifest + features -> labeled dataset");
  std::string lab_manifest, lab_features, lab_out;
  detail::LabelFlags lab_flags;
  label->add_option("--manifest", lab_manifest, "line-delimited manifest")->required()->check(CLI::ExistingFile);
  label->add_option("--features", lab_features, "HSADFEA1 feature file")->required()->check(CLI::ExistingFile);
  label->add_option("--out", lab_out, "output directory")->required();
  lab_flags.add(label);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the detector on the train split");
  std::string tr_labels, tr_features, tr_out;
  detail::DetectorFlags tr_det;
  detail::SplitFlags tr_split;
  train_cmd->add_option("--labels", tr_labels, "HSADLBL1 labeled dataset")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--features", tr_features, "optional HSADFEA1 file replacing the stored features")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr_out, "output directory")->required();
  tr_det.add(train_cmd);
  tr_split.add(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a split with a trained model -> EvalReport");
  std::string ev_model, ev_labels, ev_features, ev_out, ev_part = "test";
  detail::SplitFlags ev_split;
  eval_cmd->add_option("--model", ev_model, "HSADMDL1 model")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--labels", ev_labels, "HSADLBL1 labeled dataset")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--features", ev_features, "optional HSADFEA1 file replacing the stored features")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev_out, "output directory")->required();
  eval_cmd->add_option("--split", ev_part, "test|all")->capture_default_str();
  ev_split.add(eval_cmd);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run an ablation grid -> results table");
  std::string ab_traces, ab_manifest, ab_out, ab_mode, ab_grid;
  std::uint32_t ab_reps = 5;
  unsigned ab_threads = 0;
  detail::FeatureFlags ab_feat;
  detail::LabelFlags ab_label;
  detail::DetectorFlags ab_det;
  detail::SplitFlags ab_split;
  ablate->add_option("--traces", ab_traces)->required()->check(CLI::ExistingFile);
  ablate->add_option("--manifest", ab_manifest)->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", ab_out, "output directory")->required();
  ablate->add_option("--mode", ab_mode, "observation-points|layer-sampling|feature-source")->required();
  ablate->add_option("--grid", ab_grid, "layer counts for layer-sampling (default 1,2,4,..,l)");
  ablate->add_option("--reps", ab_reps, "seeds per layer count")->capture_default_str();
  ablate->add_option("--threads", ab_threads, "parallel cells (default $HSAD_THREADS or 1)");
  ab_feat.add(ablate);
  ab_label.add(ablate);
  ab_det.add(ablate);
  ab_split.add(ablate);

  // inspect
  auto* inspect = app.add_subcommand("inspect", "print the header of a trace/feature/label/model file");
  std::string insp_path;
  inspect->add_option("path", insp_path)->required()->check(CLI::ExistingFile);

  // replay
  auto* replay = app.add_subcommand("replay", "re-run a command from its run.json");
  std::string rp_manifest, rp_out;
  replay->add_option("--manifest", rp_manifest, "run.json of the original run")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", rp_out, "new output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      const auto dir = detail::prepare_out(synth_out);
      std::vector<ActivationTrace> traces;
      std::vector<ExampleMeta> metas;
      if (synth_classes == "two-tone") {
        toy::SyntheticSpec spec;
        spec.class_a_bin = synth_bin_a;
        spec.class_b_bin = synth_bin_b == 0 ? 2 * synth_l : synth_bin_b;
        spec.noise_std = synth_noise;
        spec.offset_std = synth_offset;
        spec.n_per_class = synth_per_class;
        spec.seed = synth_seed;
        spec.m = synth_m;
        spec.n = synth_n;
        auto data = toy::generate_synthetic_traces(spec, synth_d, synth_l);
        traces = std::move(data.traces);
        metas = std::move(data.metas);
      } else if (synth_classes == "toy") {
        // Prompts and references are random token strings; half of the
        // references copy the greedy answer so both labels occur under the
        // lexical scorer.
        toy::ToyConfig cfg{synth_l, synth_d, toy_heads, toy_vocab, synth_seed};
        Rng rng(derive_seed(synth_seed, 7));
        for (std::uint32_t e = 0; e < toy_examples; ++e) {
          std::vector<std::uint32_t> prompt(synth_m);
          for (auto& t : prompt) t = static_cast<std::uint32_t>(rng.below(toy_vocab));
          const std::string id = "toy-" + std::to_string(e);
          auto run = toy::run_toy_model(cfg, prompt, synth_n, true, id);
          ExampleMeta meta;
          meta.example_id = id;
          meta.question = detail::join_words(detail::toy_words(prompt));
          meta.generated_answer = detail::join_words(detail::toy_words(run.generated));
          if (e % 2 == 0) {
            meta.reference_answer = meta.generated_answer;
          } else {
            std::vector<std::uint32_t> ref(synth_n);
            for (auto& t : ref) t = static_cast<std::uint32_t>(rng.below(toy_vocab));
            meta.reference_answer = detail::join_words(detail::toy_words(ref));
          }
          traces.push_back(std::move(run.trace));
          metas.push_back(std::move(meta));
        }
      } else {
        err << "error: --classes must be two-tone or toy\n";
        return kExitUsage;
      }
      write_trace_file(traces, (dir / "traces.bin").string());
      write_manifest(metas, (dir / "manifest.jsonl").string());
      detail::write_run_manifest(dir, args, *synth, {}, synth_seed);
      out << "wrote " << traces.size() << " traces to " << (dir / "traces.bin").string() << "\n";
      return kExitOk;
    }

    if (features->parsed()) {
      const auto point = feat_flags.point();
      const auto source = feat_flags.feature_source();
      const auto traces = read_trace_file(feat_traces);
      if (traces.empty()) fail(ErrorCode::kMissingData, "trace file holds no traces");
      const auto ids = feat_flags.layer_ids(traces.front().l);
      const auto fs = compute_features(traces, point, ids, source);
      const auto dir = detail::prepare_out(feat_out);
      write_feature_file(fs, (dir / "features.bin").string());
      detail::write_run_manifest(dir, args, *features, {feat_traces}, feat_flags.seed);
      out << "wrote " << fs.size() << " feature vectors (d=" << fs.d << ", "
          << to_string(fs.source) << ", " << to_string(fs.observation) << ", "
          << fs.layer_count << " layers)\n";
      return kExitOk;
    }

    if (label->parsed()) {
      const auto cfg = lab_flags.config();
      const auto metas = read_manifest(lab_manifest);
      const auto fs = read_feature_file(lab_features);
      const auto result = label_dataset(metas, fs, cfg);
      for (const auto& w : result.warnings) err << "warning: " << w << "\n";
      const auto dir = detail::prepare_out(lab_out);
      write_labeled_file(result.data, (dir / "labels.bin").string());
      detail::write_run_manifest(dir, args, *label, {lab_manifest, lab_features}, 0);
      out << "labeled " << result.data.size() << " examples: " << result.data.positives()
          << " hallucinated, " << result.data.negatives() << " not (tau=" << cfg.tau << ")\n";
      return kExitOk;
    }

    auto load_labeled = [](const std::string& labels, const std::string& feats) {
      auto ds = read_labeled_file(labels);
      if (feats.empty()) return ds;
      const auto fs = read_feature_file(feats);
      std::map<std::string, std::size_t> by_id;
      for (std::size_t i = 0; i < fs.size(); ++i) by_id.emplace(fs.ids[i], i);
      ds.d = fs.d;
      ds.source = fs.source;
      ds.observation = fs.observation;
      ds.layer_count = fs.layer_count;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        auto it = by_id.find(ds.ids[i]);
        if (it == by_id.end()) {
          fail(ErrorCode::kMissingData, "example '" + ds.ids[i] + "' missing from feature file");
        }
        ds.features[i] = fs.features[it->second];
      }
      return ds;
    };

    if (train_cmd->parsed()) {
      const auto data = load_labeled(tr_labels, tr_features);
      auto cfg = tr_det.config();
      cfg.input_dim = data.d;
      const auto parts = split(data, tr_split.spec());
      cfg.validate();
      const auto result = train(init_model(cfg), parts.first, cfg);
      const auto dir = detail::prepare_out(tr_out);
      save_model(result.model, (dir / "model.bin").string());
      std::string losses = "epoch\tloss\n";
      for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu\t%.10g\n", e + 1, result.epoch_loss[e]);
        losses += buf;
      }
      io::write_file((dir / "losses.tsv").string(), losses);
      std::vector<std::string> inputs = {tr_labels};
      if (!tr_features.empty()) inputs.push_back(tr_features);
      detail::write_run_manifest(dir, args, *train_cmd, inputs, cfg.seed);
      out << "trained on " << parts.first.size() << " examples, final loss "
          << result.epoch_loss.back() << "\n";
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      const auto model = load_model(ev_model);
      const auto data = load_labeled(ev_labels, ev_features);
      if (ev_part != "test" && ev_part != "all") {
        err << "error: --split must be test or all\n";
        return kExitUsage;
      }
      const auto scored = ev_part == "all" ? data : split(data, ev_split.spec()).second;
      EvalReport report;
      try {
        const auto scores = score_dataset(model, scored);
        report.auroc = auroc(scores, scored.labels);
      } catch (const Error& e) {
        fail(e.code(), std::string("stage 'eval': ") + e.what());
      }
      report.n_pos = scored.positives();
      report.n_neg = scored.negatives();
      report.n_train = data.size() - scored.size();
      report.layer_count = data.layer_count;
      report.config.observation = data.observation;
      report.config.source = data.source;
      report.config.detector = model.config;
      report.config.split = ev_split.spec();
      auto j = to_json(report);
      j.erase("tau");
      j.erase("scorer");
      j.erase("layer_ids");
      j["split_part"] = ev_part;
      const auto dir = detail::prepare_out(ev_out);
      io::write_file((dir / "report.json").string(), j.dump(2) + "\n");
      std::vector<std::string> inputs = {ev_model, ev_labels};
      if (!ev_features.empty()) inputs.push_back(ev_features);
      detail::write_run_manifest(dir, args, *eval_cmd, inputs, ev_split.seed);
      out << "auroc " << hsad::detail::format_double(report.auroc) << " (" << report.n_pos << " pos / "
          << report.n_neg << " neg)\n";
      return kExitOk;
    }

    if (ablate->parsed()) {
      const auto mode = parse_ablation_mode(ab_mode);
      if (!mode) {
        err << "error: unknown --mode '" << ab_mode << "'\n" << ablate->help();
        return kExitUsage;
      }
      const auto traces = read_trace_file(ab_traces);
      const auto metas = read_manifest(ab_manifest);
      if (traces.empty()) fail(ErrorCode::kMissingData, "trace file holds no traces");
      PipelineConfig base;
      base.observation = ab_feat.point();
      base.source = ab_feat.feature_source();
      base.layer_ids = ab_feat.layer_ids(traces.front().l);
      base.label = ab_label.config();
      base.detector = ab_det.config();
      base.split = ab_split.spec();
      AblationOptions opts;
      if (!ab_grid.empty()) opts.layer_grid = detail::parse_u32_list(ab_grid, "--grid");
      opts.seeds_per_count = ab_reps;
      opts.layer_seed = ab_feat.seed;
      opts.sampling = ab_feat.strided ? LayerSampling::kStrided : LayerSampling::kRandom;
      opts.threads = ab_threads;
      if (opts.threads == 0) {
        const char* env = std::getenv("HSAD_THREADS");
        opts.threads = env != nullptr ? static_cast<unsigned>(std::strtoul(env, nullptr, 10)) : 1;
      }
      const auto table = run_ablation(traces, metas, *mode, base, opts);
      const auto dir = detail::prepare_out(ab_out);
      io::write_file((dir / "results.tsv").string(), results_tsv(table));
      const auto summary = results_summary(table);
      io::write_file((dir / "summary.txt").string(), summary);
      detail::write_run_manifest(dir, args, *ablate, {ab_traces, ab_manifest}, ab_det.seed);
      out << summary;
      return kExitOk;
    }

    if (inspect->parsed()) {
      const auto bytes = io::read_file(insp_path);
      const std::string magic = bytes.substr(0, 8);
      if (magic == kTraceMagic) {
        const auto traces = decode_traces(bytes);
        out << "HSADTRC1 trace file, " << traces.size() << " traces\n";
        for (const auto& t : traces) {
          out << "  " << t.example_id << " model=" << t.model_name << " l=" << t.l << " d=" << t.d
              << " m=" << t.m << " n=" << t.n << " captures=" << t.captures.size() << "\n";
        }
      } else if (magic == kFeatureMagic) {
        const auto fs = decode_features(bytes);
        out << "HSADFEA1 feature file, " << fs.size() << " examples, d=" << fs.d
            << ", source=" << to_string(fs.source) << ", observation=" << to_string(fs.observation)
            << ", layer_count=" << fs.layer_count << "\n";
      } else if (magic == kLabelMagic) {
        const auto ds = decode_labeled(bytes);
        out << "HSADLBL1 labeled dataset, " << ds.size() << " examples, d=" << ds.d << ", "
            << ds.positives() << " positive / " << ds.negatives() << " negative, source="
            << to_string(ds.source) << ", observation=" << to_string(ds.observation)
            << ", layer_count=" << ds.layer_count << "\n";
      } else if (magic == kModelMagic) {
        const auto model = decode_model(bytes);
        out << "HSADMDL1 detector model\n" << detector_config_json(model.config).dump(2) << "\n";
      } else {
        std::istringstream in(bytes);
        const auto metas = parse_manifest(in);
        out << "manifest, " << metas.size() << " records\n";
      }
      return kExitOk;
    }

    if (replay->parsed()) {
      const auto j = nlohmann::json::parse(io::read_file(rp_manifest));
      for (const auto& [path, digest] : j.at("inputs").items()) {
        if (file_digest(path) != digest.get<std::string>()) {
          fail(ErrorCode::kMissingData, "input '" + path + "' changed since the recorded run");
        }
      }
      auto replay_args = j.at("args").get<std::vector<std::string>>();
      bool replaced = false;
      for (std::size_t i = 0; i + 1 < replay_args.size(); ++i) {
        if (replay_args[i] == "--out") {
          replay_args[i + 1] = rp_out;
          replaced = true;
        }
      }
      if (!replaced) fail(ErrorCode::kParse, "run manifest has no --out argument");
      return dispatch(replay_args, out, err);
    }
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace hsad::cli
