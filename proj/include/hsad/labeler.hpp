#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hsad/binary_io.hpp"
#include "hsad/error.hpp"
#include "hsad/manifest.hpp"
#include "hsad/spectral.hpp"

namespace hsad {

enum class Scorer { kExternal, kLexical };

inline std::optional<Scorer> parse_scorer(std::string_view s) {
  if (s == "external") return Scorer::kExternal;
  if (s == "lexical") return Scorer::kLexical;
  return std::nullopt;
}

inline std::string_view to_string(Scorer s) {
  return s == Scorer::kExternal ? "external" : "lexical";
}

struct LabelConfig {
  double tau = 0.5;
  Scorer scorer = Scorer::kExternal;

  void validate() const {
    require(std::isfinite(tau), ErrorCode::kInvalidArgument, "label config: tau not finite");
    if (scorer == Scorer::kLexical) {
      require(tau >= 0.0 && tau <= 1.0, ErrorCode::kInvalidArgument,
              "label config: lexical scorer needs tau in [0, 1]");
    }
  }
};

// 1 marks a hallucination: similarity at or below the threshold.
inline int judge(double sim_score, double tau) {
  require(std::isfinite(sim_score) && std::isfinite(tau), ErrorCode::kInvalidArgument,
          "judge: non-finite input");
  return sim_score <= tau ? 1 : 0;
}

namespace detail {

inline std::vector<std::string> normalized_tokens(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c)) continue;
    clean.push_back(static_cast<char>(std::tolower(c)));
  }
  std::istringstream in(clean);
  std::vector<std::string> tokens;
  for (std::string tok; in >> tok;) tokens.push_back(tok);
  return tokens;
}

}  // namespace detail

// Unigram token F1 after lowercasing and punctuation stripping.
inline double lexical_similarity(std::string_view answer, std::string_view reference) {
  const auto a = detail::normalized_tokens(answer);
  const auto r = detail::normalized_tokens(reference);
  require(!a.empty() && !r.empty(), ErrorCode::kInvalidArgument,
          "lexical_similarity: empty text after normalization");
  std::map<std::string, int> counts;
  for (const auto& t : r) ++counts[t];
  int overlap = 0;
  for (const auto& t : a) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = double(overlap) / double(a.size());
  const double recall = double(overlap) / double(r.size());
  return 2.0 * precision * recall / (precision + recall);
}

// Feature vectors with binary labels, as stored in "HSADLBL1" files.
struct LabeledDataset {
  std::uint32_t d = 0;
  FeatureSource source = FeatureSource::kFftMaxNonDc;
  ObservationPoint observation = ObservationPoint::kAEnd;
  std::uint32_t layer_count = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> features;
  std::vector<int> labels;

  std::size_t size() const { return ids.size(); }
  std::size_t positives() const {
    std::size_t n = 0;
    for (int y : labels) n += (y == 1);
    return n;
  }
  std::size_t negatives() const { return size() - positives(); }

  LabeledDataset subset(const std::vector<std::size_t>& idx) const {
    LabeledDataset out;
    out.d = d;
    out.source = source;
    out.observation = observation;
    out.layer_count = layer_count;
    for (auto i : idx) {
      out.ids.push_back(ids[i]);
      out.features.push_back(features[i]);
      out.labels.push_back(labels[i]);
    }
    return out;
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

struct LabelResult {
  LabeledDataset data;
  std::vector<std::string> warnings;
};

inline LabelResult label_dataset(const std::vector<ExampleMeta>& metas, const FeatureSet& features,
                                 const LabelConfig& cfg) {
  cfg.validate();
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < features.size(); ++i) by_id.emplace(features.ids[i], i);

  LabelResult out;
  out.data.d = features.d;
  out.data.source = features.source;
  out.data.observation = features.observation;
  out.data.layer_count = features.layer_count;
  for (const auto& meta : metas) {
    auto it = by_id.find(meta.example_id);
    if (it == by_id.end()) {
      fail(ErrorCode::kMissingData, "example '" + meta.example_id + "' has no feature vector");
    }
    double score = 0.0;
    if (cfg.scorer == Scorer::kExternal) {
      if (!meta.similarity_score) {
        fail(ErrorCode::kMissingData, "example '" + meta.example_id + "' has no similarity_score");
      }
      score = *meta.similarity_score;
    } else {
      try {
        score = lexical_similarity(meta.generated_answer, meta.reference_answer);
      } catch (const Error& e) {
        fail(ErrorCode::kMissingData, "example '" + meta.example_id + "': " + e.what());
      }
    }
    const int label = judge(score, cfg.tau);
    if (meta.label && *meta.label != label) {
      out.warnings.push_back("example '" + meta.example_id + "': preset label " +
                             std::to_string(*meta.label) + " ignored, score gives " +
                             std::to_string(label));
    } else if (meta.label) {
      out.warnings.push_back("example '" + meta.example_id + "': preset label ignored");
    }
    out.data.ids.push_back(meta.example_id);
    out.data.features.push_back(features.features[it->second]);
    out.data.labels.push_back(label);
  }
  return out;
}

inline constexpr std::string_view kLabelMagic = "HSADLBL1";
inline constexpr std::uint32_t kLabelVersion = 1;

inline std::string encode_labeled(const LabeledDataset& ds) {
  io::ByteWriter w;
  w.bytes(kLabelMagic);
  w.u32(kLabelVersion);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(ds.d);
  w.u8(static_cast<std::uint8_t>(ds.source));
  w.u8(static_cast<std::uint8_t>(ds.observation));
  w.u32(ds.layer_count);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    require(ds.features[i].size() == ds.d, ErrorCode::kInvariantViolation,
            "labeled dataset: example '" + ds.ids[i] + "' has wrong width");
    require(ds.labels[i] == 0 || ds.labels[i] == 1, ErrorCode::kInvariantViolation,
            "labeled dataset: label must be 0 or 1");
    w.str(ds.ids[i]);
    w.u8(static_cast<std::uint8_t>(ds.labels[i]));
    for (double v : ds.features[i]) w.f64(v);
  }
  return w.data();
}

inline LabeledDataset decode_labeled(std::string_view bytes) {
  io::ByteReader r(bytes);
  io::expect_header(r, kLabelMagic, kLabelVersion, "label file");
  LabeledDataset ds;
  const auto count = r.u32();
  ds.d = r.u32();
  const auto source = r.u8();
  const auto obs = r.u8();
  require(source <= 1, ErrorCode::kParse, "label file: unknown source tag");
  require(obs < kAllObservationPoints.size(), ErrorCode::kParse,
          "label file: unknown observation tag");
  ds.source = static_cast<FeatureSource>(source);
  ds.observation = static_cast<ObservationPoint>(obs);
  ds.layer_count = r.u32();
  require(std::uint64_t(count) * (5 + 8ULL * ds.d) <= r.remaining(), ErrorCode::kTruncated,
          "label file: truncated payload");
  for (std::uint32_t i = 0; i < count; ++i) {
    ds.ids.push_back(r.str());
    const auto y = r.u8();
    require(y <= 1, ErrorCode::kParse, "label file: label byte must be 0 or 1");
    ds.labels.push_back(y);
    std::vector<double> f(ds.d);
    for (auto& v : f) v = r.f64();
    ds.features.push_back(std::move(f));
  }
  require(r.at_end(), ErrorCode::kShapeMismatch, "label file: trailing bytes");
  return ds;
}

inline void write_labeled_file(const LabeledDataset& ds, const std::string& path) {
  io::write_file(path, encode_labeled(ds));
}

inline LabeledDataset read_labeled_file(const std::string& path) {
  return decode_labeled(io::read_file(path));
}

}  // namespace hsad
