#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsad/binary_io.hpp"
#include "hsad/error.hpp"
#include "hsad/fft.hpp"
#include "hsad/signal.hpp"

namespace hsad {

// Magnitudes of DFT bins 0..floor(N/2) of a real signal of length N.
struct AmplitudeSpectrum {
  std::vector<double> amplitudes;
  std::size_t n = 0;
};

inline AmplitudeSpectrum amplitude_spectrum(std::span<const double> x) {
  require(x.size() >= 2, ErrorCode::kInvalidArgument,
          "amplitude_spectrum: signal length " + std::to_string(x.size()) + " < 2");
  for (double v : x) {
    require(std::isfinite(v), ErrorCode::kInvalidArgument, "amplitude_spectrum: non-finite sample");
  }
  const auto bins = fft::forward_real(x);
  AmplitudeSpectrum out;
  out.n = x.size();
  out.amplitudes.resize(x.size() / 2 + 1);
  for (std::size_t k = 0; k < out.amplitudes.size(); ++k) out.amplitudes[k] = std::abs(bins[k]);
  return out;
}

struct SpectralPeak {
  std::size_t bin = 0;
  double amplitude = 0.0;
};

// Largest amplitude among bins 1..floor(N/2); ties go to the lowest bin.
inline SpectralPeak strongest_non_dc(const AmplitudeSpectrum& spec) {
  require(spec.amplitudes.size() >= 2, ErrorCode::kInvalidArgument,
          "strongest_non_dc: spectrum needs at least 2 bins");
  SpectralPeak best{1, spec.amplitudes[1]};
  for (std::size_t k = 2; k < spec.amplitudes.size(); ++k) {
    if (spec.amplitudes[k] > best.amplitude) best = {k, spec.amplitudes[k]};
  }
  return best;
}

enum class FeatureSource : std::uint8_t { kFftMaxNonDc = 0, kTimeMax = 1 };

inline std::string_view to_string(FeatureSource s) {
  return s == FeatureSource::kFftMaxNonDc ? "fft_max_non_dc" : "time_max";
}

inline std::optional<FeatureSource> parse_feature_source(std::string_view s) {
  if (s == "fft" || s == "fft_max_non_dc") return FeatureSource::kFftMaxNonDc;
  if (s == "time-max" || s == "time_max") return FeatureSource::kTimeMax;
  return std::nullopt;
}

struct SpectralFeature {
  std::vector<double> f;
  FeatureSource source = FeatureSource::kFftMaxNonDc;
  ObservationPoint observation = ObservationPoint::kAEnd;
  std::uint32_t layer_count = 0;
  std::vector<std::size_t> peak_bins;  // diagnostics only, fft source
};

inline SpectralFeature extract_spectral_features(const SignalMatrix& t) {
  require(t.rows >= 2, ErrorCode::kInvalidArgument,
          "extract_spectral_features: need at least 2 rows");
  SpectralFeature out;
  out.source = FeatureSource::kFftMaxNonDc;
  out.observation = t.observation;
  out.layer_count = static_cast<std::uint32_t>(t.layer_ids.size());
  out.f.resize(t.cols);
  out.peak_bins.resize(t.cols);
  for (std::size_t c = 0; c < t.cols; ++c) {
    const auto col = t.column(c);
    const auto peak = strongest_non_dc(amplitude_spectrum(col));
    out.f[c] = peak.amplitude;
    out.peak_bins[c] = peak.bin;
  }
  return out;
}

// Time-domain baseline: per-dimension maximum over the signal.
inline SpectralFeature time_max_features(const SignalMatrix& t) {
  require(t.rows >= 1, ErrorCode::kInvalidArgument, "time_max_features: empty matrix");
  SpectralFeature out;
  out.source = FeatureSource::kTimeMax;
  out.observation = t.observation;
  out.layer_count = static_cast<std::uint32_t>(t.layer_ids.size());
  out.f.resize(t.cols);
  for (std::size_t c = 0; c < t.cols; ++c) {
    double mx = t(0, c);
    for (std::size_t r = 1; r < t.rows; ++r) mx = std::max(mx, t(r, c));
    out.f[c] = mx;
  }
  return out;
}

inline SpectralFeature extract_features(const SignalMatrix& t, FeatureSource source) {
  return source == FeatureSource::kFftMaxNonDc ? extract_spectral_features(t)
                                               : time_max_features(t);
}

// A dataset of feature vectors sharing one source, observation point and
// layer count, as stored in "HSADFEA1" files.
struct FeatureSet {
  std::uint32_t d = 0;
  FeatureSource source = FeatureSource::kFftMaxNonDc;
  ObservationPoint observation = ObservationPoint::kAEnd;
  std::uint32_t layer_count = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> features;

  std::size_t size() const { return ids.size(); }

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

inline constexpr std::string_view kFeatureMagic = "HSADFEA1";
inline constexpr std::uint32_t kFeatureVersion = 1;

inline std::string encode_features(const FeatureSet& fs) {
  require(fs.ids.size() == fs.features.size(), ErrorCode::kInvariantViolation,
          "feature set: id/feature count mismatch");
  io::ByteWriter w;
  w.bytes(kFeatureMagic);
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(fs.size()));
  w.u32(fs.d);
  w.u8(static_cast<std::uint8_t>(fs.source));
  w.u8(static_cast<std::uint8_t>(fs.observation));
  w.u32(fs.layer_count);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    require(fs.features[i].size() == fs.d, ErrorCode::kInvariantViolation,
            "feature set: example '" + fs.ids[i] + "' has wrong width");
    w.str(fs.ids[i]);
    for (double v : fs.features[i]) {
      require(std::isfinite(v), ErrorCode::kInvariantViolation,
              "feature set: example '" + fs.ids[i] + "' has non-finite entry");
      w.f64(v);
    }
  }
  return w.data();
}

inline FeatureSet decode_features(std::string_view bytes) {
  io::ByteReader r(bytes);
  io::expect_header(r, kFeatureMagic, kFeatureVersion, "feature file");
  FeatureSet fs;
  const auto count = r.u32();
  fs.d = r.u32();
  const auto source = r.u8();
  const auto obs = r.u8();
  require(source <= 1, ErrorCode::kParse, "feature file: unknown source tag");
  require(obs < kAllObservationPoints.size(), ErrorCode::kParse,
          "feature file: unknown observation tag");
  fs.source = static_cast<FeatureSource>(source);
  fs.observation = static_cast<ObservationPoint>(obs);
  fs.layer_count = r.u32();
  require(std::uint64_t(count) * (4 + 8ULL * fs.d) <= r.remaining(), ErrorCode::kTruncated,
          "feature file: truncated payload");
  for (std::uint32_t i = 0; i < count; ++i) {
    fs.ids.push_back(r.str());
    std::vector<double> f(fs.d);
    for (auto& v : f) v = r.f64();
    fs.features.push_back(std::move(f));
  }
  require(r.at_end(), ErrorCode::kShapeMismatch, "feature file: trailing bytes");
  return fs;
}

inline void write_feature_file(const FeatureSet& fs, const std::string& path) {
  io::write_file(path, encode_features(fs));
}

inline FeatureSet read_feature_file(const std::string& path) {
  return decode_features(io::read_file(path));
}

}  // namespace hsad
