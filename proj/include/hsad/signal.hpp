#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hsad/error.hpp"
#include "hsad/rng.hpp"
#include "hsad/trace.hpp"

namespace hsad {

enum class ObservationPoint : std::uint8_t { kQStart, kQMid, kQEnd, kAStart, kAMid, kAEnd };

inline constexpr std::array<ObservationPoint, 6> kAllObservationPoints = {
    ObservationPoint::kQStart, ObservationPoint::kQMid, ObservationPoint::kQEnd,
    ObservationPoint::kAStart, ObservationPoint::kAMid, ObservationPoint::kAEnd};

// Tags use underscores in files and reports ("a_end"); the CLI spells them
// with dashes ("a-end"). Both are accepted when parsing.
inline std::string_view to_string(ObservationPoint p) {
  switch (p) {
    case ObservationPoint::kQStart: return "q_start";
    case ObservationPoint::kQMid: return "q_mid";
    case ObservationPoint::kQEnd: return "q_end";
    case ObservationPoint::kAStart: return "a_start";
    case ObservationPoint::kAMid: return "a_mid";
    case ObservationPoint::kAEnd: return "a_end";
  }
  return "?";
}

inline std::optional<ObservationPoint> parse_observation_point(std::string_view s) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '-', '_');
  for (auto p : kAllObservationPoints) {
    if (to_string(p) == norm) return p;
  }
  return std::nullopt;
}

inline std::uint32_t select_observation_index(std::uint32_t m, std::uint32_t n,
                                              ObservationPoint point) {
  require(m >= 1 && n >= 1, ErrorCode::kInvalidArgument, "select_observation_index: m, n >= 1");
  switch (point) {
    case ObservationPoint::kQStart: return 0;
    case ObservationPoint::kQMid: return (m - 1) / 2;
    case ObservationPoint::kQEnd: return m - 1;
    case ObservationPoint::kAStart: return m;
    case ObservationPoint::kAMid: return m + (n - 1) / 2;
    case ObservationPoint::kAEnd: return m + n - 1;
  }
  return 0;
}

// Row-major (4 * layer count) x d matrix. Column i is the temporal signal of
// hidden dimension i.
struct SignalMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<std::uint32_t> layer_ids;  // layers in the order the blocks appear
  ObservationPoint observation = ObservationPoint::kAEnd;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = values[r * cols + c];
    return out;
  }
};

// Stacks layer blocks from the deepest selected layer down to the shallowest;
// each block holds rows h, mh, rh, ah.
inline SignalMatrix build_signal_matrix(const ActivationTrace& trace, ObservationPoint point,
                                        std::vector<std::uint32_t> layer_ids) {
  require(!layer_ids.empty(), ErrorCode::kInvalidArgument, "build_signal_matrix: empty layer_ids");
  std::sort(layer_ids.begin(), layer_ids.end(), std::greater<>());
  require(std::adjacent_find(layer_ids.begin(), layer_ids.end()) == layer_ids.end(),
          ErrorCode::kInvalidArgument, "build_signal_matrix: duplicate layer ids");
  for (auto id : layer_ids) {
    require(id >= 1 && id <= trace.l, ErrorCode::kInvalidArgument,
            "build_signal_matrix: layer id " + std::to_string(id) + " outside 1.." +
                std::to_string(trace.l));
  }
  const auto index = select_observation_index(trace.m, trace.n, point);
  const auto* cap = trace.find_capture(index);
  if (cap == nullptr) {
    fail(ErrorCode::kMissingCapture, "observation point not captured: trace '" +
                                         trace.example_id + "' has no capture at token " +
                                         std::to_string(index) + " (" +
                                         std::string(to_string(point)) + ")");
  }

  SignalMatrix out;
  out.rows = 4 * layer_ids.size();
  out.cols = trace.d;
  out.values.resize(out.rows * out.cols);
  out.layer_ids = layer_ids;
  out.observation = point;
  std::size_t row = 0;
  for (auto id : layer_ids) {
    const auto& nv = cap->layers[id - 1];
    for (const auto* v : {&nv.h, &nv.mh, &nv.rh, &nv.ah}) {
      std::copy(v->begin(), v->end(), out.values.begin() + static_cast<std::ptrdiff_t>(row * out.cols));
      ++row;
    }
  }
  return out;
}

inline std::vector<std::uint32_t> all_layers(std::uint32_t l) {
  std::vector<std::uint32_t> ids(l);
  for (std::uint32_t j = 0; j < l; ++j) ids[j] = j + 1;
  return ids;
}

enum class LayerSampling { kRandom, kStrided };

// `count` distinct 1-based layer ids, sorted ascending. Random selection is a
// seeded partial Fisher-Yates; strided selection spreads ids evenly and
// ignores the seed.
inline std::vector<std::uint32_t> subsample_layers(std::uint32_t l, std::uint32_t count,
                                                   std::uint64_t seed,
                                                   LayerSampling scheme = LayerSampling::kRandom) {
  require(count >= 1 && count <= l, ErrorCode::kInvalidArgument,
          "subsample_layers: count " + std::to_string(count) + " not in [1, " +
              std::to_string(l) + "]");
  std::vector<std::uint32_t> ids;
  if (scheme == LayerSampling::kStrided) {
    for (std::uint32_t i = 0; i < count; ++i) {
      ids.push_back(1 + static_cast<std::uint32_t>((std::uint64_t(i) * l) / count));
    }
    return ids;
  }
  auto pool = all_layers(l);
  Rng rng(seed);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::uint32_t>(rng.below(l - i));
    std::swap(pool[i], pool[j]);
  }
  ids.assign(pool.begin(), pool.begin() + count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace hsad
