#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hsad/binary_io.hpp"
#include "hsad/error.hpp"

namespace hsad {

// The four node vectors sampled from one decoder layer for one token:
// attention output, post-attention residual, MLP output and layer output.
struct NodeVectors {
  std::vector<float> ah;
  std::vector<float> rh;
  std::vector<float> mh;
  std::vector<float> h;

  std::size_t dim() const { return ah.size(); }

  friend bool operator==(const NodeVectors&, const NodeVectors&) = default;
};

enum class TokenRole : std::uint8_t { kQuestion = 0, kAnswer = 1 };

struct PositionCapture {
  std::uint32_t token_index = 0;  // 0-based over question tokens then answer tokens
  TokenRole role = TokenRole::kQuestion;
  std::vector<NodeVectors> layers;  // layer 1 first

  friend bool operator==(const PositionCapture&, const PositionCapture&) = default;
};

struct ActivationTrace {
  std::string example_id;
  std::string model_name;
  std::uint32_t l = 0;  // layers
  std::uint32_t d = 0;  // hidden width
  std::uint32_t m = 0;  // question tokens
  std::uint32_t n = 0;  // answer tokens
  std::vector<PositionCapture> captures;  // sorted by token_index

  // Returns nullptr when the position was not captured.
  const PositionCapture* find_capture(std::uint32_t token_index) const {
    std::size_t lo = 0, hi = captures.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (captures[mid].token_index < token_index) lo = mid + 1; else hi = mid;
    }
    if (lo < captures.size() && captures[lo].token_index == token_index) return &captures[lo];
    return nullptr;
  }

  friend bool operator==(const ActivationTrace&, const ActivationTrace&) = default;
};

namespace detail {

inline void check_vector(const std::vector<float>& v, std::uint32_t d, const std::string& where,
                         ErrorCode shape_code) {
  require(v.size() == d, shape_code,
          where + ": vector length " + std::to_string(v.size()) + " != d=" + std::to_string(d));
  for (float x : v) {
    require(std::isfinite(x), ErrorCode::kInvariantViolation, where + ": non-finite entry");
  }
}

}  // namespace detail

// Throws Error on the first violated invariant. `shape_code` lets the reader
// report shape problems as kShapeMismatch while the writer reports them as
// plain invariant violations.
inline void validate(const ActivationTrace& t,
                     ErrorCode shape_code = ErrorCode::kInvariantViolation) {
  const std::string id = "trace '" + t.example_id + "'";
  require(t.l >= 1 && t.d >= 1 && t.m >= 1 && t.n >= 1, ErrorCode::kInvariantViolation,
          id + ": l, d, m, n must all be >= 1");
  for (std::size_t c = 0; c < t.captures.size(); ++c) {
    const auto& cap = t.captures[c];
    const std::string where = id + " capture@" + std::to_string(cap.token_index);
    if (c > 0) {
      require(t.captures[c - 1].token_index < cap.token_index, ErrorCode::kInvariantViolation,
              where + ": captures not strictly sorted by token_index");
    }
    require(cap.token_index < t.m + t.n, ErrorCode::kInvariantViolation,
            where + ": token_index beyond m+n");
    const bool is_question = cap.token_index < t.m;
    require(is_question == (cap.role == TokenRole::kQuestion), ErrorCode::kInvariantViolation,
            where + ": role disagrees with token_index vs m");
    require(cap.layers.size() == t.l, shape_code,
            where + ": " + std::to_string(cap.layers.size()) + " layers, header says " +
                std::to_string(t.l));
    for (std::size_t j = 0; j < cap.layers.size(); ++j) {
      const auto& nv = cap.layers[j];
      const std::string lw = where + " layer " + std::to_string(j + 1);
      detail::check_vector(nv.ah, t.d, lw + " ah", shape_code);
      detail::check_vector(nv.rh, t.d, lw + " rh", shape_code);
      detail::check_vector(nv.mh, t.d, lw + " mh", shape_code);
      detail::check_vector(nv.h, t.d, lw + " h", shape_code);
    }
  }
}

inline constexpr std::string_view kTraceMagic = "HSADTRC1";
inline constexpr std::uint32_t kTraceVersion = 1;

inline std::string encode_traces(const std::vector<ActivationTrace>& traces) {
  for (const auto& t : traces) validate(t);
  io::ByteWriter w;
  w.bytes(kTraceMagic);
  w.u32(kTraceVersion);
  w.u32(static_cast<std::uint32_t>(traces.size()));
  for (const auto& t : traces) {
    w.str(t.example_id);
    w.str(t.model_name);
    w.u32(t.l);
    w.u32(t.d);
    w.u32(t.m);
    w.u32(t.n);
    w.u32(static_cast<std::uint32_t>(t.captures.size()));
    for (const auto& cap : t.captures) {
      w.u32(cap.token_index);
      w.u8(static_cast<std::uint8_t>(cap.role));
      for (const auto& nv : cap.layers) {
        for (const auto* v : {&nv.ah, &nv.rh, &nv.mh, &nv.h}) {
          for (float x : *v) w.f32(x);
        }
      }
    }
  }
  return w.data();
}

inline std::vector<ActivationTrace> decode_traces(std::string_view bytes) {
  io::ByteReader r(bytes);
  io::expect_header(r, kTraceMagic, kTraceVersion, "trace file");
  const auto count = r.u32();
  std::vector<ActivationTrace> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    ActivationTrace t;
    t.example_id = r.str();
    t.model_name = r.str();
    t.l = r.u32();
    t.d = r.u32();
    t.m = r.u32();
    t.n = r.u32();
    const auto ncap = r.u32();
    require(t.l >= 1 && t.d >= 1, ErrorCode::kShapeMismatch,
            "trace '" + t.example_id + "': l and d must be >= 1");
    // Reject impossible counts before allocating.
    const std::uint64_t per_capture = 5 + std::uint64_t(t.l) * 4 * t.d * 4;
    if (std::uint64_t(ncap) * per_capture > r.remaining()) {
      fail(ErrorCode::kTruncated, "trace '" + t.example_id + "': truncated payload, " +
                                      std::to_string(ncap) + " captures do not fit");
    }
    t.captures.resize(ncap);
    for (auto& cap : t.captures) {
      cap.token_index = r.u32();
      const auto role = r.u8();
      require(role <= 1, ErrorCode::kParse,
              "trace '" + t.example_id + "': unknown role byte " + std::to_string(role));
      cap.role = static_cast<TokenRole>(role);
      cap.layers.resize(t.l);
      for (auto& nv : cap.layers) {
        for (auto* v : {&nv.ah, &nv.rh, &nv.mh, &nv.h}) {
          v->resize(t.d);
          for (auto& x : *v) x = r.f32();
        }
      }
    }
    validate(t, ErrorCode::kShapeMismatch);
    out.push_back(std::move(t));
  }
  if (!r.at_end()) {
    fail(ErrorCode::kShapeMismatch,
         "trace file: " + std::to_string(r.remaining()) + " trailing bytes after last trace");
  }
  return out;
}

inline void write_trace_file(const std::vector<ActivationTrace>& traces, const std::string& path) {
  io::write_file(path, encode_traces(traces));
}

inline std::vector<ActivationTrace> read_trace_file(const std::string& path) {
  return decode_traces(io::read_file(path));
}

}  // namespace hsad
