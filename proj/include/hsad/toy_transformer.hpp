#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hsad/error.hpp"
#include "hsad/manifest.hpp"
#include "hsad/rng.hpp"
#include "hsad/trace.hpp"

namespace hsad::toy {

struct ToyConfig {
  std::uint32_t l = 4;
  std::uint32_t d = 16;
  std::uint32_t n_heads = 2;
  std::uint32_t vocab = 64;
  std::uint64_t seed = 0;

  void validate() const {
    require(l >= 1 && d >= 1 && n_heads >= 1 && vocab >= 1, ErrorCode::kInvalidArgument,
            "toy config: all sizes must be >= 1");
    require(d % n_heads == 0, ErrorCode::kInvalidArgument, "toy config: n_heads must divide d");
  }
};

using Vec = std::vector<double>;

// Node vectors at full precision, as computed.
struct LayerRecord {
  Vec ah, rh, mh, h;
  Vec h_prev;                      // residual stream entering the layer
  std::vector<Vec> attention;      // per head, weights over positions 0..p
};

struct StepRecord {
  std::uint32_t position = 0;
  std::vector<LayerRecord> layers;
  Vec logits;
};

namespace detail {

struct Dense {
  std::size_t out = 0, in = 0;
  std::vector<double> w;  // out x in
  Vec b;

  Dense() = default;
  Dense(std::size_t o, std::size_t i, Rng& rng, bool with_bias) : out(o), in(i), w(o * i), b(o, 0.0) {
    const double bound = 1.0 / std::sqrt(double(i));
    for (auto& x : w) x = rng.uniform(-bound, bound);
    if (with_bias) {
      for (auto& x : b) x = rng.uniform(-bound, bound);
    }
  }

  Vec operator()(const Vec& x) const {
    Vec y(b);
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < in; ++i) s += w[o * in + i] * x[i];
      y[o] += s;
    }
    return y;
  }
};

inline Vec rms_norm(const Vec& x) {
  double ss = 0.0;
  for (double v : x) ss += v * v;
  const double inv = 1.0 / std::sqrt(ss / double(x.size()) + 1e-6);
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * inv;
  return y;
}

inline double gelu(double x) {
  const double c = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

inline Vec add(const Vec& a, const Vec& b) {
  Vec y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

struct Block {
  Dense wq, wk, wv, wo, up, down;
};

}  // namespace detail

// Decoder-only transformer with seeded random weights: pre-norm (RMS) causal
// multi-head attention and GELU MLP sub-layers, each added into the residual
// stream. Per layer: ah = attention output, rh = h_prev + ah,
// mh = MLP(rh), h = rh + mh.
class ToyTransformer {
 public:
  explicit ToyTransformer(const ToyConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t d = cfg.d;
    embedding_.resize(std::size_t(cfg.vocab) * d);
    for (auto& x : embedding_) x = rng.uniform(-1.0, 1.0);
    for (std::uint32_t j = 0; j < cfg.l; ++j) {
      detail::Block blk;
      blk.wq = detail::Dense(d, d, rng, false);
      blk.wk = detail::Dense(d, d, rng, false);
      blk.wv = detail::Dense(d, d, rng, false);
      blk.wo = detail::Dense(d, d, rng, false);
      blk.up = detail::Dense(4 * d, d, rng, true);
      blk.down = detail::Dense(d, 4 * d, rng, true);
      blocks_.push_back(std::move(blk));
    }
    unembed_ = detail::Dense(cfg.vocab, d, rng, false);
  }

  const ToyConfig& config() const { return cfg_; }

  Vec embed(std::uint32_t token, std::uint32_t position) const {
    require(token < cfg_.vocab, ErrorCode::kInvalidArgument,
            "toy model: token " + std::to_string(token) + " out of vocab " +
                std::to_string(cfg_.vocab));
    Vec x(embedding_.begin() + std::ptrdiff_t(token) * cfg_.d,
          embedding_.begin() + std::ptrdiff_t(token + 1) * cfg_.d);
    for (std::uint32_t i = 0; i < cfg_.d; i += 2) {
      const double freq = std::pow(10000.0, -double(i) / double(cfg_.d));
      x[i] += std::sin(position * freq);
      if (i + 1 < cfg_.d) x[i + 1] += std::cos(position * freq);
    }
    return x;
  }

  // Incremental decoding state: keys and values of every processed position.
  struct KvCache {
    std::vector<std::vector<Vec>> keys;    // [layer][position]
    std::vector<std::vector<Vec>> values;
  };

  KvCache make_cache() const {
    KvCache c;
    c.keys.resize(cfg_.l);
    c.values.resize(cfg_.l);
    return c;
  }

  // Processes one token at the next position, appending to the cache.
  StepRecord step(std::uint32_t token, KvCache& cache) const {
    const auto position = static_cast<std::uint32_t>(cache.keys.front().size());
    StepRecord rec;
    rec.position = position;
    Vec h = embed(token, position);
    for (std::uint32_t j = 0; j < cfg_.l; ++j) {
      const auto& blk = blocks_[j];
      LayerRecord lr;
      lr.h_prev = h;
      const Vec x = detail::rms_norm(h);
      cache.keys[j].push_back(blk.wk(x));
      cache.values[j].push_back(blk.wv(x));
      const Vec q = blk.wq(x);
      lr.ah = blk.wo(attend(q, cache.keys[j], cache.values[j], &lr.attention));
      lr.rh = detail::add(h, lr.ah);
      lr.mh = mlp(blk, lr.rh);
      lr.h = detail::add(lr.rh, lr.mh);
      h = lr.h;
      rec.layers.push_back(std::move(lr));
    }
    rec.logits = unembed_(detail::rms_norm(h));
    return rec;
  }

  // Recomputes the whole prefix without a cache; returns the layer outputs
  // h^1..h^l of the final position.
  std::vector<Vec> full_forward(std::span<const std::uint32_t> tokens) const {
    require(!tokens.empty(), ErrorCode::kInvalidArgument, "toy model: empty sequence");
    const std::size_t T = tokens.size();
    std::vector<Vec> stream(T);
    for (std::size_t p = 0; p < T; ++p) stream[p] = embed(tokens[p], std::uint32_t(p));
    std::vector<Vec> last_outputs;
    for (std::uint32_t j = 0; j < cfg_.l; ++j) {
      const auto& blk = blocks_[j];
      std::vector<Vec> keys(T), values(T), queries(T);
      for (std::size_t p = 0; p < T; ++p) {
        const Vec x = detail::rms_norm(stream[p]);
        keys[p] = blk.wk(x);
        values[p] = blk.wv(x);
        queries[p] = blk.wq(x);
      }
      std::vector<Vec> next(T);
      for (std::size_t p = 0; p < T; ++p) {
        const std::vector<Vec> k(keys.begin(), keys.begin() + std::ptrdiff_t(p + 1));
        const std::vector<Vec> v(values.begin(), values.begin() + std::ptrdiff_t(p + 1));
        const Vec rh = detail::add(stream[p], blk.wo(attend(queries[p], k, v, nullptr)));
        next[p] = detail::add(rh, mlp(blk, rh));
      }
      stream = std::move(next);
      last_outputs.push_back(stream.back());
    }
    return last_outputs;
  }

  std::uint32_t argmax(const Vec& logits) const {
    return static_cast<std::uint32_t>(std::max_element(logits.begin(), logits.end()) -
                                      logits.begin());
  }

 private:
  Vec attend(const Vec& q, const std::vector<Vec>& keys, const std::vector<Vec>& values,
             std::vector<Vec>* weights_out) const {
    const std::size_t hd = cfg_.d / cfg_.n_heads;
    const double scale = 1.0 / std::sqrt(double(hd));
    Vec out(cfg_.d, 0.0);
    for (std::uint32_t head = 0; head < cfg_.n_heads; ++head) {
      const std::size_t off = head * hd;
      Vec w(keys.size());
      for (std::size_t p = 0; p < keys.size(); ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < hd; ++i) s += q[off + i] * keys[p][off + i];
        w[p] = s * scale;
      }
      const double mx = *std::max_element(w.begin(), w.end());
      double z = 0.0;
      for (auto& x : w) {
        x = std::exp(x - mx);
        z += x;
      }
      for (auto& x : w) x /= z;
      for (std::size_t p = 0; p < keys.size(); ++p) {
        for (std::size_t i = 0; i < hd; ++i) out[off + i] += w[p] * values[p][off + i];
      }
      if (weights_out != nullptr) weights_out->push_back(std::move(w));
    }
    return out;
  }

  static Vec mlp(const detail::Block& blk, const Vec& rh) {
    Vec hidden = blk.up(detail::rms_norm(rh));
    for (auto& x : hidden) x = detail::gelu(x);
    return blk.down(hidden);
  }

  ToyConfig cfg_;
  std::vector<double> embedding_;
  std::vector<detail::Block> blocks_;
  detail::Dense unembed_;
};

struct ToyRun {
  std::vector<std::uint32_t> generated;
  ActivationTrace trace;
  std::vector<StepRecord> steps;  // one per captured position, full precision
};

inline NodeVectors to_node_vectors(const LayerRecord& lr) {
  auto f = [](const Vec& v) { return std::vector<float>(v.begin(), v.end()); };
  return {f(lr.ah), f(lr.rh), f(lr.mh), f(lr.h)};
}

// Greedy decoding of `gen_len` tokens. Each answer token is fed back through
// the model and its position captured; question positions are captured too
// when `capture_prompt` is set.
inline ToyRun run_toy_model(const ToyConfig& cfg, std::span<const std::uint32_t> prompt,
                            std::uint32_t gen_len, bool capture_prompt = false,
                            const std::string& example_id = "toy-0") {
  require(!prompt.empty(), ErrorCode::kInvalidArgument, "toy model: empty prompt");
  require(gen_len >= 1, ErrorCode::kInvalidArgument, "toy model: gen_len must be >= 1");
  ToyTransformer model(cfg);
  auto cache = model.make_cache();

  ToyRun run;
  run.trace.example_id = example_id;
  run.trace.model_name = "toy-transformer";
  run.trace.l = cfg.l;
  run.trace.d = cfg.d;
  run.trace.m = static_cast<std::uint32_t>(prompt.size());
  run.trace.n = gen_len;

  auto capture = [&](StepRecord rec, TokenRole role) {
    PositionCapture cap;
    cap.token_index = rec.position;
    cap.role = role;
    for (const auto& lr : rec.layers) cap.layers.push_back(to_node_vectors(lr));
    run.trace.captures.push_back(std::move(cap));
    run.steps.push_back(std::move(rec));
  };

  StepRecord last;
  for (std::size_t p = 0; p < prompt.size(); ++p) {
    last = model.step(prompt[p], cache);
    if (capture_prompt) capture(last, TokenRole::kQuestion);
  }
  std::uint32_t next = model.argmax(last.logits);
  for (std::uint32_t k = 0; k < gen_len; ++k) {
    run.generated.push_back(next);
    last = model.step(next, cache);
    next = model.argmax(last.logits);
    capture(std::move(last), TokenRole::kAnswer);
  }
  return run;
}

// Controlled testbed: every hidden dimension of the observed answer-position
// signal is a pure tone at the class's frequency bin plus gaussian noise,
// shifted by a random per-example, per-dimension DC offset. The offset lives
// only in the DC bin, so it leaves spectral features untouched while hiding
// the class from the time-domain maximum.
struct SyntheticSpec {
  std::uint32_t class_a_bin = 1;
  std::uint32_t class_b_bin = 2;
  double noise_std = 0.1;
  double offset_std = 1.0;
  std::uint32_t n_per_class = 100;
  std::uint64_t seed = 0;
  std::uint32_t m = 8;  // question tokens per example
  std::uint32_t n = 6;  // answer tokens per example
};

struct SyntheticData {
  std::vector<ActivationTrace> traces;
  std::vector<ExampleMeta> metas;
};

// Writes a length-4l signal per dimension into the node vectors of one
// capture so that the signal builder (layers descending, rows h, mh, rh, ah)
// reads it back in order.
inline void place_signal(PositionCapture& cap, std::uint32_t l, std::size_t dim,
                         std::span<const float> signal) {
  for (std::size_t t = 0; t < signal.size(); ++t) {
    auto& nv = cap.layers[l - 1 - t / 4];
    std::vector<float>* rows[4] = {&nv.h, &nv.mh, &nv.rh, &nv.ah};
    (*rows[t % 4])[dim] = signal[t];
  }
}

// Answer positions carry the class tone; question positions carry a tone at a
// random bin, so they hold no class information. Class a examples get
// similarity 0.9 and class b 0.1, i.e. labels 0 and 1 at tau = 0.5.
inline SyntheticData generate_synthetic_traces(const SyntheticSpec& spec, std::uint32_t d,
                                               std::uint32_t l) {
  require(d >= 1 && l >= 1 && spec.m >= 1 && spec.n >= 1, ErrorCode::kInvalidArgument,
          "synthetic: d, l, m, n must be >= 1");
  for (auto bin : {spec.class_a_bin, spec.class_b_bin}) {
    require(bin >= 1 && bin <= 2 * l, ErrorCode::kInvalidArgument,
            "synthetic: frequency bin " + std::to_string(bin) + " outside [1, " +
                std::to_string(2 * l) + "]");
  }
  require(spec.class_a_bin != spec.class_b_bin, ErrorCode::kInvalidArgument,
          "synthetic: class bins must differ");
  require(std::isfinite(spec.noise_std) && spec.noise_std >= 0.0, ErrorCode::kInvalidArgument,
          "synthetic: noise_std must be >= 0");
  require(std::isfinite(spec.offset_std) && spec.offset_std >= 0.0, ErrorCode::kInvalidArgument,
          "synthetic: offset_std must be >= 0");

  Rng rng(spec.seed);
  const std::uint32_t N = 4 * l;
  SyntheticData out;
  std::vector<float> signal(N);
  for (std::uint32_t e = 0; e < 2 * spec.n_per_class; ++e) {
    const bool class_b = (e % 2) == 1;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%05u", e);

    ActivationTrace t;
    t.example_id = id;
    t.model_name = "synthetic-two-tone";
    t.l = l;
    t.d = d;
    t.m = spec.m;
    t.n = spec.n;
    const std::uint32_t distractor = 1 + static_cast<std::uint32_t>(rng.below(2 * l));
    std::vector<double> offset(d, 0.0);
    if (spec.offset_std > 0.0) {
      for (auto& o : offset) o = rng.normal(0.0, spec.offset_std);
    }
    for (std::uint32_t p = 0; p < spec.m + spec.n; ++p) {
      PositionCapture cap;
      cap.token_index = p;
      cap.role = p < spec.m ? TokenRole::kQuestion : TokenRole::kAnswer;
      cap.layers.assign(l, NodeVectors{std::vector<float>(d), std::vector<float>(d),
                                       std::vector<float>(d), std::vector<float>(d)});
      const std::uint32_t bin =
          p < spec.m ? distractor : (class_b ? spec.class_b_bin : spec.class_a_bin);
      for (std::uint32_t i = 0; i < d; ++i) {
        for (std::uint32_t s = 0; s < N; ++s) {
          const double phase = 2.0 * std::numbers::pi * double(bin) * double(s) / double(N);
          const double noise = spec.noise_std > 0.0 ? rng.normal(0.0, spec.noise_std) : 0.0;
          signal[s] = static_cast<float>(offset[i] + std::cos(phase) + noise);
        }
        place_signal(cap, l, i, signal);
      }
      t.captures.push_back(std::move(cap));
    }
    out.traces.push_back(std::move(t));

    ExampleMeta meta;
    meta.example_id = id;
    meta.question = std::string("synthetic question ") + std::to_string(e);
    meta.generated_answer = class_b ? "fabricated answer" : "correct answer";
    meta.reference_answer = "correct answer";
    meta.similarity_score = class_b ? 0.1 : 0.9;
    meta.extra["class"] = class_b ? "b" : "a";
    out.metas.push_back(std::move(meta));
  }
  return out;
}

}  // namespace hsad::toy
