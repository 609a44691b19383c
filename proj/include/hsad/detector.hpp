#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsad/binary_io.hpp"
#include "hsad/error.hpp"
#include "hsad/labeler.hpp"
#include "hsad/rng.hpp"

namespace hsad {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows_in) {
    Matrix m(rows_in.size(), rows_in.empty() ? 0 : rows_in.front().size());
    for (std::size_t r = 0; r < m.rows; ++r) {
      require(rows_in[r].size() == m.cols, ErrorCode::kShapeMismatch, "Matrix: ragged rows");
      std::copy(rows_in[r].begin(), rows_in[r].end(), m.row(r).begin());
    }
    return m;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline constexpr std::uint32_t kDetectorBottleneck = 256;
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kProbabilityClamp = 1e-7;

struct DetectorConfig {
  std::uint32_t input_dim = 0;
  std::vector<std::uint32_t> hidden_dims = {1024, 512, 256};
  double dropout_rate = 0.2;
  double lambda_l1 = 1e-4;
  double learning_rate = 0.01;
  std::uint32_t epochs = 200;
  std::uint32_t batch_size = 64;
  std::uint64_t seed = 0;

  // `require_bottleneck` is only relaxed by test harnesses that need tiny
  // networks for finite-difference checks.
  void validate(bool require_bottleneck = true) const {
    auto check = [](bool ok, const std::string& msg) {
      require(ok, ErrorCode::kInvalidArgument, "detector config: " + msg);
    };
    check(input_dim >= 1, "input_dim must be >= 1");
    check(!hidden_dims.empty(), "hidden_dims must be non-empty");
    for (auto h : hidden_dims) check(h >= 1, "hidden dims must be >= 1");
    if (require_bottleneck) {
      check(hidden_dims.back() == kDetectorBottleneck, "hidden_dims must end in 256");
    }
    check(std::isfinite(dropout_rate) && dropout_rate >= 0.0 && dropout_rate < 1.0,
          "dropout_rate must be in [0, 1)");
    check(std::isfinite(lambda_l1) && lambda_l1 >= 0.0, "lambda_l1 must be >= 0");
    check(std::isfinite(learning_rate) && learning_rate > 0.0, "learning_rate must be > 0");
    check(epochs >= 1, "epochs must be >= 1");
    check(batch_size >= 1, "batch_size must be >= 1");
  }

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

// Affine -> batch norm -> ReLU -> dropout.
struct HiddenLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  std::vector<double> bn_scale;
  std::vector<double> bn_shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  std::size_t out_dim() const { return weight.rows; }
  std::size_t in_dim() const { return weight.cols; }

  friend bool operator==(const HiddenLayer&, const HiddenLayer&) = default;
};

struct DetectorModel {
  DetectorConfig config;
  std::vector<HiddenLayer> hidden;
  std::vector<double> out_weight;  // 1 x last hidden dim
  double out_bias = 0.0;

  std::size_t input_dim() const { return hidden.front().in_dim(); }
  const Matrix& first_weight() const { return hidden.front().weight; }

  friend bool operator==(const DetectorModel&, const DetectorModel&) = default;
};

namespace detail {

inline DetectorModel init_model_unchecked(const DetectorConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, 0));
  DetectorModel model;
  model.config = cfg;
  std::size_t in = cfg.input_dim;
  for (auto out : cfg.hidden_dims) {
    HiddenLayer layer;
    layer.weight = Matrix(out, in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : layer.weight.data) w = rng.uniform(-bound, bound);
    layer.bias.assign(out, 0.0);
    layer.bn_scale.assign(out, 1.0);
    layer.bn_shift.assign(out, 0.0);
    layer.running_mean.assign(out, 0.0);
    layer.running_var.assign(out, 1.0);
    model.hidden.push_back(std::move(layer));
    in = out;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  model.out_weight.resize(in);
  for (auto& w : model.out_weight) w = rng.uniform(-bound, bound);
  return model;
}

}  // namespace detail

inline DetectorModel init_model(const DetectorConfig& cfg) {
  cfg.validate();
  return detail::init_model_unchecked(cfg);
}

enum class Mode { kTrain, kEval };

// Which statistics batch norm normalizes with.
enum class NormStats { kBatch, kRunning };

struct LayerCache {
  Matrix input;    // B x in
  Matrix xhat;     // normalized pre-activations, B x out
  Matrix bn_out;   // scale * xhat + shift
  Matrix mask;     // dropout multipliers (0 or 1/(1-p)); empty when dropout is off
  std::vector<double> inv_std;
};

struct ForwardCache {
  NormStats stats = NormStats::kBatch;
  std::vector<LayerCache> layers;
  Matrix last_hidden;
  std::vector<double> yhat;
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Core forward pass. `update_running` receives the running-stat update in
// batch-statistics mode; `rng` drives dropout when `dropout > 0`.
inline std::vector<double> forward_pass(const DetectorModel& model, const Matrix& batch,
                                        NormStats stats, double dropout, Rng* rng,
                                        ForwardCache* cache, DetectorModel* update_running) {
  require(!model.hidden.empty(), ErrorCode::kInvalidArgument, "forward: empty model");
  require(batch.cols == model.input_dim(), ErrorCode::kShapeMismatch,
          "forward: feature width " + std::to_string(batch.cols) + " != model input " +
              std::to_string(model.input_dim()));
  require(batch.rows >= 1, ErrorCode::kInvalidArgument, "forward: empty batch");
  if (stats == NormStats::kBatch) {
    require(batch.rows >= 2, ErrorCode::kInvalidArgument,
            "forward: train mode needs a batch of at least 2");
  }
  const std::size_t B = batch.rows;
  if (cache != nullptr) {
    cache->stats = stats;
    cache->layers.assign(model.hidden.size(), {});
  }

  Matrix act = batch;
  for (std::size_t li = 0; li < model.hidden.size(); ++li) {
    const auto& layer = model.hidden[li];
    const std::size_t out = layer.out_dim();
    Matrix z(B, out);
    for (std::size_t b = 0; b < B; ++b) {
      const auto x = act.row(b);
      for (std::size_t o = 0; o < out; ++o) {
        const auto w = layer.weight.row(o);
        double s = layer.bias[o];
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
        z(b, o) = s;
      }
    }

    std::vector<double> mean(out), var(out), inv_std(out);
    if (stats == NormStats::kBatch) {
      for (std::size_t o = 0; o < out; ++o) {
        double mu = 0.0;
        for (std::size_t b = 0; b < B; ++b) mu += z(b, o);
        mu /= double(B);
        double v = 0.0;
        for (std::size_t b = 0; b < B; ++b) v += (z(b, o) - mu) * (z(b, o) - mu);
        mean[o] = mu;
        var[o] = v / double(B);
      }
      if (update_running != nullptr) {
        auto& target = update_running->hidden[li];
        for (std::size_t o = 0; o < out; ++o) {
          target.running_mean[o] =
              (1.0 - kBatchNormMomentum) * target.running_mean[o] + kBatchNormMomentum * mean[o];
          target.running_var[o] =
              (1.0 - kBatchNormMomentum) * target.running_var[o] + kBatchNormMomentum * var[o];
        }
      }
    } else {
      mean = layer.running_mean;
      var = layer.running_var;
    }
    for (std::size_t o = 0; o < out; ++o) inv_std[o] = 1.0 / std::sqrt(var[o] + kBatchNormEps);

    Matrix xhat(B, out), bn(B, out), next(B, out);
    Matrix mask;
    if (dropout > 0.0) mask = Matrix(B, out);
    const double keep_scale = 1.0 / (1.0 - dropout);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t o = 0; o < out; ++o) {
        const double xh = (z(b, o) - mean[o]) * inv_std[o];
        const double y = layer.bn_scale[o] * xh + layer.bn_shift[o];
        xhat(b, o) = xh;
        bn(b, o) = y;
        double a = y > 0.0 ? y : 0.0;
        if (dropout > 0.0) {
          const double keep = rng->uniform() >= dropout ? keep_scale : 0.0;
          mask(b, o) = keep;
          a *= keep;
        }
        next(b, o) = a;
      }
    }
    if (cache != nullptr) {
      auto& lc = cache->layers[li];
      lc.input = std::move(act);
      lc.xhat = std::move(xhat);
      lc.bn_out = std::move(bn);
      lc.mask = std::move(mask);
      lc.inv_std = std::move(inv_std);
    }
    act = std::move(next);
  }

  std::vector<double> yhat(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto h = act.row(b);
    double s = model.out_bias;
    for (std::size_t i = 0; i < h.size(); ++i) s += model.out_weight[i] * h[i];
    yhat[b] = sigmoid(s);
  }
  if (cache != nullptr) {
    cache->last_hidden = std::move(act);
    cache->yhat = yhat;
  }
  return yhat;
}

}  // namespace detail

// Train mode normalizes with batch statistics, updates the running statistics
// and applies inverted dropout seeded by `seed`. Eval mode is deterministic.
inline std::vector<double> forward(DetectorModel& model, const Matrix& batch, Mode mode,
                                   std::uint64_t seed = 0, ForwardCache* cache = nullptr) {
  if (mode == Mode::kEval) {
    return detail::forward_pass(model, batch, NormStats::kRunning, 0.0, nullptr, cache, nullptr);
  }
  Rng rng(seed);
  return detail::forward_pass(model, batch, NormStats::kBatch, model.config.dropout_rate, &rng,
                              cache, &model);
}

inline std::vector<double> forward_eval(const DetectorModel& model, const Matrix& batch) {
  return detail::forward_pass(model, batch, NormStats::kRunning, 0.0, nullptr, nullptr, nullptr);
}

inline double predict(const DetectorModel& model, std::span<const double> feature) {
  Matrix one(1, feature.size());
  std::copy(feature.begin(), feature.end(), one.data.begin());
  return forward_eval(model, one)[0];
}

inline double l1_norm(const Matrix& m) {
  double s = 0.0;
  for (double w : m.data) s += std::abs(w);
  return s;
}

// Mean binary cross-entropy over the batch plus lambda * |W1|_1, with
// predictions clamped to [eps, 1 - eps].
inline double loss(std::span<const double> yhat, std::span<const int> y, double lambda,
                   const Matrix& first_weight) {
  require(yhat.size() == y.size() && !y.empty(), ErrorCode::kShapeMismatch,
          "loss: prediction/label length mismatch");
  double bce = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(yhat[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    bce -= y[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return bce / double(y.size()) + lambda * l1_norm(first_weight);
}

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;
  std::vector<std::vector<double>> bn_scale;
  std::vector<std::vector<double>> bn_shift;
  std::vector<double> out_weight;
  double out_bias = 0.0;
};

// Gradient of loss() with respect to every trainable parameter, given the
// cache from the forward pass that produced the predictions. The L1 term
// uses the subgradient sign(w) with sign(0) = 0.
inline Gradients backward(const DetectorModel& model, const ForwardCache& cache,
                          std::span<const int> y, double lambda) {
  const std::size_t B = cache.yhat.size();
  require(y.size() == B, ErrorCode::kShapeMismatch, "backward: label count mismatch");
  const std::size_t L = model.hidden.size();
  Gradients g;
  g.weight.resize(L);
  g.bias.resize(L);
  g.bn_scale.resize(L);
  g.bn_shift.resize(L);

  // d loss / d logit = (yhat - y) / B
  std::vector<double> dlogit(B);
  for (std::size_t b = 0; b < B; ++b) dlogit[b] = (cache.yhat[b] - double(y[b])) / double(B);

  const Matrix& h_last = cache.last_hidden;
  g.out_weight.assign(model.out_weight.size(), 0.0);
  g.out_bias = 0.0;
  Matrix dact(B, model.out_weight.size());
  for (std::size_t b = 0; b < B; ++b) {
    g.out_bias += dlogit[b];
    for (std::size_t i = 0; i < model.out_weight.size(); ++i) {
      g.out_weight[i] += dlogit[b] * h_last(b, i);
      dact(b, i) = dlogit[b] * model.out_weight[i];
    }
  }

  for (std::size_t li = L; li-- > 0;) {
    const auto& layer = model.hidden[li];
    const auto& lc = cache.layers[li];
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();

    // Through dropout and ReLU back to the batch-norm output.
    Matrix dbn(B, out);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t o = 0; o < out; ++o) {
        double d = dact(b, o);
        if (!lc.mask.data.empty()) d *= lc.mask(b, o);
        dbn(b, o) = lc.bn_out(b, o) > 0.0 ? d : 0.0;
      }
    }

    g.bn_scale[li].assign(out, 0.0);
    g.bn_shift[li].assign(out, 0.0);
    Matrix dz(B, out);
    for (std::size_t o = 0; o < out; ++o) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        sum_dy += dbn(b, o);
        sum_dy_xhat += dbn(b, o) * lc.xhat(b, o);
      }
      g.bn_shift[li][o] = sum_dy;
      g.bn_scale[li][o] = sum_dy_xhat;
      const double scale = layer.bn_scale[o];
      const double istd = lc.inv_std[o];
      if (cache.stats == NormStats::kBatch) {
        // Mean and variance depend on every row of the batch.
        const double n = double(B);
        for (std::size_t b = 0; b < B; ++b) {
          dz(b, o) = scale * istd / n *
                     (n * dbn(b, o) - sum_dy - lc.xhat(b, o) * sum_dy_xhat);
        }
      } else {
        for (std::size_t b = 0; b < B; ++b) dz(b, o) = scale * istd * dbn(b, o);
      }
    }

    g.weight[li] = Matrix(out, in);
    g.bias[li].assign(out, 0.0);
    Matrix dinput(B, in);
    for (std::size_t b = 0; b < B; ++b) {
      const auto x = lc.input.row(b);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dz(b, o);
        if (d == 0.0) continue;
        g.bias[li][o] += d;
        auto gw = g.weight[li].row(o);
        const auto w = layer.weight.row(o);
        auto di = dinput.row(b);
        for (std::size_t i = 0; i < in; ++i) {
          gw[i] += d * x[i];
          di[i] += d * w[i];
        }
      }
    }
    dact = std::move(dinput);
  }

  if (lambda != 0.0) {
    const auto& w1 = model.hidden.front().weight.data;
    auto& g1 = g.weight.front().data;
    for (std::size_t i = 0; i < w1.size(); ++i) {
      g1[i] += lambda * double((w1[i] > 0.0) - (w1[i] < 0.0));
    }
  }
  return g;
}

inline void apply_gradients(DetectorModel& model, const Gradients& g, double lr) {
  for (std::size_t li = 0; li < model.hidden.size(); ++li) {
    auto& layer = model.hidden[li];
    for (std::size_t i = 0; i < layer.weight.data.size(); ++i) {
      layer.weight.data[i] -= lr * g.weight[li].data[i];
    }
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      layer.bias[o] -= lr * g.bias[li][o];
      layer.bn_scale[o] -= lr * g.bn_scale[li][o];
      layer.bn_shift[o] -= lr * g.bn_shift[li][o];
    }
  }
  for (std::size_t i = 0; i < model.out_weight.size(); ++i) {
    model.out_weight[i] -= lr * g.out_weight[i];
  }
  model.out_bias -= lr * g.out_bias;
}

struct TrainResult {
  DetectorModel model;
  std::vector<double> epoch_loss;  // mean training loss of each epoch
};

// Mini-batch gradient descent with a fixed learning rate. Shuffling and
// dropout draw from one stream derived from cfg.seed. A trailing batch of one
// example is folded into the previous batch so batch statistics exist.
inline TrainResult train(DetectorModel model, const LabeledDataset& data,
                         const DetectorConfig& cfg) {
  cfg.validate(model.config.hidden_dims.back() == kDetectorBottleneck);
  require(cfg.input_dim == model.input_dim() && cfg.hidden_dims == model.config.hidden_dims,
          ErrorCode::kShapeMismatch, "train: config shape differs from model");
  require(data.d == model.input_dim(), ErrorCode::kShapeMismatch,
          "train: feature width " + std::to_string(data.d) + " != model input " +
              std::to_string(model.input_dim()));
  const auto pos = data.positives();
  const auto neg = data.negatives();
  require(pos >= 2 && neg >= 2, ErrorCode::kSingleClass,
          "train: need at least 2 examples per class, have " + std::to_string(pos) +
              " positive / " + std::to_string(neg) + " negative");
  for (const auto& f : data.features) {
    require(f.size() == data.d, ErrorCode::kShapeMismatch, "train: ragged features");
    for (double v : f) require(std::isfinite(v), ErrorCode::kInvalidArgument, "train: non-finite feature");
  }
  model.config = cfg;

  Rng rng(derive_seed(cfg.seed, 1));
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t start = 0;
    while (start < n) {
      std::size_t end = std::min(n, start + cfg.batch_size);
      if (n - end == 1) end = n;
      if (end - start < 2) break;  // only when n == 1, excluded above
      const std::size_t B = end - start;
      Matrix x(B, data.d);
      std::vector<int> y(B);
      for (std::size_t b = 0; b < B; ++b) {
        const auto idx = order[start + b];
        std::copy(data.features[idx].begin(), data.features[idx].end(), x.row(b).begin());
        y[b] = data.labels[idx];
      }
      ForwardCache cache;
      const auto yhat = detail::forward_pass(model, x, NormStats::kBatch, cfg.dropout_rate, &rng,
                                             &cache, &model);
      total += loss(yhat, y, cfg.lambda_l1, model.first_weight()) * double(B);
      const auto g = backward(model, cache, y, cfg.lambda_l1);
      apply_gradients(model, g, cfg.learning_rate);
      start = end;
    }
    result.epoch_loss.push_back(total / double(n));
  }
  result.model = std::move(model);
  return result;
}

inline constexpr std::string_view kModelMagic = "HSADMDL1";
inline constexpr std::uint32_t kModelVersion = 1;

inline std::string encode_model(const DetectorModel& model) {
  io::ByteWriter w;
  w.bytes(kModelMagic);
  w.u32(kModelVersion);
  const auto& c = model.config;
  w.u32(c.input_dim);
  w.u32(static_cast<std::uint32_t>(c.hidden_dims.size()));
  for (auto h : c.hidden_dims) w.u32(h);
  w.f64(c.dropout_rate);
  w.f64(c.lambda_l1);
  w.f64(c.learning_rate);
  w.u32(c.epochs);
  w.u32(c.batch_size);
  w.u64(c.seed);
  for (const auto& layer : model.hidden) {
    for (double v : layer.weight.data) w.f64(v);
    for (const auto* vec : {&layer.bias, &layer.bn_scale, &layer.bn_shift, &layer.running_mean,
                            &layer.running_var}) {
      for (double v : *vec) w.f64(v);
    }
  }
  for (double v : model.out_weight) w.f64(v);
  w.f64(model.out_bias);
  return w.data();
}

inline DetectorModel decode_model(std::string_view bytes) {
  io::ByteReader r(bytes);
  io::expect_header(r, kModelMagic, kModelVersion, "model file");
  DetectorConfig c;
  c.input_dim = r.u32();
  const auto depth = r.u32();
  require(depth >= 1 && depth <= 64, ErrorCode::kShapeMismatch, "model file: bad layer count");
  c.hidden_dims.resize(depth);
  for (auto& h : c.hidden_dims) h = r.u32();
  c.dropout_rate = r.f64();
  c.lambda_l1 = r.f64();
  c.learning_rate = r.f64();
  c.epochs = r.u32();
  c.batch_size = r.u32();
  c.seed = r.u64();
  try {
    c.validate(false);
  } catch (const Error& e) {
    fail(ErrorCode::kShapeMismatch, std::string("model file: ") + e.what());
  }

  std::uint64_t expected = 0;
  std::uint64_t in = c.input_dim;
  for (auto h : c.hidden_dims) {
    expected += std::uint64_t(h) * in + 5ULL * h;
    in = h;
  }
  expected += in + 1;
  require(expected * 8 == r.remaining(), r.remaining() < expected * 8 ? ErrorCode::kTruncated
                                                                      : ErrorCode::kShapeMismatch,
          "model file: parameter payload is " + std::to_string(r.remaining()) + " bytes, expected " +
              std::to_string(expected * 8));

  DetectorModel model;
  model.config = c;
  in = c.input_dim;
  for (auto h : c.hidden_dims) {
    HiddenLayer layer;
    layer.weight = Matrix(h, in);
    for (auto& v : layer.weight.data) v = r.f64();
    for (auto* vec : {&layer.bias, &layer.bn_scale, &layer.bn_shift, &layer.running_mean,
                      &layer.running_var}) {
      vec->resize(h);
      for (auto& v : *vec) v = r.f64();
    }
    for (double v : layer.running_var) {
      require(v >= 0.0, ErrorCode::kInvariantViolation, "model file: negative running variance");
    }
    model.hidden.push_back(std::move(layer));
    in = h;
  }
  model.out_weight.resize(in);
  for (auto& v : model.out_weight) v = r.f64();
  model.out_bias = r.f64();
  return model;
}

inline void save_model(const DetectorModel& model, const std::string& path) {
  io::write_file(path, encode_model(model));
}

inline DetectorModel load_model(const std::string& path) {
  return decode_model(io::read_file(path));
}

}  // namespace hsad
