#pragma once

// Independent reference implementations used only by tests. None of these
// share code paths with the library routines they check.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "hsad/detector.hpp"

namespace hsad::oracle {

// O(N^2) DFT magnitudes for bins 0..floor(N/2), twiddles from the raw angle.
inline std::vector<double> naive_amplitudes(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double angle = -2.0L * std::numbers::pi_v<long double> * (long double)(k * t % n) / (long double)n;
      re += x[t] * std::cos(angle);
      im += x[t] * std::sin(angle);
    }
    out[k] = static_cast<double>(std::sqrt(re * re + im * im));
  }
  return out;
}

// Counts positive/negative pairs directly: wins + ties/2 over P*N.
inline double brute_force_auroc(std::span<const double> scores, std::span<const int> labels) {
  std::int64_t wins_x2 = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++pos;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) wins_x2 += 2;
      else if (scores[i] == scores[j]) wins_x2 += 1;
    }
  }
  for (int y : labels) neg += (y == 0);
  return double(wins_x2) / (2.0 * double(pos) * double(neg));
}

// Trainable parameters in a fixed order, matched by flatten() below.
inline std::vector<double*> parameters(DetectorModel& m) {
  std::vector<double*> out;
  for (auto& layer : m.hidden) {
    for (auto& w : layer.weight.data) out.push_back(&w);
    for (auto& b : layer.bias) out.push_back(&b);
    for (auto& g : layer.bn_scale) out.push_back(&g);
    for (auto& b : layer.bn_shift) out.push_back(&b);
  }
  for (auto& w : m.out_weight) out.push_back(&w);
  out.push_back(&m.out_bias);
  return out;
}

inline std::vector<double> flatten(const Gradients& g) {
  std::vector<double> out;
  for (std::size_t li = 0; li < g.weight.size(); ++li) {
    out.insert(out.end(), g.weight[li].data.begin(), g.weight[li].data.end());
    out.insert(out.end(), g.bias[li].begin(), g.bias[li].end());
    out.insert(out.end(), g.bn_scale[li].begin(), g.bn_scale[li].end());
    out.insert(out.end(), g.bn_shift[li].begin(), g.bn_shift[li].end());
  }
  out.insert(out.end(), g.out_weight.begin(), g.out_weight.end());
  out.push_back(g.out_bias);
  return out;
}

// Central differences of loss(forward(model, x)) for every parameter.
// Running statistics are never updated, so each evaluation sees the same
// normalization.
inline std::vector<double> numerical_gradient(DetectorModel model, const Matrix& x,
                                              const std::vector<int>& y, double lambda,
                                              NormStats stats, double step = 1e-6) {
  auto eval = [&](const DetectorModel& m) {
    const auto yhat = detail::forward_pass(m, x, stats, 0.0, nullptr, nullptr, nullptr);
    return loss(yhat, y, lambda, m.first_weight());
  };
  auto params = parameters(model);
  std::vector<double> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + step;
    const double up = eval(model);
    *params[i] = saved - step;
    const double down = eval(model);
    *params[i] = saved;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / denom;
}

// Small random network with non-trivial batch-norm parameters and running
// statistics, for gradient checks. Bypasses the 256-wide bottleneck rule.
inline DetectorModel random_small_model(Rng& rng, std::uint32_t d) {
  DetectorConfig cfg;
  cfg.input_dim = d;
  cfg.hidden_dims.clear();
  const auto depth = 1 + rng.below(3);
  for (std::uint64_t i = 0; i < depth; ++i) {
    cfg.hidden_dims.push_back(static_cast<std::uint32_t>(1 + rng.below(8)));
  }
  cfg.dropout_rate = 0.0;
  cfg.lambda_l1 = 0.0;
  cfg.seed = rng.next_u64();
  auto model = detail::init_model_unchecked(cfg);
  for (auto& layer : model.hidden) {
    for (auto& b : layer.bias) b = rng.uniform(-0.5, 0.5);
    for (auto& g : layer.bn_scale) g = rng.uniform(0.5, 1.5);
    for (auto& b : layer.bn_shift) b = rng.uniform(-0.5, 0.5);
    for (auto& m : layer.running_mean) m = rng.uniform(-0.5, 0.5);
    for (auto& v : layer.running_var) v = rng.uniform(0.5, 2.0);
  }
  model.out_bias = rng.uniform(-0.5, 0.5);
  return model;
}

}  // namespace hsad::oracle
