// Copyright 2026 the rdz authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "rdz/error.hpp"
#include "rdz/rng.hpp"

namespace rdz {

inline constexpr int kMlpInputs = 4;
inline constexpr int kMlpHidden = 32;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Fixed-shape scorer: 4 inputs, one sigmoid hidden layer of 32 units, one
/// sigmoid output in (0, 1).
struct MlpParams {
  std::array<std::array<double, kMlpInputs>, kMlpHidden> w1{};
  std::array<double, kMlpHidden> b1{};
  std::array<double, kMlpHidden> w2{};
  double b2 = 0.0;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
inline MlpParams mlp_init(std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p;
  double r1 = 1.0 / std::sqrt(static_cast<double>(kMlpInputs));
  for (auto& row : p.w1)
    for (double& w : row) w = rng.uniform(-r1, r1);
  for (double& b : p.b1) b = rng.uniform(-r1, r1);
  double r2 = 1.0 / std::sqrt(static_cast<double>(kMlpHidden));
  for (double& w : p.w2) w = rng.uniform(-r2, r2);
  p.b2 = rng.uniform(-r2, r2);
  return p;
}

inline double mlp_forward(const MlpParams& p, std::span<const double> x) {
  if (x.size() != kMlpInputs) fail("schema", "classifier expects 4 inputs");
  double out = p.b2;
  for (int h = 0; h < kMlpHidden; ++h) {
    double a = p.b1[static_cast<std::size_t>(h)];
    for (int i = 0; i < kMlpInputs; ++i)
      a += p.w1[static_cast<std::size_t>(h)][static_cast<std::size_t>(i)] *
           x[static_cast<std::size_t>(i)];
    out += p.w2[static_cast<std::size_t>(h)] * sigmoid(a);
  }
  return sigmoid(out);
}

struct LabeledSample {
  std::array<double, kMlpInputs> x{};
  bool positive = false;
};

/// Mean binary cross-entropy over a batch; when grad is non-null the analytic
/// gradient (same shapes as the parameters) is accumulated into it.
inline double mlp_loss(const MlpParams& p, std::span<const LabeledSample> batch,
                       MlpParams* grad = nullptr) {
  if (batch.empty()) return 0.0;
  if (grad) *grad = MlpParams{};
  double loss = 0.0;
  double inv_n = 1.0 / static_cast<double>(batch.size());
  std::array<double, kMlpHidden> hidden{};
  for (const LabeledSample& s : batch) {
    double out_pre = p.b2;
    for (int h = 0; h < kMlpHidden; ++h) {
      double a = p.b1[static_cast<std::size_t>(h)];
      for (int i = 0; i < kMlpInputs; ++i)
        a += p.w1[static_cast<std::size_t>(h)][static_cast<std::size_t>(i)] *
             s.x[static_cast<std::size_t>(i)];
      hidden[static_cast<std::size_t>(h)] = sigmoid(a);
      out_pre += p.w2[static_cast<std::size_t>(h)] * hidden[static_cast<std::size_t>(h)];
    }
    double z = sigmoid(out_pre);
    double y = s.positive ? 1.0 : 0.0;
    double zc = std::clamp(z, 1e-12, 1.0 - 1e-12);
    loss += -(y * std::log(zc) + (1.0 - y) * std::log(1.0 - zc)) * inv_n;
    if (grad) {
      double dz = (z - y) * inv_n;  // d(mean BCE)/d(out_pre)
      grad->b2 += dz;
      for (int h = 0; h < kMlpHidden; ++h) {
        double gh = hidden[static_cast<std::size_t>(h)];
        grad->w2[static_cast<std::size_t>(h)] += dz * gh;
        double da = dz * p.w2[static_cast<std::size_t>(h)] * gh * (1.0 - gh);
        grad->b1[static_cast<std::size_t>(h)] += da;
        for (int i = 0; i < kMlpInputs; ++i)
          grad->w1[static_cast<std::size_t>(h)][static_cast<std::size_t>(i)] +=
              da * s.x[static_cast<std::size_t>(i)];
      }
    }
  }
  return loss;
}

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct MlpTrainResult {
  MlpParams params;
  std::vector<double> loss_trace;  // full-set loss after each epoch
};

/// Seeded mini-batch gradient descent on binary cross-entropy. Both classes
/// must be present.
inline MlpTrainResult mlp_train(std::span<const LabeledSample> data, const TrainConfig& cfg) {
  std::size_t pos = 0;
  for (const LabeledSample& s : data)
    if (s.positive) ++pos;
  if (data.empty() || pos == 0 || pos == data.size())
    fail("degenerate-labels", "training set must contain both classes");

  Rng rng(cfg.seed);
  MlpTrainResult out;
  out.params = mlp_init(rng.next_u64());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<LabeledSample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      MlpParams grad;
      mlp_loss(out.params, batch, &grad);
      double lr = cfg.learning_rate;
      for (int h = 0; h < kMlpHidden; ++h) {
        auto hh = static_cast<std::size_t>(h);
        for (int i = 0; i < kMlpInputs; ++i) {
          auto ii = static_cast<std::size_t>(i);
          out.params.w1[hh][ii] -= lr * grad.w1[hh][ii];
        }
        out.params.b1[hh] -= lr * grad.b1[hh];
        out.params.w2[hh] -= lr * grad.w2[hh];
      }
      out.params.b2 -= lr * grad.b2;
    }
    out.loss_trace.push_back(mlp_loss(out.params, data));
  }
  return out;
}

}  // namespace rdz
