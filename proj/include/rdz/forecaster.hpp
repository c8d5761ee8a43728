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

#include "rdz/mlp.hpp"
#include "rdz/predictor.hpp"
#include "rdz/scene.hpp"
#include "rdz/signal.hpp"

namespace rdz {

namespace detail {

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }

  friend bool operator==(const Mat&, const Mat&) = default;
};

}  // namespace detail

inline constexpr int kNodeFeatureCount = 7;
inline constexpr int kForecastHeads = 3;

/// Feature scaling applied inside the network so meters and m/s enter the
/// nonlinearities at comparable magnitude.
inline constexpr std::array<double, kNodeFeatureCount> kNodeFeatureScale = {
    0.1, 0.25, 0.02, 1.0, 1.0, 1.0, 1.0};

/// Undirected interaction graph over one scene. Node order is ascending agent
/// id. Features per node: [speed, longitudinal accel, distance to yield (or to
/// the nearest conflict point when circulating), in-circulating flag, signal
/// one-hot]. Circulating vehicles carry an all-zero signal encoding.
struct SceneGraph {
  std::vector<AgentId> ids;
  std::vector<std::array<double, kNodeFeatureCount>> features;
  std::vector<std::pair<int, int>> edges;  // i < j, indices into ids
  std::vector<double> edge_attr;           // separation in meters
  std::vector<std::vector<std::pair<int, double>>> neighbors;  // per node: (other, attr)
};

/// Build the interaction graph for one scene. Vehicles connect when closer
/// than d_t, and an approaching/circulating pair also connects when the
/// circulating vehicle reaches the approacher's conflict point within t_max.
inline SceneGraph build_scene_graph(std::span<const TrackedAgent> scene,
                                    const RoundaboutMap& map, const SignalParams& params) {
  std::vector<TrackedAgent> agents(scene.begin(), scene.end());
  std::sort(agents.begin(), agents.end(),
            [](const TrackedAgent& a, const TrackedAgent& b) { return a.id < b.id; });

  SceneGraph g;
  std::vector<int> leg_of(agents.size(), -1);
  std::vector<bool> circulating(agents.size(), false);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const AgentState& s = agents[i].state;
    std::array<double, kNodeFeatureCount> f{};
    f[0] = s.speed();
    f[1] = s.longitudinal_accel();
    if (in_circulating_lane(s, map)) {
      circulating[i] = true;
      double nearest = std::numeric_limits<double>::infinity();
      for (const ApproachLeg& leg : map.legs)
        nearest = std::min(nearest, arc_distance_to_conflict(s, leg, map));
      f[2] = map.legs.empty() ? 0.0 : nearest;
      f[3] = 1.0;
    } else {
      std::optional<LegLocation> loc = locate_on_leg(s, map);
      if (loc) {
        leg_of[i] = static_cast<int>(loc->leg_index);
        f[2] = loc->distance_to_yield;
        if (loc->distance_to_yield > 0.0) {
          SignalResult sig = compute_signal(s, map.legs[loc->leg_index], scene, map, params);
          f[4] = sig.state == SignalState::Green ? 1.0 : 0.0;
          f[5] = sig.state == SignalState::Yellow ? 1.0 : 0.0;
          f[6] = sig.state == SignalState::Red ? 1.0 : 0.0;
        } else {
          f[4] = 1.0;  // past the line and committed; treated as unconstrained
        }
      }
    }
    g.ids.push_back(agents[i].id);
    g.features.push_back(f);
  }

  g.neighbors.resize(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      double sep = separation(agents[i].state, agents[j].state);
      bool connect = sep < params.d_t;
      if (!connect) {
        // Approaching/circulating pairs also couple through imminent arrival.
        auto coupled = [&](std::size_t ap, std::size_t ci) {
          if (leg_of[ap] < 0 || !circulating[ci]) return false;
          double ttc = time_to_collision(agents[ci].state,
                                         map.legs[static_cast<std::size_t>(leg_of[ap])], map);
          return ttc < params.t_max;
        };
        connect = coupled(i, j) || coupled(j, i);
      }
      if (connect) {
        g.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        g.edge_attr.push_back(sep);
        g.neighbors[i].emplace_back(static_cast<int>(j), sep);
        g.neighbors[j].emplace_back(static_cast<int>(i), sep);
      }
    }
  }
  return g;
}

/// Message-passing weights: per round a linear message over [neighbor state,
/// edge attribute] and a tanh update over [own state, aggregated message],
/// then three independent sigmoid readout heads.
struct GnnParams {
  struct Layer {
    detail::Mat msg_w;             // hidden x (in_dim + 1)
    std::vector<double> msg_b;     // hidden
    detail::Mat upd_w;             // hidden x (in_dim + hidden)
    std::vector<double> upd_b;     // hidden

    friend bool operator==(const Layer&, const Layer&) = default;
  };

  int feature_dim = kNodeFeatureCount;
  int hidden = 16;
  std::vector<Layer> layers;
  detail::Mat out_w;               // kForecastHeads x hidden
  std::vector<double> out_b;       // kForecastHeads

  int rounds() const { return static_cast<int>(layers.size()); }

  friend bool operator==(const GnnParams&, const GnnParams&) = default;
};

inline GnnParams gnn_init(int hidden, int rounds, std::uint64_t seed) {
  Rng rng(seed);
  GnnParams p;
  p.hidden = hidden;
  auto init_mat = [&rng](detail::Mat& m) {
    double r = 1.0 / std::sqrt(static_cast<double>(m.cols));
    for (double& v : m.a) v = rng.uniform(-r, r);
  };
  auto init_vec = [&rng](std::vector<double>& v, int fan_in) {
    double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : v) x = rng.uniform(-r, r);
  };
  for (int r = 0; r < rounds; ++r) {
    int in_dim = r == 0 ? p.feature_dim : hidden;
    GnnParams::Layer layer;
    layer.msg_w = detail::Mat(hidden, in_dim + 1);
    layer.msg_b.assign(static_cast<std::size_t>(hidden), 0.0);
    layer.upd_w = detail::Mat(hidden, in_dim + hidden);
    layer.upd_b.assign(static_cast<std::size_t>(hidden), 0.0);
    init_mat(layer.msg_w);
    init_vec(layer.msg_b, in_dim + 1);
    init_mat(layer.upd_w);
    init_vec(layer.upd_b, in_dim + hidden);
    p.layers.push_back(std::move(layer));
  }
  p.out_w = detail::Mat(kForecastHeads, hidden);
  p.out_b.assign(kForecastHeads, 0.0);
  init_mat(p.out_w);
  init_vec(p.out_b, hidden);
  return p;
}

struct NodeProbabilities {
  AgentId agent_id = 0;
  double p_dilemma = 0.5;
  double p_causal = 0.5;
  double p_pass = 0.5;
};

namespace detail {

struct GnnTrace {
  std::vector<Mat> h;      // rounds + 1 entries, N x dim
  std::vector<Mat> mean;   // rounds entries, N x hidden
  Mat out_prob;            // N x heads, post-sigmoid
};

inline Mat scaled_features(const SceneGraph& g) {
  Mat h0(static_cast<int>(g.features.size()), kNodeFeatureCount);
  for (int v = 0; v < h0.rows; ++v)
    for (int k = 0; k < kNodeFeatureCount; ++k)
      h0.at(v, k) = g.features[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)] *
                    kNodeFeatureScale[static_cast<std::size_t>(k)];
  return h0;
}

inline GnnTrace gnn_forward(const SceneGraph& g, const GnnParams& p) {
  int n = static_cast<int>(g.ids.size());
  GnnTrace tr;
  tr.h.push_back(scaled_features(g));
  for (int r = 0; r < p.rounds(); ++r) {
    const GnnParams::Layer& layer = p.layers[static_cast<std::size_t>(r)];
    const Mat& h = tr.h.back();
    int in_dim = h.cols;
    Mat mean(n, p.hidden);
    for (int v = 0; v < n; ++v) {
      const auto& nb = g.neighbors[static_cast<std::size_t>(v)];
      if (nb.empty()) continue;
      double inv = 1.0 / static_cast<double>(nb.size());
      for (const auto& [u, attr] : nb) {
        for (int o = 0; o < p.hidden; ++o) {
          double m = layer.msg_b[static_cast<std::size_t>(o)];
          for (int k = 0; k < in_dim; ++k) m += layer.msg_w.at(o, k) * h.at(u, k);
          m += layer.msg_w.at(o, in_dim) * attr;
          mean.at(v, o) += m * inv;
        }
      }
    }
    Mat next(n, p.hidden);
    for (int v = 0; v < n; ++v) {
      for (int o = 0; o < p.hidden; ++o) {
        double u = layer.upd_b[static_cast<std::size_t>(o)];
        for (int k = 0; k < in_dim; ++k) u += layer.upd_w.at(o, k) * h.at(v, k);
        for (int k = 0; k < p.hidden; ++k) u += layer.upd_w.at(o, in_dim + k) * mean.at(v, k);
        next.at(v, o) = std::tanh(u);
      }
    }
    tr.mean.push_back(std::move(mean));
    tr.h.push_back(std::move(next));
  }
  const Mat& hr = tr.h.back();
  tr.out_prob = Mat(n, kForecastHeads);
  for (int v = 0; v < n; ++v) {
    for (int j = 0; j < kForecastHeads; ++j) {
      double u = p.out_b[static_cast<std::size_t>(j)];
      for (int k = 0; k < p.hidden; ++k) u += p.out_w.at(j, k) * hr.at(v, k);
      tr.out_prob.at(v, j) = sigmoid(u);
    }
  }
  return tr;
}

}  // namespace detail

/// Per-node event probabilities for one scene.
inline std::vector<NodeProbabilities> forecast(const SceneGraph& g, const GnnParams& p) {
  detail::GnnTrace tr = detail::gnn_forward(g, p);
  std::vector<NodeProbabilities> out;
  for (std::size_t v = 0; v < g.ids.size(); ++v) {
    int vi = static_cast<int>(v);
    out.push_back({g.ids[v], tr.out_prob.at(vi, 0), tr.out_prob.at(vi, 1), tr.out_prob.at(vi, 2)});
  }
  return out;
}

/// One training scene: graph plus per-node targets for the three heads
/// (dilemma involvement, being the cause, passing the yield line).
struct LabeledScene {
  SceneGraph graph;
  std::vector<std::array<double, kForecastHeads>> targets;
};

/// Mean BCE over all nodes and heads of every scene; accumulates the analytic
/// gradient into *grad when given (same shapes as the parameters).
inline double gnn_loss(const GnnParams& p, std::span<const LabeledScene> scenes,
                       GnnParams* grad = nullptr) {
  if (grad) {
    *grad = p;
    for (auto& layer : grad->layers) {
      std::fill(layer.msg_w.a.begin(), layer.msg_w.a.end(), 0.0);
      std::fill(layer.msg_b.begin(), layer.msg_b.end(), 0.0);
      std::fill(layer.upd_w.a.begin(), layer.upd_w.a.end(), 0.0);
      std::fill(layer.upd_b.begin(), layer.upd_b.end(), 0.0);
    }
    std::fill(grad->out_w.a.begin(), grad->out_w.a.end(), 0.0);
    std::fill(grad->out_b.begin(), grad->out_b.end(), 0.0);
  }
  double total = 0.0;
  long terms = 0;
  for (const LabeledScene& sc : scenes)
    terms += static_cast<long>(sc.graph.ids.size()) * kForecastHeads;
  if (terms == 0) return 0.0;
  double inv_terms = 1.0 / static_cast<double>(terms);

  for (const LabeledScene& sc : scenes) {
    const SceneGraph& g = sc.graph;
    int n = static_cast<int>(g.ids.size());
    if (n == 0) continue;
    detail::GnnTrace tr = detail::gnn_forward(g, p);

    for (int v = 0; v < n; ++v) {
      for (int j = 0; j < kForecastHeads; ++j) {
        double z = std::clamp(tr.out_prob.at(v, j), 1e-12, 1.0 - 1e-12);
        double y = sc.targets[static_cast<std::size_t>(v)][static_cast<std::size_t>(j)];
        total += -(y * std::log(z) + (1.0 - y) * std::log(1.0 - z)) * inv_terms;
      }
    }
    if (!grad) continue;

    const detail::Mat& hr = tr.h.back();
    detail::Mat dh(n, p.hidden);
    for (int v = 0; v < n; ++v) {
      for (int j = 0; j < kForecastHeads; ++j) {
        double dz = (tr.out_prob.at(v, j) -
                     sc.targets[static_cast<std::size_t>(v)][static_cast<std::size_t>(j)]) *
                    inv_terms;
        grad->out_b[static_cast<std::size_t>(j)] += dz;
        for (int k = 0; k < p.hidden; ++k) {
          grad->out_w.at(j, k) += dz * hr.at(v, k);
          dh.at(v, k) += dz * p.out_w.at(j, k);
        }
      }
    }

    for (int r = p.rounds() - 1; r >= 0; --r) {
      const GnnParams::Layer& layer = p.layers[static_cast<std::size_t>(r)];
      GnnParams::Layer& glayer = grad->layers[static_cast<std::size_t>(r)];
      const detail::Mat& h_in = tr.h[static_cast<std::size_t>(r)];
      const detail::Mat& h_out = tr.h[static_cast<std::size_t>(r) + 1];
      const detail::Mat& mean = tr.mean[static_cast<std::size_t>(r)];
      int in_dim = h_in.cols;

      detail::Mat dh_in(n, in_dim);
      detail::Mat dmean(n, p.hidden);
      for (int v = 0; v < n; ++v) {
        for (int o = 0; o < p.hidden; ++o) {
          double t = h_out.at(v, o);
          double du = dh.at(v, o) * (1.0 - t * t);
          glayer.upd_b[static_cast<std::size_t>(o)] += du;
          for (int k = 0; k < in_dim; ++k) {
            glayer.upd_w.at(o, k) += du * h_in.at(v, k);
            dh_in.at(v, k) += du * layer.upd_w.at(o, k);
          }
          for (int k = 0; k < p.hidden; ++k) {
            glayer.upd_w.at(o, in_dim + k) += du * mean.at(v, k);
            dmean.at(v, k) += du * layer.upd_w.at(o, in_dim + k);
          }
        }
      }
      for (int v = 0; v < n; ++v) {
        const auto& nb = g.neighbors[static_cast<std::size_t>(v)];
        if (nb.empty()) continue;
        double inv = 1.0 / static_cast<double>(nb.size());
        for (const auto& [u, attr] : nb) {
          for (int o = 0; o < p.hidden; ++o) {
            double dm = dmean.at(v, o) * inv;
            if (dm == 0.0) continue;
            glayer.msg_b[static_cast<std::size_t>(o)] += dm;
            for (int k = 0; k < in_dim; ++k) {
              glayer.msg_w.at(o, k) += dm * h_in.at(u, k);
              dh_in.at(u, k) += dm * layer.msg_w.at(o, k);
            }
            glayer.msg_w.at(o, in_dim) += dm * attr;
          }
        }
      }
      dh = std::move(dh_in);
    }
  }
  return total;
}

struct GnnTrainResult {
  GnnParams params;
  std::vector<double> loss_trace;
};

/// Seeded mini-batch gradient descent over scenes. Every head must see both
/// target classes somewhere in the data.
inline GnnTrainResult train_forecaster(std::span<const LabeledScene> scenes, int hidden,
                                       int rounds, const TrainConfig& cfg) {
  std::array<bool, kForecastHeads> saw_pos{};
  std::array<bool, kForecastHeads> saw_neg{};
  for (const LabeledScene& sc : scenes)
    for (const auto& t : sc.targets)
      for (int j = 0; j < kForecastHeads; ++j) {
        if (t[static_cast<std::size_t>(j)] > 0.5) saw_pos[static_cast<std::size_t>(j)] = true;
        else saw_neg[static_cast<std::size_t>(j)] = true;
      }
  for (int j = 0; j < kForecastHeads; ++j)
    if (!saw_pos[static_cast<std::size_t>(j)] || !saw_neg[static_cast<std::size_t>(j)])
      fail("degenerate-labels", "forecaster head " + std::to_string(j) +
                                    " sees a single target class");

  Rng rng(cfg.seed);
  GnnTrainResult out;
  out.params = gnn_init(hidden, rounds, rng.next_u64());
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<LabeledScene> batch;

  auto apply = [](GnnParams& p, const GnnParams& g, double lr) {
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      for (std::size_t i = 0; i < p.layers[l].msg_w.a.size(); ++i)
        p.layers[l].msg_w.a[i] -= lr * g.layers[l].msg_w.a[i];
      for (std::size_t i = 0; i < p.layers[l].msg_b.size(); ++i)
        p.layers[l].msg_b[i] -= lr * g.layers[l].msg_b[i];
      for (std::size_t i = 0; i < p.layers[l].upd_w.a.size(); ++i)
        p.layers[l].upd_w.a[i] -= lr * g.layers[l].upd_w.a[i];
      for (std::size_t i = 0; i < p.layers[l].upd_b.size(); ++i)
        p.layers[l].upd_b[i] -= lr * g.layers[l].upd_b[i];
    }
    for (std::size_t i = 0; i < p.out_w.a.size(); ++i) p.out_w.a[i] -= lr * g.out_w.a[i];
    for (std::size_t i = 0; i < p.out_b.size(); ++i) p.out_b[i] -= lr * g.out_b[i];
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(scenes[order[i]]);
      GnnParams grad;
      gnn_loss(out.params, batch, &grad);
      apply(out.params, grad, cfg.learning_rate);
    }
    out.loss_trace.push_back(gnn_loss(out.params, scenes));
  }
  return out;
}

enum class ManeuverAction { Maintain, Accelerate, Decelerate };

inline const char* to_string(ManeuverAction a) {
  switch (a) {
    case ManeuverAction::Maintain: return "maintain";
    case ManeuverAction::Accelerate: return "accelerate";
    default: return "decelerate";
  }
}

/// Longitudinal advice with magnitude in m/s^2; zero for maintain.
struct ManeuverAdvice {
  ManeuverAction action = ManeuverAction::Maintain;
  double magnitude = 0.0;
};

/// Accelerate hard out of a likely dilemma when passing looks feasible,
/// brake moderately otherwise, and leave non-dilemma traffic alone.
inline ManeuverAdvice advise_maneuver(const NodeProbabilities& p) {
  if (!(p.p_dilemma > 0.5)) return {ManeuverAction::Maintain, 0.0};
  if (p.p_pass > 0.5) return {ManeuverAction::Accelerate, 4.0};
  return {ManeuverAction::Decelerate, 2.0};
}

/// Per-node targets at one frame: involvement in an event within the next
/// horizon_steps frames, being its recorded cause, and crossing the yield line
/// within the horizon without a red signal at the crossing.
inline std::vector<LabeledScene> build_training_scenes(const FrameTable& table,
                                                       const RoundaboutMap& map,
                                                       std::span<const DzEvent> events,
                                                       const SignalParams& params,
                                                       int horizon_steps, int frame_stride) {
  std::vector<LabeledScene> out;
  if (frame_stride < 1) frame_stride = 1;
  for (std::int64_t frame = table.first_frame(); frame <= table.last_frame();
       frame += frame_stride) {
    std::span<const TrackedAgent> scene = table.scene(frame);
    if (scene.empty()) continue;
    LabeledScene ls;
    ls.graph = build_scene_graph(scene, map, params);
    for (AgentId id : ls.graph.ids) {
      std::array<double, kForecastHeads> t{};
      for (const DzEvent& e : events) {
        if (e.agent_id == id && e.first_frame <= frame + horizon_steps && e.last_frame >= frame)
          t[0] = 1.0;
        if (e.cause_id == id && e.first_frame <= frame + horizon_steps && e.last_frame >= frame)
          t[1] = 1.0;
      }
      for (int k = 0; k < horizon_steps; ++k) {
        std::span<const TimedState> pair = table.window(id, frame + k, 2);
        if (pair.size() < 2) break;
        std::optional<LegLocation> before = locate_on_leg(pair[0].state, map);
        if (!before || before->distance_to_yield <= 0.0) continue;
        bool crossed = false;
        std::optional<LegLocation> after = locate_on_leg(pair[1].state, map);
        if (!after || after->distance_to_yield <= 0.0) crossed = true;
        if (!crossed) continue;
        SignalResult sig = compute_signal(pair[0].state, map.legs[before->leg_index],
                                          table.scene(frame + k), map, params);
        if (sig.state != SignalState::Red) t[2] = 1.0;
        break;
      }
      ls.targets.push_back(t);
    }
    out.push_back(std::move(ls));
  }
  return out;
}

}  // namespace rdz
