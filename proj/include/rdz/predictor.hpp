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

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "rdz/dilemma.hpp"
#include "rdz/geometry.hpp"
#include "rdz/signal.hpp"

namespace rdz {

/// Longitudinal path of an entering vehicle: the leg centerline, a straight
/// connector to the conflict point if the centerline stops short of it, then
/// the circle through the conflict point in the circulation direction. Also
/// models plain circulation when built from a position inside the lane.
class EntryPath {
 public:
  static EntryPath from_leg(const ApproachLeg& leg, const RoundaboutMap& map) {
    EntryPath p;
    p.pts_ = leg.centerline;
    if ((leg.centerline.back() - leg.conflict_point).norm() > 1e-9)
      p.pts_.push_back(leg.conflict_point);
    p.init_polyline();
    p.center_ = map.center;
    p.radius_ = (leg.conflict_point - map.center).norm();
    p.arc_start_ = std::atan2(leg.conflict_point.y - map.center.y,
                              leg.conflict_point.x - map.center.x);
    p.turn_ = map.circulation == Circulation::CounterClockwise ? 1.0 : -1.0;
    p.yield_s_ = project_to_polyline(p.pts_, leg.yield_point).along;
    return p;
  }

  static EntryPath circle(Vec2 position, const RoundaboutMap& map) {
    EntryPath p;
    p.center_ = map.center;
    p.radius_ = (position - map.center).norm();
    if (p.radius_ <= 0.0) fail("not-circulating", "vehicle sits at the map center");
    p.arc_start_ = std::atan2(position.y - map.center.y, position.x - map.center.x);
    p.turn_ = map.circulation == Circulation::CounterClockwise ? 1.0 : -1.0;
    return p;
  }

  Vec2 point_at(double s) const {
    if (!pts_.empty() && s <= poly_len_) {
      std::size_t i = 0;
      while (i + 1 < dirs_.size() && s > cum_[i + 1]) ++i;
      return pts_[i] + dirs_[i] * (s - cum_[i]);
    }
    double a = arc_angle_at(s);
    return center_ + Vec2{radius_ * std::cos(a), radius_ * std::sin(a)};
  }

  double heading_at(double s) const {
    if (!pts_.empty() && s <= poly_len_) {
      std::size_t i = 0;
      while (i + 1 < dirs_.size() && s > cum_[i + 1]) ++i;
      return std::atan2(dirs_[i].y, dirs_[i].x);
    }
    double a = arc_angle_at(s);
    return wrap_angle(a + turn_ * kPi / 2.0);
  }

  /// Arc-length coordinate of the nearest path point.
  double project(Vec2 p) const {
    double best_s = 0.0;
    double best_d = std::numeric_limits<double>::infinity();
    if (!pts_.empty()) {
      PolylineProjection pr = project_to_polyline(pts_, p);
      best_s = pr.along;
      best_d = pr.lateral;
    }
    Vec2 rel = p - center_;
    double r = rel.norm();
    if (r > 0.0 && radius_ > 0.0) {
      double a = std::atan2(rel.y, rel.x);
      double along = poly_len_ + radius_ * wrap_positive(turn_ * (a - arc_start_));
      double d = std::abs(r - radius_);
      if (d < best_d) best_s = along;
    }
    return best_s;
  }

  double poly_length() const { return poly_len_; }
  double yield_s() const { return yield_s_; }
  double conflict_s() const { return poly_len_; }
  double radius() const { return radius_; }

 private:
  void init_polyline() {
    cum_.assign(1, 0.0);
    dirs_.clear();
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      Vec2 d = pts_[i + 1] - pts_[i];
      double len = d.norm();
      if (len <= 0.0) fail("schema", "path has a zero-length segment");
      dirs_.push_back(d * (1.0 / len));
      cum_.push_back(cum_.back() + len);
    }
    poly_len_ = cum_.back();
  }

  double arc_angle_at(double s) const {
    return arc_start_ + turn_ * (s - poly_len_) / radius_;
  }

  std::vector<Vec2> pts_;
  std::vector<Vec2> dirs_;
  std::vector<double> cum_{0.0};
  double poly_len_ = 0.0;
  Vec2 center_;
  double radius_ = 0.0;
  double arc_start_ = 0.0;
  double turn_ = 1.0;
  double yield_s_ = 0.0;
};

enum class Mode { Proceed = 0, Yield = 1, Stop = 2 };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Proceed: return "proceed";
    case Mode::Yield: return "yield";
    default: return "stop";
  }
}

inline constexpr int kModeFeatureCount = 6;

/// Linear scoring weights for the three behavior modes over the features
/// [speed, longitudinal accel, distance to yield, green, yellow, red].
struct ModeWeights {
  std::array<std::array<double, kModeFeatureCount>, 3> w{};
  std::array<double, 3> b{};

  friend bool operator==(const ModeWeights&, const ModeWeights&) = default;

  /// Hand-tuned defaults shipped with the toolkit.
  static ModeWeights tuned_defaults() {
    ModeWeights m;
    m.w[0] = {0.05, 0.30, 0.00, 2.5, -1.0, -4.0};   // proceed
    m.w[1] = {0.00, 0.00, 0.00, -1.0, 3.0, 0.5};    // yield
    m.w[2] = {-0.05, -2.00, -0.02, -2.5, -0.5, 4.0}; // stop
    m.b = {0.3, -0.5, -0.5};
    return m;
  }
};

struct ModeDistribution {
  std::array<double, 3> probabilities{};

  /// Highest-probability mode; ties resolve in declaration order, so proceed
  /// beats yield beats stop.
  Mode argmax() const {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (probabilities[static_cast<std::size_t>(i)] >
          probabilities[static_cast<std::size_t>(best)])
        best = i;
    return static_cast<Mode>(best);
  }
};

struct PredictorConfig {
  int history_steps = 3;   // H, observed steps before the current one
  int horizon_steps = 4;   // T, predicted steps
  double dt = 0.5;         // s
  bool use_dz_features = true;
  double creep_speed = 2.0;  // m/s held by the yield rollout

  friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

inline std::array<double, kModeFeatureCount> mode_features(const AgentState& state,
                                                           SignalState signal,
                                                           double dist_to_yield,
                                                           const PredictorConfig& cfg) {
  std::array<double, kModeFeatureCount> f{};
  f[0] = state.speed();
  f[1] = state.longitudinal_accel();
  if (cfg.use_dz_features) {
    f[2] = dist_to_yield;
    f[3] = signal == SignalState::Green ? 1.0 : 0.0;
    f[4] = signal == SignalState::Yellow ? 1.0 : 0.0;
    f[5] = signal == SignalState::Red ? 1.0 : 0.0;
  }
  return f;
}

/// Softmax over the per-mode linear scores of the latest observed state.
/// Requires at least history_steps + 1 observed states; only the newest one
/// enters the features.
inline ModeDistribution estimate_mode_distribution(std::span<const TimedState> history,
                                                   SignalState signal, double dist_to_yield,
                                                   const ModeWeights& weights,
                                                   const PredictorConfig& cfg) {
  if (history.size() < static_cast<std::size_t>(cfg.history_steps) + 1)
    fail("insufficient-history", "mode estimation needs history_steps + 1 states");
  std::array<double, kModeFeatureCount> f =
      mode_features(history.back().state, signal, dist_to_yield, cfg);
  std::array<double, 3> score = weights.b;
  for (int m = 0; m < 3; ++m)
    for (int k = 0; k < kModeFeatureCount; ++k)
      score[static_cast<std::size_t>(m)] +=
          weights.w[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] *
          f[static_cast<std::size_t>(k)];
  double mx = std::max({score[0], score[1], score[2]});
  std::array<double, 3> e{std::exp(score[0] - mx), std::exp(score[1] - mx),
                          std::exp(score[2] - mx)};
  double sum = e[0] + e[1] + e[2];
  ModeDistribution dist;
  for (int i = 0; i < 3; ++i) dist.probabilities[static_cast<std::size_t>(i)] = e[static_cast<std::size_t>(i)] / sum;
  return dist;
}

struct PredictedTrajectory {
  std::vector<Vec2> positions;  // horizon_steps samples, dt apart
  double dt = 0.5;
  Mode mode = Mode::Proceed;
};

/// Closed-form distance traveled after t seconds under a behavior mode.
inline double mode_travel(Mode mode, double v0, double t, const DzParams& dz,
                          double creep_speed) {
  switch (mode) {
    case Mode::Proceed:
      return v0 * t;
    case Mode::Stop: {
      double tb = v0 / dz.decel;
      if (t < tb) return v0 * t - 0.5 * dz.decel * t * t;
      return 0.5 * v0 * tb;
    }
    case Mode::Yield:
    default: {
      if (v0 <= creep_speed) return v0 * t;
      double a = dz.decel / 2.0;
      double tc = (v0 - creep_speed) / a;
      if (t < tc) return v0 * t - 0.5 * a * t * t;
      return (v0 * v0 - creep_speed * creep_speed) / (2.0 * a) + creep_speed * (t - tc);
    }
  }
}

/// Kinematic rollout along a path: proceed holds the current speed, stop
/// brakes at the comfortable deceleration until rest, yield brakes at half of
/// it down to a creep speed and holds the creep.
inline PredictedTrajectory rollout_mode(const AgentState& current, Mode mode,
                                        const EntryPath& path, const DzParams& dz,
                                        const PredictorConfig& cfg) {
  PredictedTrajectory out;
  out.dt = cfg.dt;
  out.mode = mode;
  double s0 = path.project(current.position);
  double v0 = current.speed();
  out.positions.reserve(static_cast<std::size_t>(cfg.horizon_steps));
  for (int k = 1; k <= cfg.horizon_steps; ++k) {
    double t = static_cast<double>(k) * cfg.dt;
    out.positions.push_back(path.point_at(s0 + mode_travel(mode, v0, t, dz, cfg.creep_speed)));
  }
  return out;
}

inline PredictedTrajectory rollout_mode(const AgentState& current, Mode mode,
                                        const ApproachLeg& leg, const RoundaboutMap& map,
                                        const DzParams& dz, const PredictorConfig& cfg) {
  return rollout_mode(current, mode, EntryPath::from_leg(leg, map), dz, cfg);
}

/// Full single-agent prediction. Approaching vehicles get the mode pipeline
/// (virtual signal, mode scores, rollout); circulating vehicles continue
/// around their current radius; anything off the mapped paths coasts straight.
inline PredictedTrajectory predict_most_likely(std::span<const TimedState> history,
                                               std::span<const TrackedAgent> scene,
                                               const RoundaboutMap& map,
                                               const ModeWeights& weights,
                                               const SignalParams& params,
                                               const PredictorConfig& cfg) {
  if (history.size() < static_cast<std::size_t>(cfg.history_steps) + 1)
    fail("insufficient-history", "prediction needs history_steps + 1 states");
  const AgentState& current = history.back().state;

  if (in_circulating_lane(current, map))
    return rollout_mode(current, Mode::Proceed, EntryPath::circle(current.position, map),
                        params.dz, cfg);

  std::optional<LegLocation> loc = locate_on_leg(current, map);
  if (loc) {
    const ApproachLeg& leg = map.legs[loc->leg_index];
    EntryPath path = EntryPath::from_leg(leg, map);
    if (loc->distance_to_yield > 0.0) {
      SignalResult sig = compute_signal(current, leg, scene, map, params);
      DzParams dz = params.dz;
      dz.road_width = map.lane_width;
      dz.vehicle_length = current.length;
      ModeDistribution dist = estimate_mode_distribution(history, sig.state,
                                                         loc->distance_to_yield, weights, cfg);
      return rollout_mode(current, dist.argmax(), path, dz, cfg);
    }
    return rollout_mode(current, Mode::Proceed, path, params.dz, cfg);
  }

  PredictedTrajectory out;
  out.dt = cfg.dt;
  out.mode = Mode::Proceed;
  for (int k = 1; k <= cfg.horizon_steps; ++k) {
    double t = static_cast<double>(k) * cfg.dt;
    out.positions.push_back(current.position + current.velocity * t);
  }
  return out;
}

struct DisplacementErrors {
  double ade = 0.0;
  std::vector<double> fde_per_step;
};

/// Average and per-step displacement error against the truth states that
/// follow the prediction instant.
inline DisplacementErrors displacement_errors(const PredictedTrajectory& pred,
                                              std::span<const TimedState> truth) {
  if (truth.size() < pred.positions.size())
    fail("horizon-mismatch", "truth segment shorter than the prediction horizon");
  DisplacementErrors e;
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.positions.size(); ++k) {
    double d = (pred.positions[k] - truth[k].state.position).norm();
    e.fde_per_step.push_back(d);
    sum += d;
  }
  e.ade = pred.positions.empty() ? 0.0 : sum / static_cast<double>(pred.positions.size());
  return e;
}

}  // namespace rdz
