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
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdz/error.hpp"

namespace rdz {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;

  double norm() const { return std::hypot(x, y); }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
};

/// Wrap an angle into [-pi, pi).
inline double wrap_angle(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w >= kPi) w -= kTwoPi;
  return w;
}

/// Wrap an angle difference into [0, 2*pi).
inline double wrap_positive(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

using AgentId = std::int64_t;

/// One observed vehicle state. heading is radians in [-pi, pi); length and
/// width are the vehicle footprint in meters.
struct AgentState {
  Vec2 position;
  Vec2 velocity;
  Vec2 acceleration;
  double heading = 0.0;
  double length = 4.5;
  double width = 1.8;

  double speed() const { return velocity.norm(); }

  Vec2 heading_dir() const { return {std::cos(heading), std::sin(heading)}; }

  /// Acceleration component along the heading. Negative while braking.
  double longitudinal_accel() const { return acceleration.dot(heading_dir()); }
};

struct TimedState {
  double time = 0.0;
  AgentState state;
};

/// A scene entry: one agent at one instant.
struct TrackedAgent {
  AgentId id = 0;
  AgentState state;
};

/// Uniformly sampled track of a single agent. Timestamps must be strictly
/// increasing and spaced by dt within 1e-9.
struct Trajectory {
  AgentId agent_id = 0;
  double dt = 0.5;
  std::vector<TimedState> states;
};

inline void validate(const Trajectory& t) {
  if (t.states.empty()) fail("schema", "trajectory has no states");
  if (!(t.dt > 0.0)) fail("schema", "trajectory dt must be positive");
  for (std::size_t i = 1; i < t.states.size(); ++i) {
    double gap = t.states[i].time - t.states[i - 1].time;
    if (!(gap > 0.0)) fail("schema", "trajectory timestamps not increasing");
    if (std::abs(gap - t.dt) > 1e-9) fail("schema", "trajectory not uniformly sampled");
  }
}

/// One entry road. The centerline is ordered toward the roundabout; the yield
/// point lies on it and the conflict point lies inside the circulating lane.
struct ApproachLeg {
  std::string leg_id;
  std::vector<Vec2> centerline;
  Vec2 yield_point;
  Vec2 conflict_point;

  friend bool operator==(const ApproachLeg&, const ApproachLeg&) = default;
};

enum class Circulation { CounterClockwise, Clockwise };

struct RoundaboutMap {
  Vec2 center;
  double inner_radius = 10.0;
  double outer_radius = 16.0;
  double lane_width = 4.0;
  Circulation circulation = Circulation::CounterClockwise;
  std::vector<ApproachLeg> legs;

  friend bool operator==(const RoundaboutMap&, const RoundaboutMap&) = default;
};

struct PolylineProjection {
  std::size_t segment = 0;  // index of the segment's first vertex
  double along = 0.0;       // arc length from the polyline start to the foot
  double lateral = 0.0;     // unsigned perpendicular distance
  Vec2 point;
};

/// Nearest-point projection onto a polyline. Ties between adjacent segments
/// resolve to the later segment, i.e. toward the roundabout end of a leg.
inline PolylineProjection project_to_polyline(std::span<const Vec2> pts, Vec2 p) {
  if (pts.size() < 2) fail("schema", "polyline needs at least two points");
  PolylineProjection best;
  double best_d = std::numeric_limits<double>::infinity();
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Vec2 a = pts[i];
    Vec2 ab = pts[i + 1] - a;
    double len = ab.norm();
    if (len <= 0.0) continue;
    double t = std::clamp((p - a).dot(ab) / (len * len), 0.0, 1.0);
    Vec2 q = a + ab * t;
    double d = (p - q).norm();
    if (d <= best_d) {
      best = {i, cum + t * len, d, q};
      best_d = d;
    }
    cum += len;
  }
  return best;
}

inline double polyline_length(std::span<const Vec2> pts) {
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) cum += (pts[i + 1] - pts[i]).norm();
  return cum;
}

/// Signed arc distance from the vehicle's centerline projection to the yield
/// point: positive upstream of the line, negative past it. lane_width bounds
/// the accepted perpendicular offset.
inline double distance_to_yield(const AgentState& state, const ApproachLeg& leg,
                                double lane_width) {
  PolylineProjection here = project_to_polyline(leg.centerline, state.position);
  if (!(here.lateral < lane_width))
    fail("not-on-leg", "vehicle does not project onto leg '" + leg.leg_id + "'");
  PolylineProjection yield = project_to_polyline(leg.centerline, leg.yield_point);
  return yield.along - here.along;
}

inline bool in_circulating_lane(const AgentState& state, const RoundaboutMap& map) {
  double r = (state.position - map.center).norm();
  return r >= map.inner_radius && r <= map.outer_radius;
}

inline double angle_about_center(const RoundaboutMap& map, Vec2 p) {
  return std::atan2(p.y - map.center.y, p.x - map.center.x);
}

/// Arc length, along the circle of the vehicle's current radius and in the
/// map's circulation direction, to the angular position of the leg's conflict
/// point. Result lies in [0, 2*pi*r).
inline double arc_distance_to_conflict(const AgentState& state, const ApproachLeg& leg,
                                       const RoundaboutMap& map) {
  if (!in_circulating_lane(state, map))
    fail("not-circulating", "vehicle is outside the circulating lane");
  double r = (state.position - map.center).norm();
  double a_vehicle = angle_about_center(map, state.position);
  double a_conflict = angle_about_center(map, leg.conflict_point);
  double diff = map.circulation == Circulation::CounterClockwise ? a_conflict - a_vehicle
                                                                 : a_vehicle - a_conflict;
  return r * wrap_positive(diff);
}

inline void validate(const RoundaboutMap& map) {
  if (!(map.inner_radius > 0.0) || !(map.outer_radius > map.inner_radius))
    fail("schema", "map radii must satisfy 0 < inner < outer");
  if (!(map.lane_width > 0.0)) fail("schema", "map lane_width must be positive");
  if (map.legs.empty()) fail("schema", "map needs at least one approach leg");
  for (const ApproachLeg& leg : map.legs) {
    if (leg.centerline.size() < 2)
      fail("schema", "leg '" + leg.leg_id + "' centerline needs at least two points");
    PolylineProjection y = project_to_polyline(leg.centerline, leg.yield_point);
    if (y.lateral > 1e-6)
      fail("schema", "leg '" + leg.leg_id + "' yield point is off the centerline");
    double rc = (leg.conflict_point - map.center).norm();
    if (rc < map.inner_radius || rc > map.outer_radius)
      fail("schema", "leg '" + leg.leg_id + "' conflict point is outside the circulating lane");
  }
}

struct LegLocation {
  std::size_t leg_index = 0;
  double distance_to_yield = 0.0;
  double lateral = 0.0;
};

/// Find the leg whose centerline the vehicle projects onto, if any. Picks the
/// smallest perpendicular offset below the map lane width. Vehicles inside the
/// circulating lane never match.
inline std::optional<LegLocation> locate_on_leg(const AgentState& state,
                                                const RoundaboutMap& map) {
  if (in_circulating_lane(state, map)) return std::nullopt;
  std::optional<LegLocation> best;
  for (std::size_t i = 0; i < map.legs.size(); ++i) {
    PolylineProjection p = project_to_polyline(map.legs[i].centerline, state.position);
    if (p.lateral < map.lane_width && (!best || p.lateral < best->lateral)) {
      PolylineProjection y =
          project_to_polyline(map.legs[i].centerline, map.legs[i].yield_point);
      best = LegLocation{i, y.along - p.along, p.lateral};
    }
  }
  return best;
}

}  // namespace rdz
