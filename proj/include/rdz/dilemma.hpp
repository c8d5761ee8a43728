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
#include <utility>

#include "rdz/error.hpp"

namespace rdz {

/// 1 mph in m/s.
inline constexpr double kMphToMps = 0.44704;

/// Approach speeds used for zone computation are clamped to this band (15 to
/// 25 mph), matching the urban roundabouts the defaults were tuned for.
inline constexpr double kMinApproachSpeed = 6.7;
inline constexpr double kMaxApproachSpeed = 11.2;

inline double clamp_approach_speed(double v) {
  return std::clamp(v, kMinApproachSpeed, kMaxApproachSpeed);
}

/// Kinematic constants for the stop/pass boundary computation. road_width is
/// the width of the crossed road at the yield line and vehicle_length the
/// length of the subject vehicle; both are overridden from the map and the
/// observed vehicle when a concrete context is available.
struct DzParams {
  double reaction_time = 1.0;   // s
  double accel = 4.0;           // comfortable acceleration, m/s^2
  double decel = 3.05;          // comfortable braking deceleration, m/s^2
  double road_width = 4.0;      // W, m
  double vehicle_length = 4.5;  // L, m

  friend bool operator==(const DzParams&, const DzParams&) = default;
};

inline void validate(const DzParams& p) {
  if (!(p.reaction_time > 0.0) || !(p.accel > 0.0) || !(p.decel > 0.0) ||
      !(p.road_width > 0.0) || !(p.vehicle_length > 0.0))
    fail("schema", "dilemma-zone parameters must all be positive");
}

/// Minimum distance from which the vehicle can still clear the conflict area
/// during the reaction interval: W + L + a*delta^2/2.
inline double s_pass(const DzParams& p) {
  return p.road_width + p.vehicle_length +
         0.5 * p.accel * p.reaction_time * p.reaction_time;
}

/// Minimum distance needed to come to a comfortable stop from speed v0:
/// v0*delta + v0^2/(2*a_dec).
inline double s_stop(double v0, const DzParams& p) {
  return v0 * p.reaction_time + v0 * v0 / (2.0 * p.decel);
}

enum class ZoneKind { Dilemma, Option };

struct ZoneResult {
  double s_pass = 0.0;
  double s_stop = 0.0;
  ZoneKind kind = ZoneKind::Option;
  // Lower/upper distance bound of the zone between the two thresholds.
  std::pair<double, double> interval{0.0, 0.0};
};

/// A dilemma zone exists when the stopping requirement strictly exceeds the
/// passing requirement; the tie falls to the benign option zone.
inline ZoneResult classify_zone(double v0, const DzParams& p) {
  ZoneResult r;
  r.s_pass = s_pass(p);
  r.s_stop = s_stop(v0, p);
  r.kind = r.s_stop > r.s_pass ? ZoneKind::Dilemma : ZoneKind::Option;
  r.interval = {std::min(r.s_pass, r.s_stop), std::max(r.s_pass, r.s_stop)};
  return r;
}

/// True when a dilemma zone exists for v0 and the distance to the yield line
/// falls strictly inside it.
inline bool in_dilemma_zone(double distance, double v0, const DzParams& p) {
  ZoneResult r = classify_zone(v0, p);
  return r.kind == ZoneKind::Dilemma && distance > r.s_pass && distance < r.s_stop;
}

}  // namespace rdz
