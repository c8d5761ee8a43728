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

#include <cmath>
#include <vector>

#include "rdz/geometry.hpp"

namespace rdz::testing {

/// Radial four-leg map: center (0,0), annulus [10, 16], counter-clockwise.
/// Each leg runs inbound from radius 60 to 17 with the yield line at 17 and
/// the conflict point at radius 13 on the same ray.
inline RoundaboutMap make_test_map() {
  RoundaboutMap map;
  map.center = {0.0, 0.0};
  map.inner_radius = 10.0;
  map.outer_radius = 16.0;
  map.lane_width = 4.0;
  map.circulation = Circulation::CounterClockwise;
  const char* names[4] = {"east", "north", "west", "south"};
  for (int i = 0; i < 4; ++i) {
    double a = kPi / 2.0 * static_cast<double>(i);
    Vec2 dir{std::cos(a), std::sin(a)};
    ApproachLeg leg;
    leg.leg_id = names[i];
    leg.centerline = {dir * 60.0, dir * 17.0};
    leg.yield_point = dir * 17.0;
    leg.conflict_point = dir * 13.0;
    map.legs.push_back(leg);
  }
  return map;
}

/// Vehicle on the east leg at the given distance upstream of the yield line,
/// driving inbound at the given speed.
inline AgentState approach_state(double dist_to_yield, double speed,
                                 double accel_along = 0.0) {
  AgentState s;
  s.position = {17.0 + dist_to_yield, 0.0};
  s.velocity = {-speed, 0.0};
  s.acceleration = {-accel_along, 0.0};
  s.heading = kPi;  // wrapped representative of -x
  return s;
}

/// Circulating vehicle at the given polar angle, moving counter-clockwise.
inline AgentState ring_state(const RoundaboutMap& map, double radius, double angle,
                             double speed) {
  AgentState s;
  s.position = map.center + Vec2{radius * std::cos(angle), radius * std::sin(angle)};
  s.velocity = Vec2{-std::sin(angle), std::cos(angle)} * speed;
  s.heading = wrap_angle(angle + kPi / 2.0);
  return s;
}

/// Constant-velocity straight-line trajectory sampled on the frame grid.
inline Trajectory straight_trajectory(AgentId id, Vec2 start, Vec2 velocity, double dt,
                                      int steps, double t0 = 0.0) {
  Trajectory t;
  t.agent_id = id;
  t.dt = dt;
  for (int k = 0; k < steps; ++k) {
    TimedState ts;
    ts.time = t0 + static_cast<double>(k) * dt;
    ts.state.position = start + velocity * (static_cast<double>(k) * dt);
    ts.state.velocity = velocity;
    ts.state.heading = std::atan2(velocity.y, velocity.x);
    t.states.push_back(ts);
  }
  return t;
}

}  // namespace rdz::testing
