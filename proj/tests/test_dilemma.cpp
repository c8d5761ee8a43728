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

#include <catch2/catch_amalgamated.hpp>

#include "rdz/dilemma.hpp"
#include "rdz/rng.hpp"

using namespace rdz;
using Catch::Approx;

namespace {

/// Independent oracle: integrate the braking maneuver at a fine time step. The
/// vehicle holds v0 for the reaction interval, then decelerates at a constant
/// rate until rest; the traveled distance is the stopping requirement.
double simulated_stop_distance(double v0, const DzParams& p, double step = 1e-3) {
  double t = 0.0;
  double x = 0.0;
  double v = v0;
  while (t < p.reaction_time) {
    x += v * step;
    t += step;
  }
  while (v > 0.0) {
    v -= p.decel * step;
    if (v < 0.0) v = 0.0;
    x += v * step;
  }
  return x;
}

}  // namespace

TEST_CASE("passing distance hand values", "[dilemma]") {
  DzParams p;
  p.road_width = 10.0;
  p.vehicle_length = 4.5;
  p.accel = 2.0;
  p.reaction_time = 1.0;
  CHECK(s_pass(p) == Approx(15.5).margin(1e-12));

  p.reaction_time = 1e-300;  // acceleration term vanishes
  CHECK(s_pass(p) == Approx(p.road_width + p.vehicle_length).margin(1e-12));

  DzParams q;
  q.road_width = 7.2;
  q.vehicle_length = 4.0;
  q.accel = 4.0;
  q.reaction_time = 1.5;
  CHECK(s_pass(q) == Approx(15.7).margin(1e-12));
}

TEST_CASE("stopping distance hand values", "[dilemma]") {
  DzParams p;  // reaction 1.0, decel 3.05 defaults
  CHECK(s_stop(0.0, p) == 0.0);

  double v25 = 11.176;  // 25 mph
  CHECK(s_stop(v25, p) == Approx(v25 + v25 * v25 / 6.10).margin(1e-12));
  CHECK(s_stop(v25, p) == Approx(31.65).margin(5e-3));

  double v15 = 6.7;  // 15 mph
  CHECK(s_stop(v15, p) == Approx(14.06).margin(5e-3));
}

TEST_CASE("stopping distance matches a fine-step braking simulation", "[dilemma]") {
  DzParams p;
  // Pinned draws first, then a seeded sweep over the urban speed range.
  for (double v0 : {0.0, 3.0, 6.7, 10.0, 11.176, 15.0})
    CHECK(s_stop(v0, p) == Approx(simulated_stop_distance(v0, p)).margin(1e-2));

  Rng rng(41);
  for (int i = 0; i < 200; ++i) {
    double v0 = rng.uniform(0.0, 15.0);
    CHECK(s_stop(v0, p) == Approx(simulated_stop_distance(v0, p)).margin(1e-2));
  }
}

TEST_CASE("zone classification uses the strict inequality", "[dilemma]") {
  DzParams p;
  p.road_width = 10.0;
  p.vehicle_length = 4.5;
  p.accel = 2.0;

  ZoneResult dz = classify_zone(11.176, p);
  CHECK(dz.kind == ZoneKind::Dilemma);
  CHECK(dz.s_pass == Approx(15.5));
  CHECK(dz.s_stop > dz.s_pass);

  CHECK(classify_zone(0.0, p).kind == ZoneKind::Option);

  // Exact tie: s_stop = 6 + 36/6 = 12, s_pass = 6 + 5.5 + 0.5 = 12.
  DzParams tie;
  tie.reaction_time = 1.0;
  tie.decel = 3.0;
  tie.road_width = 6.0;
  tie.vehicle_length = 5.5;
  tie.accel = 1.0;
  ZoneResult t = classify_zone(6.0, tie);
  REQUIRE(t.s_stop == t.s_pass);
  CHECK(t.kind == ZoneKind::Option);
}

TEST_CASE("zone interval endpoints are the ordered pair of the two distances", "[dilemma]") {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    DzParams p;
    p.reaction_time = rng.uniform(0.2, 2.5);
    p.accel = rng.uniform(0.5, 4.0);
    p.decel = rng.uniform(1.0, 6.0);
    p.road_width = rng.uniform(3.0, 12.0);
    p.vehicle_length = rng.uniform(3.5, 6.0);
    double v0 = rng.uniform(0.0, 15.0);
    ZoneResult r = classify_zone(v0, p);
    CHECK(r.interval.first == std::min(r.s_pass, r.s_stop));
    CHECK(r.interval.second == std::max(r.s_pass, r.s_stop));
    CHECK((r.kind == ZoneKind::Dilemma) == (r.s_stop > r.s_pass));
    CHECK((in_dilemma_zone(0.5 * (r.interval.first + r.interval.second), v0, p)) ==
          (r.kind == ZoneKind::Dilemma && r.interval.second > r.interval.first));
  }
}

TEST_CASE("zone membership is an open interval", "[dilemma]") {
  DzParams p;
  p.road_width = 10.0;
  p.vehicle_length = 4.5;
  p.accel = 2.0;
  double v0 = 11.176;
  ZoneResult r = classify_zone(v0, p);
  REQUIRE(r.kind == ZoneKind::Dilemma);

  CHECK(in_dilemma_zone(20.0, v0, p));
  CHECK_FALSE(in_dilemma_zone(r.s_pass, v0, p));   // lower boundary excluded
  CHECK_FALSE(in_dilemma_zone(r.s_stop, v0, p));   // upper boundary excluded
  CHECK_FALSE(in_dilemma_zone(5.0, v0, p));
  CHECK_FALSE(in_dilemma_zone(50.0, v0, p));

  // Option zone: no distance qualifies.
  for (double d : {0.0, 5.0, 12.0, 100.0}) CHECK_FALSE(in_dilemma_zone(d, 0.0, p));
}

TEST_CASE("stopping distance is monotone in speed and braking rate", "[dilemma]") {
  Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    DzParams p;
    p.reaction_time = rng.uniform(0.2, 2.5);
    p.decel = rng.uniform(1.0, 6.0);
    double v0 = rng.uniform(0.01, 15.0);
    double dv = rng.uniform(0.01, 2.0);
    CHECK(s_stop(v0 + dv, p) > s_stop(v0, p));

    DzParams harder = p;
    harder.decel = p.decel + rng.uniform(0.01, 2.0);
    CHECK(s_stop(v0, harder) < s_stop(v0, p));
  }
}

TEST_CASE("approach speeds clamp to the urban band", "[dilemma]") {
  CHECK(clamp_approach_speed(3.0) == kMinApproachSpeed);
  CHECK(clamp_approach_speed(20.0) == kMaxApproachSpeed);
  CHECK(clamp_approach_speed(9.0) == 9.0);
  CHECK(15.0 * kMphToMps == Approx(6.7056));
  CHECK(25.0 * kMphToMps == Approx(11.176));
}

TEST_CASE("parameter validation requires positive fields", "[dilemma]") {
  DzParams p;
  REQUIRE_NOTHROW(validate(p));
  p.decel = 0.0;
  CHECK_THROWS_AS(validate(p), Error);
  p = DzParams{};
  p.reaction_time = -1.0;
  CHECK_THROWS_AS(validate(p), Error);
}
