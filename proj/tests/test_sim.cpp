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
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "rdz/io.hpp"
#include "rdz/sim.hpp"

using namespace rdz;
using Catch::Approx;

namespace {

/// Busy configuration with widened signal gates so dilemma decisions actually
/// occur; the shipped defaults keep the gates tight and events rare.
SimConfig busy_config(std::uint64_t seed) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.duration = 300.0;
  cfg.arrival_rate = 0.12;
  cfg.circulating_rate = 0.12;
  cfg.initial_circulating = 4;
  cfg.signal.t_max = 6.0;
  cfg.signal.d_t = 60.0;
  cfg.profile.dz_brake_probability = 1.0;
  cfg.profile.reaction_time = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("bounding-circle collision threshold", "[sim]") {
  AgentState a;
  AgentState b;  // both 4.5 m long: threshold 2.55 m
  b.position = {2.0, 0.0};
  CHECK(collision_check(a, b));
  b.position = {2.55, 0.0};
  CHECK_FALSE(collision_check(a, b));  // strict inequality at the threshold
  b.position = {2.6, 0.0};
  CHECK_FALSE(collision_check(a, b));
  b.position = {2.0, 0.0};
  b.length = 5.5;  // threshold grows to 2.8
  b.position = {2.7, 0.0};
  CHECK(collision_check(a, b));
}

TEST_CASE("identical seeds give byte-identical runs", "[sim]") {
  RoundaboutMap map = testing::make_test_map();
  SimConfig cfg;
  cfg.duration = 90.0;
  cfg.seed = 7;
  SimResult r1 = simulate(map, cfg);
  SimResult r2 = simulate(map, cfg);
  CHECK(serialize_trajectories(r1.trajectories) == serialize_trajectories(r2.trajectories));
  CHECK(r1.events == r2.events);
  CHECK(r1.hard_brake_count == r2.hard_brake_count);
  CHECK(r1.collisions.size() == r2.collisions.size());
  CHECK_FALSE(r1.trajectories.empty());

  SimConfig other = cfg;
  other.seed = 8;
  SimResult r3 = simulate(map, other);
  CHECK(serialize_trajectories(r1.trajectories) != serialize_trajectories(r3.trajectories));
}

TEST_CASE("zero demand produces an empty run", "[sim]") {
  RoundaboutMap map = testing::make_test_map();
  SimConfig cfg;
  cfg.duration = 30.0;
  cfg.arrival_rate = 0.0;
  cfg.circulating_rate = 0.0;
  cfg.initial_circulating = 0;
  SimResult r = simulate(map, cfg);
  CHECK(r.trajectories.empty());
  CHECK(r.events.empty());
  CHECK(r.collisions.empty());
  CHECK(r.hard_brake_count == 0);
}

TEST_CASE("recorded tracks stay physical", "[sim]") {
  RoundaboutMap map = testing::make_test_map();
  SimConfig cfg;
  cfg.duration = 120.0;
  cfg.arrival_rate = 0.08;
  cfg.seed = 11;
  SimResult r = simulate(map, cfg);
  REQUIRE_FALSE(r.trajectories.empty());

  AgentId prev = 0;
  for (const Trajectory& tr : r.trajectories) {
    CHECK(tr.agent_id > prev);  // ascending ids
    prev = tr.agent_id;
    REQUIRE_FALSE(tr.states.empty());
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      const TimedState& ts = tr.states[k];
      // Samples sit on the shared frame grid.
      double frames = ts.time / tr.dt;
      CHECK(std::abs(frames - std::round(frames)) < 1e-9);
      CHECK(std::isfinite(ts.state.position.x));
      CHECK(std::isfinite(ts.state.position.y));
      CHECK(ts.state.speed() < 16.0);
      if (k > 0) {
        double ds = (ts.state.position - tr.states[k - 1].state.position).norm();
        CHECK(ds <= 8.0);  // no teleportation at dt = 0.5
        CHECK(ts.time - tr.states[k - 1].time == Approx(tr.dt));
      }
    }
  }
}

TEST_CASE("with no brake propensity nobody ever brakes at the hard rate", "[sim]") {
  RoundaboutMap map = testing::make_test_map();
  SimConfig cfg;
  cfg.duration = 600.0;
  cfg.arrival_rate = 0.06;
  cfg.circulating_rate = 0.05;
  cfg.profile.dz_brake_probability = 0.0;
  cfg.seed = 3;
  SimResult r = simulate(map, cfg);
  CHECK(r.hard_brake_count == 0);
  double worst = 0.0;
  for (const Trajectory& tr : r.trajectories)
    for (const TimedState& ts : tr.states)
      worst = std::min(worst, ts.state.longitudinal_accel());
  CHECK(worst > -cfg.profile.hard_brake_decel * 0.9);
}

TEST_CASE("events match an independent labeling of the recorded tracks", "[sim]") {
  RoundaboutMap map = testing::make_test_map();
  SimConfig cfg = busy_config(21);
  cfg.duration = 180.0;
  SimResult r = simulate(map, cfg);
  CHECK(r.events == label_dz_events(r.trajectories, map, cfg.signal));
  FrameTable table(r.trajectories);
  for (const DzEvent& e : r.events) {
    CHECK(e.first_frame >= table.agent_first_frame(e.agent_id));
    CHECK(e.last_frame <= table.agent_last_frame(e.agent_id));
    CHECK(e.t_start == Approx(static_cast<double>(e.first_frame) * cfg.dt));
    CHECK(e.cause_id != 0);
    CHECK(e.cause_id != e.agent_id);
  }
}

TEST_CASE("unit brake propensity forces hard decelerations and events", "[sim]") {
  RoundaboutMap map = testing::make_test_map();
  SimConfig cfg = busy_config(5);
  SimResult r = simulate(map, cfg);
  CHECK(r.hard_brake_count >= 1);
  CHECK_FALSE(r.events.empty());
  double worst = 0.0;
  for (const Trajectory& tr : r.trajectories)
    for (const TimedState& ts : tr.states)
      worst = std::min(worst, ts.state.longitudinal_accel());
  CHECK(worst <= -0.9 * cfg.profile.hard_brake_decel);
}

TEST_CASE("scenario sampling mirrors the zone inequality", "[sim]") {
  RoundaboutMap map = testing::make_test_map();
  SimConfig cfg = busy_config(9);
  SimResult r = simulate(map, cfg);
  PredictorConfig pcfg;
  std::vector<ManeuverScenario> scenarios = sample_scenarios(r, map, cfg.signal, pcfg);
  REQUIRE_FALSE(scenarios.empty());

  auto need = static_cast<std::size_t>(pcfg.history_steps) + 1;
  for (const ManeuverScenario& sc : scenarios) {
    const Trajectory* ego = nullptr;
    double t_end = sc.histories.front().states.back().time;
    for (const Trajectory& tr : sc.histories) {
      REQUIRE(tr.states.size() == need);
      CHECK(tr.states.back().time == Approx(t_end));
      if (tr.agent_id == sc.ego_id) ego = &tr;
    }
    REQUIRE(ego != nullptr);

    const AgentState& st = ego->states.back().state;
    std::optional<LegLocation> loc = locate_on_leg(st, map);
    REQUIRE(loc.has_value());
    REQUIRE(loc->distance_to_yield > 0.0);
    DzParams dz = cfg.signal.dz;
    dz.road_width = map.lane_width;
    dz.vehicle_length = st.length;
    double d = loc->distance_to_yield;
    bool expect = (d - s_pass(dz)) < (s_stop(st.speed(), dz) - d);
    CHECK(sc.pass_opportunity == expect);
  }
}

TEST_CASE("maneuver grid bookkeeping", "[sim]") {
  RoundaboutMap map = testing::make_test_map();

  SECTION("scenario shortfall is reported") {
    std::vector<ManeuverScenario> few(3);
    few[0].pass_opportunity = true;
    try {
      maneuver_experiment(few, map, ModeWeights::tuned_defaults(), PredictorConfig{},
                          SignalParams{}, gnn_init(8, 1, 1), 100);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == "sample-shortfall");
    }
  }

  SECTION("cells partition the scenarios by forecast bucket") {
    SimConfig cfg = busy_config(9);
    SimResult r = simulate(map, cfg);
    PredictorConfig pcfg;
    std::vector<ManeuverScenario> scenarios = sample_scenarios(r, map, cfg.signal, pcfg);
    REQUIRE(scenarios.size() >= 4);
    if (scenarios.size() > 24) scenarios.resize(24);
    ManeuverReport rep =
        maneuver_experiment(scenarios, map, ModeWeights::tuned_defaults(), pcfg, cfg.signal,
                            gnn_init(8, 1, 42), 0, 1.0);
    for (std::size_t c = 0; c < rep.actions.size(); ++c) {
      CHECK(rep.high_pass[c].scenarios + rep.low_pass[c].scenarios ==
            static_cast<int>(scenarios.size()));
      CHECK(rep.high_pass[c].collision_free <= rep.high_pass[c].scenarios);
      CHECK(rep.low_pass[c].collision_free <= rep.low_pass[c].scenarios);
      CHECK(rep.high_pass[c].fraction() >= 0.0);
      CHECK(rep.high_pass[c].fraction() <= 1.0);
    }
  }
}
