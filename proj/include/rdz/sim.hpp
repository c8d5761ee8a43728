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
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "rdz/forecaster.hpp"
#include "rdz/rng.hpp"

namespace rdz {

/// Behavioral parameters shared by every simulated driver except the desired
/// speed, which is sampled per vehicle inside [min, max] of the config and
/// clamped to the supported 15-25 mph approach band.
struct DriverProfile {
  double desired_speed = 9.0;        // m/s
  double reaction_time = 1.0;        // s between the brake decision and the pedal
  double hard_brake_decel = 6.5;     // m/s^2, the abnormal-event braking rate
  double dz_brake_probability = 0.95;

  friend bool operator==(const DriverProfile&, const DriverProfile&) = default;
};

struct SimConfig {
  double dt = 0.5;                   // recording interval, s
  int substeps = 5;                  // dynamics steps per recorded frame
  double duration = 300.0;           // s
  double arrival_rate = 0.05;        // vehicles/s per approach leg
  double circulating_rate = 0.06;    // vehicles/s injected onto the ring
  int initial_circulating = 2;
  // Desired-speed band; defaults are the exact 15 and 25 mph conversions so a
  // default config file parses back to this struct unchanged.
  double min_desired_speed = 15.0 * kMphToMps;
  double max_desired_speed = 25.0 * kMphToMps;
  double circulating_speed = 8.0;    // m/s held on the ring
  double exit_travel = 4.0;          // radians of ring travel before leaving
  double accel_max = 2.0;            // m/s^2 free acceleration
  double comfort_decel = 2.0;        // m/s^2 routine braking
  double time_gap = 2.0;             // s car-following headway
  double min_entry_gap = 2.5;        // s of circulating TTC required to enter
  DriverProfile profile;
  SignalParams signal;               // gates plus DzParams; also labels events
  std::uint64_t seed = 1;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

inline void validate(const SimConfig& c) {
  if (!(c.dt > 0.0) || c.substeps < 1) fail("schema", "sim dt/substeps invalid");
  if (!(c.duration >= 0.0)) fail("schema", "sim duration must be non-negative");
  if (c.arrival_rate < 0.0 || c.circulating_rate < 0.0 || c.initial_circulating < 0)
    fail("schema", "sim rates must be non-negative");
  if (!(c.min_desired_speed <= c.max_desired_speed))
    fail("schema", "sim desired speed range is inverted");
  if (!(c.profile.dz_brake_probability >= 0.0 && c.profile.dz_brake_probability <= 1.0))
    fail("schema", "dz_brake_probability must lie in [0,1]");
  if (!(c.profile.reaction_time >= 0.0) || !(c.profile.hard_brake_decel > 0.0))
    fail("schema", "driver profile braking fields invalid");
  validate(c.signal.dz);
}

/// Bounding-circle overlap: center distance under half the mean length plus a
/// 0.3 m clearance.
inline bool collision_check(const AgentState& a, const AgentState& b) {
  double threshold = (a.length + b.length) * 0.5 * 0.5 + 0.3;
  return (a.position - b.position).norm() < threshold;
}

struct CollisionRecord {
  double time = 0.0;
  AgentId a = 0;
  AgentId b = 0;
};

struct SimResult {
  std::vector<Trajectory> trajectories;   // ascending agent id
  std::vector<DzEvent> events;            // ground truth via label_dz_events
  std::vector<CollisionRecord> collisions;
  long hard_brake_count = 0;              // sampled brake decisions
};

namespace detail {

struct SimAgent {
  AgentId id = 0;
  int leg = -1;                    // -1 means ring-native
  const EntryPath* path = nullptr; // shared per-leg path when leg >= 0
  double s = 0.0;                  // arc length along path
  double angle = 0.0;              // ring-native angular position
  double travel = 0.0;             // ring-native angular travel so far
  double radius = 0.0;             // ring-native radius
  double speed = 0.0;
  double accel = 0.0;              // applied longitudinal acceleration
  double desired_speed = 8.0;
  bool cleared = false;            // entry allowed this frame
  bool committed = false;          // sticky clearance (passer or past the line)
  bool dz_decided = false;
  bool will_brake = false;
  bool brake_done = false;
  double brake_at = std::numeric_limits<double>::infinity();
  bool dead = false;
};

inline AgentState sim_agent_state(const SimAgent& a, const RoundaboutMap& map) {
  AgentState st;
  double heading;
  if (a.leg >= 0) {
    st.position = a.path->point_at(a.s);
    heading = a.path->heading_at(a.s);
  } else {
    st.position = map.center + Vec2{a.radius * std::cos(a.angle), a.radius * std::sin(a.angle)};
    double turn = map.circulation == Circulation::CounterClockwise ? 1.0 : -1.0;
    heading = wrap_angle(a.angle + turn * kPi / 2.0);
  }
  st.heading = heading;
  Vec2 dir{std::cos(heading), std::sin(heading)};
  st.velocity = dir * a.speed;
  st.acceleration = dir * a.accel;
  return st;
}

/// Forward displacement over step dt under acceleration a with a hard floor at
/// zero speed; also advances v.
inline double roll_forward(double& v, double a, double dt) {
  double v1 = v + a * dt;
  double ds;
  if (v1 < 0.0) {
    double t_stop = a < 0.0 ? -v / a : 0.0;
    ds = v * t_stop + 0.5 * a * t_stop * t_stop;
    v1 = 0.0;
  } else {
    ds = v * dt + 0.5 * a * dt * dt;
  }
  v = v1;
  return std::max(ds, 0.0);
}

}  // namespace detail

/// Deterministic seeded roundabout run. Per-frame Bernoulli arrivals feed the
/// legs and the ring; approach vehicles track their desired speed behind a
/// time-gap leader and stop at the yield line unless entry is clear; each
/// frame the virtual signal runs, Red forces a line stop and a non-Green
/// signal inside the dilemma zone draws a one-time hard-brake decision with a
/// reaction delay;
/// ring vehicles hold constant speed on the annulus centerline and leave after
/// a fixed angular travel. Colliding pairs are recorded and removed.
inline SimResult simulate(const RoundaboutMap& map, const SimConfig& cfg) {
  validate(map);
  validate(cfg);
  Rng rng(cfg.seed);
  double turn = map.circulation == Circulation::CounterClockwise ? 1.0 : -1.0;
  double ring_radius = 0.5 * (map.inner_radius + map.outer_radius);

  std::vector<EntryPath> leg_paths;
  leg_paths.reserve(map.legs.size());
  for (const ApproachLeg& leg : map.legs) leg_paths.push_back(EntryPath::from_leg(leg, map));

  std::vector<detail::SimAgent> agents;
  AgentId next_id = 1;
  std::map<AgentId, std::vector<TimedState>> recorded;
  SimResult out;

  auto state_of = [&map](const detail::SimAgent& a) { return detail::sim_agent_state(a, map); };

  auto ring_clear = [&](double angle) {
    Vec2 pos = map.center + Vec2{ring_radius * std::cos(angle), ring_radius * std::sin(angle)};
    for (const detail::SimAgent& a : agents)
      if ((state_of(a).position - pos).norm() < 8.0) return false;
    return true;
  };

  auto spawn_ring = [&](double angle, double speed) {
    if (!ring_clear(angle)) return;
    detail::SimAgent a;
    a.id = next_id++;
    a.leg = -1;
    a.angle = wrap_angle(angle);
    a.radius = ring_radius;
    a.speed = speed;
    a.desired_speed = speed;
    a.committed = true;
    agents.push_back(a);
  };

  auto spawn_leg = [&](int leg, double speed) {
    for (const detail::SimAgent& a : agents)
      if (a.leg == leg && a.s < 10.0) return;
    detail::SimAgent a;
    a.id = next_id++;
    a.leg = leg;
    a.path = &leg_paths[static_cast<std::size_t>(leg)];
    a.s = 0.0;
    a.speed = speed;
    a.desired_speed = speed;
    agents.push_back(a);
  };

  for (int i = 0; i < cfg.initial_circulating; ++i)
    spawn_ring(rng.uniform(0.0, kTwoPi), cfg.circulating_speed);

  auto n_frames = static_cast<std::int64_t>(std::llround(cfg.duration / cfg.dt));
  double sub_dt = cfg.dt / static_cast<double>(cfg.substeps);

  for (std::int64_t f = 0; f <= n_frames; ++f) {
    double now = static_cast<double>(f) * cfg.dt;

    if (f < n_frames) {
      for (std::size_t leg = 0; leg < map.legs.size(); ++leg)
        if (rng.bernoulli(cfg.arrival_rate * cfg.dt)) {
          double v = clamp_approach_speed(
              rng.uniform(cfg.min_desired_speed, cfg.max_desired_speed));
          spawn_leg(static_cast<int>(leg), v);
        }
      if (rng.bernoulli(cfg.circulating_rate * cfg.dt))
        spawn_ring(rng.uniform(0.0, kTwoPi), cfg.circulating_speed);
    }

    for (const detail::SimAgent& a : agents)
      recorded[a.id].push_back({now, state_of(a)});
    if (f == n_frames) break;

    std::vector<TrackedAgent> scene;
    scene.reserve(agents.size());
    for (const detail::SimAgent& a : agents) scene.push_back({a.id, state_of(a)});

    // Frame-level decisions: signal, dilemma reaction, entry clearance.
    for (detail::SimAgent& a : agents) {
      if (a.leg < 0) continue;
      double d = a.path->yield_s() - a.s;
      if (d <= 0.0) {
        a.cleared = true;
        a.committed = true;
        continue;
      }
      const ApproachLeg& leg = map.legs[static_cast<std::size_t>(a.leg)];
      AgentState st = state_of(a);
      SignalResult sig = compute_signal(st, leg, scene, map, cfg.signal);

      if (!a.dz_decided && sig.state != SignalState::Green) {
        DzParams dz = cfg.signal.dz;
        dz.road_width = map.lane_width;
        dz.vehicle_length = st.length;
        if (in_dilemma_zone(d, a.speed, dz)) {
          a.dz_decided = true;
          a.will_brake = rng.bernoulli(cfg.profile.dz_brake_probability);
          if (a.will_brake) {
            a.brake_at = now + cfg.profile.reaction_time;
            ++out.hard_brake_count;
          } else {
            a.committed = true;  // decided to clear; stops yielding to the line
          }
        }
      }

      if (a.committed) {
        a.cleared = true;
      } else if (sig.state == SignalState::Red) {
        a.cleared = false;
      } else {
        bool ok = true;
        for (const detail::SimAgent& other : agents) {
          if (other.id == a.id) continue;
          AgentState os = state_of(other);
          if (!in_circulating_lane(os, map)) continue;
          if (time_to_collision(os, leg, map) < cfg.min_entry_gap) {
            ok = false;
            break;
          }
        }
        a.cleared = ok;
      }
    }

    for (int k = 0; k < cfg.substeps; ++k) {
      double sub_now = now + static_cast<double>(k) * sub_dt;

      struct Snap {
        int leg;
        double s;
        double speed;
      };
      std::vector<Snap> snap;
      snap.reserve(agents.size());
      for (const detail::SimAgent& a : agents) snap.push_back({a.leg, a.s, a.speed});

      for (std::size_t i = 0; i < agents.size(); ++i) {
        detail::SimAgent& a = agents[i];
        double target = a.desired_speed;
        if (a.leg >= 0 && a.s >= a.path->yield_s()) target = cfg.circulating_speed;
        if (a.leg < 0) target = cfg.circulating_speed;
        double acc = std::clamp(target - a.speed, -cfg.comfort_decel, cfg.accel_max);

        if (a.leg >= 0) {
          // Time-gap follower behind the nearest leader on the same path.
          double lead_s = std::numeric_limits<double>::infinity();
          double lead_v = 0.0;
          for (std::size_t j = 0; j < agents.size(); ++j) {
            if (j == i || snap[j].leg != a.leg) continue;
            if (snap[j].s > snap[i].s && snap[j].s < lead_s) {
              lead_s = snap[j].s;
              lead_v = snap[j].speed;
            }
          }
          if (std::isfinite(lead_s)) {
            double gap = lead_s - a.s - 4.5;
            double follow = 0.5 * (gap - a.speed * cfg.time_gap) + 1.2 * (lead_v - a.speed);
            acc = std::min(acc, std::clamp(follow, -cfg.signal.dz.decel, cfg.accel_max));
          }

          double d = a.path->yield_s() - a.s;
          if (d > 0.0 && !a.cleared) {
            double margin = std::max(d - 0.3, 0.05);
            double needed = a.speed * a.speed / (2.0 * margin);
            if (d <= 0.5 && a.speed <= 0.3) {
              a.speed = 0.0;
              acc = 0.0;
            } else if (needed >= 0.7 * cfg.comfort_decel) {
              acc = std::min(acc, -std::min(needed, cfg.signal.dz.decel));
            }
          }
        }

        if (a.will_brake && !a.brake_done && sub_now >= a.brake_at) {
          if (a.speed > 0.0)
            acc = -cfg.profile.hard_brake_decel;
          else
            a.brake_done = true;
        }

        double ds = detail::roll_forward(a.speed, acc, sub_dt);
        a.accel = acc;
        if (a.leg >= 0) {
          a.s += ds;
          if ((a.s - a.path->conflict_s()) / a.path->radius() >= cfg.exit_travel) a.dead = true;
        } else {
          a.angle = wrap_angle(a.angle + turn * ds / a.radius);
          a.travel += ds / a.radius;
          if (a.travel >= cfg.exit_travel) a.dead = true;
        }
      }

      for (std::size_t i = 0; i < agents.size(); ++i) {
        if (agents[i].dead) continue;
        AgentState si = state_of(agents[i]);
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
          if (agents[j].dead) continue;
          AgentState sj = state_of(agents[j]);
          if (collision_check(si, sj)) {
            out.collisions.push_back({sub_now + sub_dt, agents[i].id, agents[j].id});
            agents[i].dead = true;
            agents[j].dead = true;
            break;
          }
        }
      }
      std::erase_if(agents, [](const detail::SimAgent& a) { return a.dead; });
    }
  }

  for (auto& [id, states] : recorded)
    out.trajectories.push_back({id, cfg.dt, std::move(states)});
  out.events = label_dz_events(out.trajectories, map, cfg.signal);
  return out;
}

/// One frozen moment extracted from a run: short per-agent histories ending at
/// the scenario instant, the vehicle holding the dilemma event, and which side
/// of the zone it sampled on.
struct ManeuverScenario {
  std::vector<Trajectory> histories;
  AgentId ego_id = 0;
  bool pass_opportunity = false;   // ego nearer the clearing boundary than the stopping one
  double follower_gap = std::numeric_limits<double>::infinity();  // m to the nearest same-leg follower
};

/// Extract a scenario at the onset frame of every labeled event. Histories
/// cover history_steps+1 frames; agents that appeared later are back-filled at
/// constant velocity so the scene keeps every participant.
inline std::vector<ManeuverScenario> sample_scenarios(const SimResult& sim,
                                                      const RoundaboutMap& map,
                                                      const SignalParams& params,
                                                      const PredictorConfig& pcfg) {
  std::vector<ManeuverScenario> out;
  if (sim.trajectories.empty()) return out;
  FrameTable table(sim.trajectories);
  auto need = static_cast<std::int64_t>(pcfg.history_steps) + 1;

  for (const DzEvent& e : sim.events) {
    std::int64_t t0 = e.first_frame;
    std::span<const TrackedAgent> scene = table.scene(t0);
    if (scene.empty()) continue;

    ManeuverScenario sc;
    sc.ego_id = e.agent_id;
    bool ego_ok = false;
    std::optional<LegLocation> ego_loc;

    for (const TrackedAgent& ag : scene) {
      std::vector<TimedState> states;
      std::span<const TimedState> full = table.window(ag.id, t0 - need + 1, need);
      if (!full.empty()) {
        states.assign(full.begin(), full.end());
      } else {
        std::int64_t first = table.agent_first_frame(ag.id);
        std::span<const TimedState> have = table.window(ag.id, first, t0 - first + 1);
        if (have.empty()) continue;
        for (std::int64_t k = need - 1; k >= 1; --k) {
          double t = static_cast<double>(t0 - k) * table.dt();
          if (t0 - k >= first) continue;
          AgentState st = have.front().state;
          st.position = st.position - st.velocity * (have.front().time - t);
          st.acceleration = {0.0, 0.0};
          states.push_back({t, st});
        }
        states.insert(states.end(), have.begin(), have.end());
      }
      if (static_cast<std::int64_t>(states.size()) < need) continue;
      if (ag.id == sc.ego_id) {
        ego_ok = true;
        ego_loc = locate_on_leg(ag.state, map);
      }
      sc.histories.push_back({ag.id, table.dt(), std::move(states)});
    }
    if (!ego_ok || !ego_loc || ego_loc->distance_to_yield <= 0.0) continue;

    const TrackedAgent* ego = nullptr;
    for (const TrackedAgent& ag : scene)
      if (ag.id == sc.ego_id) ego = &ag;
    DzParams dz = params.dz;
    dz.road_width = map.lane_width;
    dz.vehicle_length = ego->state.length;
    double d = ego_loc->distance_to_yield;
    double pass_margin = d - s_pass(dz);
    double stop_margin = s_stop(ego->state.speed(), dz) - d;
    sc.pass_opportunity = pass_margin < stop_margin;

    for (const TrackedAgent& ag : scene) {
      if (ag.id == sc.ego_id) continue;
      std::optional<LegLocation> loc = locate_on_leg(ag.state, map);
      if (!loc || loc->leg_index != ego_loc->leg_index) continue;
      if (loc->distance_to_yield > d)
        sc.follower_gap = std::min(sc.follower_gap, loc->distance_to_yield - d);
    }
    out.push_back(std::move(sc));
  }
  return out;
}

struct ManeuverCell {
  double action = 0.0;      // commanded m/s^2
  int scenarios = 0;
  int collision_free = 0;

  double fraction() const {
    return scenarios == 0 ? 0.0
                          : static_cast<double>(collision_free) / static_cast<double>(scenarios);
  }
};

/// Two rows keyed by the forecast P_Pass bucket, four commanded accelerations
/// each.
struct ManeuverReport {
  std::array<double, 4> actions{-4.0, -2.0, 2.0, 4.0};
  std::array<ManeuverCell, 4> high_pass;  // P_Pass > 0.5
  std::array<ManeuverCell, 4> low_pass;   // P_Pass <= 0.5
};

/// Closed-loop grid study: for every scenario and action the ego applies the
/// constant commanded acceleration (clamped to +-4, speed floored at zero)
/// along its entry path while every other vehicle follows its most likely
/// predicted step, re-planned each frame, for horizon_s seconds. Only
/// collisions involving the ego count against a cell.
inline ManeuverReport maneuver_experiment(std::span<const ManeuverScenario> scenarios,
                                          const RoundaboutMap& map, const ModeWeights& weights,
                                          const PredictorConfig& pcfg, const SignalParams& params,
                                          const GnnParams& gnn, int min_per_class = 100,
                                          double horizon_s = 2.0) {
  int pass_count = 0;
  int stop_count = 0;
  for (const ManeuverScenario& sc : scenarios) (sc.pass_opportunity ? pass_count : stop_count) += 1;
  if (pass_count < min_per_class || stop_count < min_per_class)
    fail("sample-shortfall", "need " + std::to_string(min_per_class) +
                                 " scenarios per class, have pass=" + std::to_string(pass_count) +
                                 " stop=" + std::to_string(stop_count));

  ManeuverReport report;
  for (std::size_t c = 0; c < report.actions.size(); ++c) {
    report.high_pass[c].action = report.actions[c];
    report.low_pass[c].action = report.actions[c];
  }
  auto steps = static_cast<int>(std::llround(horizon_s / pcfg.dt));
  auto need = static_cast<std::size_t>(pcfg.history_steps) + 1;

  for (const ManeuverScenario& sc : scenarios) {
    double t0 = sc.histories.front().states.back().time;
    std::vector<TrackedAgent> scene0;
    for (const Trajectory& tr : sc.histories) scene0.push_back({tr.agent_id, tr.states.back().state});
    std::sort(scene0.begin(), scene0.end(),
              [](const TrackedAgent& a, const TrackedAgent& b) { return a.id < b.id; });

    SceneGraph graph = build_scene_graph(scene0, map, params);
    double p_pass = 0.0;
    for (const NodeProbabilities& np : forecast(graph, gnn))
      if (np.agent_id == sc.ego_id) p_pass = np.p_pass;
    bool high = p_pass > 0.5;

    const AgentState* ego0 = nullptr;
    for (const TrackedAgent& ag : scene0)
      if (ag.id == sc.ego_id) ego0 = &ag.state;
    std::optional<LegLocation> ego_loc = locate_on_leg(*ego0, map);
    EntryPath ego_path = ego_loc ? EntryPath::from_leg(map.legs[ego_loc->leg_index], map)
                                 : EntryPath::circle(ego0->position, map);

    for (std::size_t c = 0; c < report.actions.size(); ++c) {
      double action = std::clamp(report.actions[c], -4.0, 4.0);
      std::map<AgentId, std::vector<TimedState>> hist;
      for (const Trajectory& tr : sc.histories)
        hist[tr.agent_id].assign(tr.states.begin(), tr.states.end());
      double ego_s = ego_path.project(ego0->position);
      double ego_v = ego0->speed();
      bool collided = false;

      for (int step = 1; step <= steps && !collided; ++step) {
        double t = t0 + static_cast<double>(step) * pcfg.dt;
        std::vector<TrackedAgent> snapshot;
        for (const auto& [id, h] : hist) snapshot.push_back({id, h.back().state});

        std::map<AgentId, AgentState> next;
        for (const auto& [id, h] : hist) {
          if (id == sc.ego_id) {
            double v = ego_v;
            double ds = detail::roll_forward(v, action, pcfg.dt);
            ego_s += ds;
            ego_v = v;
            AgentState st = h.back().state;
            st.position = ego_path.point_at(ego_s);
            st.heading = ego_path.heading_at(ego_s);
            Vec2 dir{std::cos(st.heading), std::sin(st.heading)};
            st.velocity = dir * ego_v;
            st.acceleration = dir * action;
            next[id] = st;
            continue;
          }
          std::span<const TimedState> tail(h);
          tail = tail.subspan(h.size() - need, need);
          PredictedTrajectory pred =
              predict_most_likely(tail, snapshot, map, weights, params, pcfg);
          AgentState st = h.back().state;
          Vec2 cur = st.position;
          Vec2 nxt = pred.positions.front();
          Vec2 vel = (nxt - cur) * (1.0 / pcfg.dt);
          st.acceleration = (vel - st.velocity) * (1.0 / pcfg.dt);
          st.velocity = vel;
          st.position = nxt;
          if (vel.norm() > 0.1) st.heading = std::atan2(vel.y, vel.x);
          next[id] = st;
        }

        // Sub-sampled ego collision sweep between the old and new positions.
        AgentState ego_prev = hist[sc.ego_id].back().state;
        AgentState ego_next = next[sc.ego_id];
        for (const auto& [id, st] : next) {
          if (id == sc.ego_id) continue;
          AgentState prev = hist[id].back().state;
          for (int q = 1; q <= 5 && !collided; ++q) {
            double w = static_cast<double>(q) / 5.0;
            AgentState ei = ego_prev;
            ei.position = ego_prev.position + (ego_next.position - ego_prev.position) * w;
            AgentState oi = prev;
            oi.position = prev.position + (st.position - prev.position) * w;
            if (collision_check(ei, oi)) collided = true;
          }
          if (collided) break;
        }
        for (const auto& [id, st] : next) hist[id].push_back({t, st});
      }

      ManeuverCell& cell = high ? report.high_pass[c] : report.low_pass[c];
      cell.scenarios += 1;
      if (!collided) cell.collision_free += 1;
    }
  }
  return report;
}

}  // namespace rdz
