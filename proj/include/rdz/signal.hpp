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
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rdz/dilemma.hpp"
#include "rdz/geometry.hpp"
#include "rdz/scene.hpp"

namespace rdz {

/// Gates for the virtual signal. A circulating vehicle only influences an
/// approaching one when it arrives at the conflict point within t_max seconds
/// and is currently within d_t meters.
struct SignalParams {
  double t_max = 1.5;  // s
  double d_t = 10.0;   // m
  DzParams dz;
  // When false, red frames also count as dilemma-zone event frames during
  // labeling; when true only yellow frames do.
  bool yellow_only = false;

  friend bool operator==(const SignalParams&, const SignalParams&) = default;
};

enum class SignalState { Green, Yellow, Red };

inline const char* to_string(SignalState s) {
  switch (s) {
    case SignalState::Green: return "green";
    case SignalState::Yellow: return "yellow";
    default: return "red";
  }
}

/// The surrogate measures behind a non-green signal.
struct ConflictAssessment {
  double ttc = 0.0;  // circulating vehicle's arrival time at the conflict point
  double tts = 0.0;  // approaching vehicle's time to stop
  double soc = 0.0;  // separation between the two vehicles
  AgentId circulating_id = 0;
};

struct SignalResult {
  SignalState state = SignalState::Green;
  std::optional<ConflictAssessment> assessment;
};

/// Constant-speed arrival time of a circulating vehicle at the leg's conflict
/// point. Below 0.1 m/s the vehicle is treated as parked and never arrives.
inline double time_to_collision(const AgentState& circulating, const ApproachLeg& leg,
                                const RoundaboutMap& map) {
  double v = circulating.speed();
  if (v < 0.1) return std::numeric_limits<double>::infinity();
  return arc_distance_to_conflict(circulating, leg, map) / v;
}

/// Reaction time plus braking time at the comfortable deceleration.
inline double time_to_stop(const AgentState& approaching, const DzParams& dz) {
  return dz.reaction_time + approaching.speed() / dz.decel;
}

inline double separation(const AgentState& a, const AgentState& b) {
  return (a.position - b.position).norm();
}

/// Evaluate the virtual signal for one approaching vehicle. Circulating
/// vehicles are visited in ascending arrival-time order (ties by id): the
/// first one that both gates admit and that arrives within the approacher's
/// stopping time turns the signal red and ends the scan; gated vehicles that
/// arrive later than the stopping time leave a yellow. Equal times go red.
inline SignalResult compute_signal(const AgentState& approaching, const ApproachLeg& leg,
                                   std::span<const TrackedAgent> scene,
                                   const RoundaboutMap& map, const SignalParams& params) {
  struct Candidate {
    double ttc;
    AgentId id;
    const AgentState* state;
  };
  std::vector<Candidate> circulating;
  for (const TrackedAgent& agent : scene) {
    if (!in_circulating_lane(agent.state, map)) continue;
    circulating.push_back({time_to_collision(agent.state, leg, map), agent.id, &agent.state});
  }
  std::sort(circulating.begin(), circulating.end(), [](const Candidate& a, const Candidate& b) {
    if (a.ttc != b.ttc) return a.ttc < b.ttc;
    return a.id < b.id;
  });

  double tts = time_to_stop(approaching, params.dz);
  SignalResult result;
  for (const Candidate& c : circulating) {
    double soc = separation(approaching, *c.state);
    if (!(c.ttc < params.t_max && soc < params.d_t)) continue;
    if (c.ttc <= tts) {
      result.state = SignalState::Red;
      result.assessment = ConflictAssessment{c.ttc, tts, soc, c.id};
      return result;
    }
    if (result.state != SignalState::Yellow) {
      result.state = SignalState::Yellow;
      result.assessment = ConflictAssessment{c.ttc, tts, soc, c.id};
    }
  }
  return result;
}

/// A mined ground-truth event: one maximal run of frames during which an
/// approaching vehicle held a non-green signal while inside its dilemma zone.
/// cause_id is the circulating vehicle behind the first frame's signal.
struct DzEvent {
  AgentId agent_id = 0;
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  AgentId cause_id = 0;

  friend bool operator==(const DzEvent&, const DzEvent&) = default;
};

/// Scan every frame of every approaching vehicle, evaluate the virtual signal
/// against the circulating traffic, and emit maximal contiguous frame runs
/// where the signal is active and the vehicle is inside its dilemma zone.
/// Zone parameters take the road width from the map and the vehicle length
/// from the observed state.
inline std::vector<DzEvent> label_dz_events(std::span<const Trajectory> trajectories,
                                            const RoundaboutMap& map,
                                            const SignalParams& params) {
  if (trajectories.empty()) return {};
  FrameTable table(trajectories);
  std::vector<DzEvent> events;
  for (const auto& [id, traj] : table.agents()) {
    std::int64_t f0 = table.agent_first_frame(id);
    std::optional<DzEvent> open;
    for (std::size_t i = 0; i < traj->states.size(); ++i) {
      std::int64_t frame = f0 + static_cast<std::int64_t>(i);
      const TimedState& ts = traj->states[i];
      bool active = false;
      AgentId cause = 0;
      std::optional<LegLocation> loc = locate_on_leg(ts.state, map);
      if (loc && loc->distance_to_yield > 0.0) {
        DzParams dz = params.dz;
        dz.road_width = map.lane_width;
        dz.vehicle_length = ts.state.length;
        if (in_dilemma_zone(loc->distance_to_yield, ts.state.speed(), dz)) {
          SignalResult sig = compute_signal(ts.state, map.legs[loc->leg_index],
                                            table.scene(frame), map, params);
          bool counted = sig.state == SignalState::Yellow ||
                         (sig.state == SignalState::Red && !params.yellow_only);
          if (counted && sig.assessment) {
            active = true;
            cause = sig.assessment->circulating_id;
          }
        }
      }
      if (active) {
        if (open && open->last_frame + 1 == frame) {
          open->last_frame = frame;
          open->t_end = ts.time;
        } else {
          if (open) events.push_back(*open);
          open = DzEvent{id, frame, frame, ts.time, ts.time, cause};
        }
      } else if (open) {
        events.push_back(*open);
        open.reset();
      }
    }
    if (open) events.push_back(*open);
  }
  std::sort(events.begin(), events.end(), [](const DzEvent& a, const DzEvent& b) {
    if (a.agent_id != b.agent_id) return a.agent_id < b.agent_id;
    return a.first_frame < b.first_frame;
  });
  return events;
}

}  // namespace rdz
