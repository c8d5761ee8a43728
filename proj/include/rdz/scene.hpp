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
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "rdz/geometry.hpp"

namespace rdz {

/// Frame-aligned view over a set of trajectories. All trajectories must share
/// one sampling interval and sit on the common frame grid time = frame * dt.
class FrameTable {
 public:
  explicit FrameTable(std::span<const Trajectory> trajectories) {
    if (trajectories.empty()) fail("schema", "no trajectories given");
    dt_ = trajectories.front().dt;
    for (const Trajectory& t : trajectories) {
      validate(t);
      if (std::abs(t.dt - dt_) > 1e-9)
        fail("schema", "trajectories disagree on the sampling interval");
    }
    first_frame_ = std::numeric_limits<std::int64_t>::max();
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
    for (const Trajectory& t : trajectories) {
      std::int64_t f0 = frame_of(t.states.front().time);
      tracks_[t.agent_id] = Track{&t, f0};
      first_frame_ = std::min(first_frame_, f0);
      last = std::max(last, f0 + static_cast<std::int64_t>(t.states.size()) - 1);
    }
    scenes_.resize(static_cast<std::size_t>(last - first_frame_ + 1));
    for (const auto& [id, track] : tracks_) {
      for (std::size_t i = 0; i < track.traj->states.size(); ++i) {
        std::int64_t f = track.first_frame + static_cast<std::int64_t>(i);
        scenes_[static_cast<std::size_t>(f - first_frame_)].push_back(
            TrackedAgent{id, track.traj->states[i].state});
      }
    }
    last_frame_ = last;
  }

  double dt() const { return dt_; }
  std::int64_t first_frame() const { return first_frame_; }
  std::int64_t last_frame() const { return last_frame_; }

  std::int64_t frame_of(double time) const {
    double f = time / dt_;
    auto frame = static_cast<std::int64_t>(std::llround(f));
    if (std::abs(time - static_cast<double>(frame) * dt_) > 1e-6)
      fail("schema", "trajectory timestamps are off the common frame grid");
    return frame;
  }

  /// Agents present at a frame, ascending id. Empty outside the covered span.
  std::span<const TrackedAgent> scene(std::int64_t frame) const {
    if (frame < first_frame_ || frame > last_frame_) return {};
    return scenes_[static_cast<std::size_t>(frame - first_frame_)];
  }

  /// Contiguous states of one agent covering frames [start, start + count).
  /// Empty when the agent does not span the whole range.
  std::span<const TimedState> window(AgentId id, std::int64_t start, std::int64_t count) const {
    auto it = tracks_.find(id);
    if (it == tracks_.end()) return {};
    const Track& tr = it->second;
    std::int64_t offset = start - tr.first_frame;
    auto n = static_cast<std::int64_t>(tr.traj->states.size());
    if (offset < 0 || offset + count > n) return {};
    return std::span<const TimedState>(tr.traj->states)
        .subspan(static_cast<std::size_t>(offset), static_cast<std::size_t>(count));
  }

  const std::map<AgentId, const Trajectory*> agents() const {
    std::map<AgentId, const Trajectory*> out;
    for (const auto& [id, track] : tracks_) out[id] = track.traj;
    return out;
  }

  std::int64_t agent_first_frame(AgentId id) const { return tracks_.at(id).first_frame; }
  std::int64_t agent_last_frame(AgentId id) const {
    const Track& tr = tracks_.at(id);
    return tr.first_frame + static_cast<std::int64_t>(tr.traj->states.size()) - 1;
  }

 private:
  struct Track {
    const Trajectory* traj = nullptr;
    std::int64_t first_frame = 0;
  };

  double dt_ = 0.0;
  std::int64_t first_frame_ = 0;
  std::int64_t last_frame_ = 0;
  std::vector<std::vector<TrackedAgent>> scenes_;
  std::map<AgentId, Track> tracks_;
};

}  // namespace rdz
