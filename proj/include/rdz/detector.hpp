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
#include <limits>
#include <span>
#include <vector>

#include "rdz/mlp.hpp"
#include "rdz/predictor.hpp"
#include "rdz/rng.hpp"
#include "rdz/scene.hpp"
#include "rdz/signal.hpp"

namespace rdz {

/// Per-step and aggregate gap between a predicted and an observed trajectory.
/// ratio relates the flattened prediction error to the observed displacement;
/// per_step_ratio holds the same quotient step by step. A window whose truth
/// never moves gets ratio 0 for a perfect prediction and +infinity otherwise.
struct DeviationSeries {
  std::vector<double> per_step;        // meters, one entry per horizon step
  std::vector<double> per_step_ratio;  // dimensionless
  double sum = 0.0;                    // sum of per_step
  double ratio = 0.0;                  // flattened relative deviation
};

inline constexpr double kDegenerateRatio = std::numeric_limits<double>::infinity();

/// Compare a prediction against truth. The prediction aligns with the last
/// pred-size entries of truth; truth[0] is the reference frame for observed
/// displacements. Passing the whole sliding window (history plus horizon)
/// makes the denominators reflect total motion over the window, so a vehicle
/// that moved earlier in the window keeps a meaningful scale; passing just
/// the anchor plus horizon measures from the prediction origin instead.
inline DeviationSeries path_deviation(const PredictedTrajectory& pred,
                                      std::span<const TimedState> truth) {
  if (truth.size() < pred.positions.size() + 1)
    fail("horizon-mismatch", "truth window shorter than prediction horizon plus anchor");
  DeviationSeries dev;
  Vec2 base = truth[0].state.position;
  std::size_t offset = truth.size() - pred.positions.size();
  double num_sq = 0.0;
  double den_sq = 0.0;
  for (std::size_t k = 0; k < pred.positions.size(); ++k) {
    Vec2 truth_pos = truth[offset + k].state.position;
    double delta = (pred.positions[k] - truth_pos).norm();
    double moved = (truth_pos - base).norm();
    dev.per_step.push_back(delta);
    dev.sum += delta;
    num_sq += delta * delta;
    den_sq += moved * moved;
    if (moved < 1e-12)
      dev.per_step_ratio.push_back(delta < 1e-12 ? 0.0 : kDegenerateRatio);
    else
      dev.per_step_ratio.push_back(delta / moved);
  }
  double num = std::sqrt(num_sq);
  double den = std::sqrt(den_sq);
  if (den < 1e-12)
    dev.ratio = num < 1e-12 ? 0.0 : kDegenerateRatio;
  else
    dev.ratio = num / den;
  return dev;
}

/// One scored sliding window: history_steps + 1 observed states starting at
/// start_frame, compared against the following horizon_steps states.
struct WindowScan {
  AgentId agent_id = 0;
  std::int64_t start_frame = 0;
  std::int64_t anchor_frame = 0;  // last observed frame, prediction origin
  DeviationSeries deviation;
  Mode mode = Mode::Proceed;
};

/// Slide a window over every agent and score the prediction deviation at each
/// position. Windows needing more frames than an agent has are skipped.
inline std::vector<WindowScan> scan_windows(const FrameTable& table, const RoundaboutMap& map,
                                            const ModeWeights& weights,
                                            const SignalParams& params,
                                            const PredictorConfig& cfg) {
  std::vector<WindowScan> out;
  std::int64_t len = static_cast<std::int64_t>(cfg.history_steps) + 1 + cfg.horizon_steps;
  for (const auto& [id, traj] : table.agents()) {
    std::int64_t first = table.agent_first_frame(id);
    std::int64_t last = table.agent_last_frame(id);
    for (std::int64_t start = first; start + len - 1 <= last; ++start) {
      std::span<const TimedState> states = table.window(id, start, len);
      if (states.empty()) continue;
      std::span<const TimedState> history = states.subspan(0, static_cast<std::size_t>(cfg.history_steps) + 1);
      std::int64_t anchor = start + cfg.history_steps;
      PredictedTrajectory pred =
          predict_most_likely(history, table.scene(anchor), map, weights, params, cfg);
      WindowScan w;
      w.agent_id = id;
      w.start_frame = start;
      w.anchor_frame = anchor;
      // Deviations are scaled by displacement from the window start, so the
      // history motion anchors the denominator.
      w.deviation = path_deviation(pred, states);
      w.mode = pred.mode;
      out.push_back(std::move(w));
    }
  }
  return out;
}

struct MiningParams {
  double ratio_threshold = 0.8;

  friend bool operator==(const MiningParams&, const MiningParams&) = default;
};

/// A labeled training window. label is true when any horizon frame overlaps a
/// ground-truth event of the same agent.
struct WindowSample {
  AgentId agent_id = 0;
  std::int64_t start_frame = 0;
  std::array<double, kMlpInputs> deltas{};
  double max_step_ratio = 0.0;
  double ratio = 0.0;
  bool label = false;
};

inline LabeledSample to_labeled(const WindowSample& w) { return {w.deltas, w.label}; }

namespace detail {

inline double mining_statistic(const DeviationSeries& d) {
  double m = 0.0;
  for (double r : d.per_step_ratio) m = std::max(m, r);
  return m;
}

inline bool overlaps_event(const WindowScan& w, std::span<const DzEvent> events,
                           const PredictorConfig& cfg) {
  std::int64_t h_first = w.anchor_frame + 1;
  std::int64_t h_last = w.anchor_frame + cfg.horizon_steps;
  for (const DzEvent& e : events) {
    if (e.agent_id != w.agent_id) continue;
    // The braking response directly after the zone frames belongs to the
    // episode, so windows reaching into that aftermath count as positive. Two
    // frames cover the tail of the response without swallowing the restart.
    std::int64_t tail = e.last_frame + std::min(2, cfg.horizon_steps);
    if (e.first_frame <= h_last && tail >= h_first) return true;
  }
  return false;
}

}  // namespace detail

/// Mine a balanced training set: keep windows whose per-step deviation ratio
/// exceeds the threshold somewhere (a non-positive threshold keeps every
/// window), label them by event overlap, then pair the positive windows with
/// the same number of highest-deviation negative windows.
inline std::vector<WindowSample> build_training_set(std::span<const WindowScan> windows,
                                                    std::span<const DzEvent> events,
                                                    const PredictorConfig& cfg,
                                                    const MiningParams& mining) {
  if (cfg.horizon_steps != kMlpInputs)
    fail("horizon-mismatch", "classifier expects exactly 4 horizon steps");
  std::vector<WindowSample> mined_dz;
  std::vector<WindowSample> negatives;
  bool any_above = false;
  for (const WindowScan& w : windows) {
    WindowSample s;
    s.agent_id = w.agent_id;
    s.start_frame = w.start_frame;
    for (int k = 0; k < kMlpInputs; ++k)
      s.deltas[static_cast<std::size_t>(k)] = w.deviation.per_step[static_cast<std::size_t>(k)];
    s.max_step_ratio = detail::mining_statistic(w.deviation);
    s.ratio = w.deviation.ratio;
    s.label = detail::overlaps_event(w, events, cfg);
    bool above = mining.ratio_threshold <= 0.0 || s.max_step_ratio > mining.ratio_threshold;
    any_above = any_above || above;
    if (s.label) {
      if (above) mined_dz.push_back(s);
    } else {
      negatives.push_back(s);
    }
  }
  if (!any_above) fail("empty-mining-result", "no window exceeds the deviation threshold");

  auto by_deviation = [](const WindowSample& a, const WindowSample& b) {
    if (a.max_step_ratio != b.max_step_ratio) return a.max_step_ratio > b.max_step_ratio;
    if (a.agent_id != b.agent_id) return a.agent_id < b.agent_id;
    return a.start_frame < b.start_frame;
  };
  std::sort(negatives.begin(), negatives.end(), by_deviation);
  std::size_t n = std::min(mined_dz.size(), negatives.size());
  std::sort(mined_dz.begin(), mined_dz.end(), by_deviation);
  mined_dz.resize(n);
  negatives.resize(n);

  std::vector<WindowSample> out;
  out.reserve(2 * n);
  out.insert(out.end(), mined_dz.begin(), mined_dz.end());
  out.insert(out.end(), negatives.begin(), negatives.end());
  std::sort(out.begin(), out.end(), [](const WindowSample& a, const WindowSample& b) {
    if (a.agent_id != b.agent_id) return a.agent_id < b.agent_id;
    return a.start_frame < b.start_frame;
  });
  return out;
}

/// Deterministic identity-keyed split: every window of one agent lands on the
/// same side, so test agents are never seen in training.
inline void split_by_agent(std::span<const WindowSample> samples, double test_fraction,
                           std::uint64_t seed, std::vector<WindowSample>* train,
                           std::vector<WindowSample>* test) {
  for (const WindowSample& w : samples) {
    std::uint64_t h = hash_mix(static_cast<std::uint64_t>(w.agent_id), seed, 0x5157ULL);
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    (u < test_fraction ? test : train)->push_back(w);
  }
}

/// Detection-time knobs. The emitted interval starts lead_frames before the
/// first horizon step whose deviation ratio crosses loc_ratio (covering the
/// stimulus that precedes the visible response by roughly the reaction time)
/// and spans span_frames; runs separated by at most merge_gap frames merge.
/// candidate_ratio restricts scoring to windows that pass the same per-step
/// ratio rule used for mining, keeping the classifier on the population it
/// was trained on; zero scores every window.
struct DetectorParams {
  MlpParams mlp;
  double threshold = 0.5;
  double candidate_ratio = 0.0;
  double loc_ratio = 0.3;
  int lead_frames = 3;
  int span_frames = 4;
  int merge_gap = 1;

  friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

struct DzDetection {
  AgentId agent_id = 0;
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  double score = 0.0;  // highest window score merged into this detection
  bool decision = true;
};

/// Score every window with the classifier and emit merged event intervals for
/// scores strictly above the threshold.
inline std::vector<DzDetection> detect(std::span<const WindowScan> windows,
                                       const FrameTable& table, const PredictorConfig& cfg,
                                       const DetectorParams& det) {
  if (cfg.horizon_steps != kMlpInputs)
    fail("horizon-mismatch", "classifier expects exactly 4 horizon steps");
  struct Hit {
    AgentId agent_id;
    std::int64_t first, last;
    double score;
  };
  std::vector<Hit> hits;
  for (const WindowScan& w : windows) {
    if (det.candidate_ratio > 0.0 &&
        !(detail::mining_statistic(w.deviation) > det.candidate_ratio))
      continue;
    std::array<double, kMlpInputs> x{};
    for (int k = 0; k < kMlpInputs; ++k)
      x[static_cast<std::size_t>(k)] = w.deviation.per_step[static_cast<std::size_t>(k)];
    double score = mlp_forward(det.mlp, x);
    if (!(score > det.threshold)) continue;
    int onset_step = -1;
    for (int k = 0; k < cfg.horizon_steps; ++k) {
      if (w.deviation.per_step_ratio[static_cast<std::size_t>(k)] > det.loc_ratio) {
        onset_step = k;
        break;
      }
    }
    if (onset_step < 0) {
      onset_step = 0;
      for (int k = 1; k < cfg.horizon_steps; ++k)
        if (w.deviation.per_step_ratio[static_cast<std::size_t>(k)] >
            w.deviation.per_step_ratio[static_cast<std::size_t>(onset_step)])
          onset_step = k;
    }
    std::int64_t onset_frame = w.anchor_frame + 1 + onset_step;
    std::int64_t first = std::max(onset_frame - det.lead_frames, table.agent_first_frame(w.agent_id));
    std::int64_t last = std::min(first + det.span_frames - 1, table.agent_last_frame(w.agent_id));
    hits.push_back({w.agent_id, first, last, score});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.agent_id != b.agent_id) return a.agent_id < b.agent_id;
    if (a.first != b.first) return a.first < b.first;
    return a.last < b.last;
  });

  std::vector<DzDetection> out;
  for (const Hit& h : hits) {
    if (!out.empty() && out.back().agent_id == h.agent_id &&
        h.first <= out.back().last_frame + det.merge_gap + 1) {
      out.back().last_frame = std::max(out.back().last_frame, h.last);
      out.back().score = std::max(out.back().score, h.score);
    } else {
      out.push_back(DzDetection{h.agent_id, h.first, h.last, 0.0, 0.0, h.score, true});
    }
  }
  for (DzDetection& d : out) {
    d.t_start = static_cast<double>(d.first_frame) * table.dt();
    d.t_end = static_cast<double>(d.last_frame) * table.dt();
    d.decision = d.score > det.threshold;
  }
  return out;
}

}  // namespace rdz
