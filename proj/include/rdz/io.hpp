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
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include <json.hpp>

#include "rdz/config.hpp"
#include "rdz/forecaster.hpp"
#include "rdz/metrics.hpp"

namespace rdz {

inline constexpr const char* kTrajectoryHeader =
    "frame,time,agent_id,x,y,vx,vy,ax,ay,heading,length,width";
inline constexpr const char* kEventsHeader = "agent_id,t_start,t_end,cause_id";
inline constexpr const char* kRocHeader = "threshold,fpr,tpr";
inline constexpr const char* kWindowsHeader =
    "agent_id,frame,d1,d2,d3,d4,max_ratio,ratio,label";
inline constexpr const char* kDeviationsHeader =
    "agent_id,frame,time,d1,d2,d3,d4,max_ratio,ratio";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

}  // namespace detail

/// Canonical trajectory CSV. Rows are ordered by (frame, agent_id) so that a
/// load/save cycle reproduces the bytes exactly.
inline std::string serialize_trajectories(std::span<const Trajectory> trajectories) {
  std::string out = kTrajectoryHeader;
  out += "\n";
  if (trajectories.empty()) return out;
  double dt = trajectories.front().dt;
  for (const Trajectory& t : trajectories) {
    validate(t);
    if (std::abs(t.dt - dt) > 1e-9)
      fail("schema", "trajectories disagree on the sampling interval");
  }

  struct Row {
    std::int64_t frame;
    AgentId agent;
    const TimedState* s;
  };
  std::vector<Row> rows;
  for (const Trajectory& t : trajectories)
    for (const TimedState& s : t.states) {
      auto frame = static_cast<std::int64_t>(std::llround(s.time / dt));
      if (std::abs(s.time - static_cast<double>(frame) * dt) > 1e-6)
        fail("schema", "trajectory timestamps are off the common frame grid");
      rows.push_back({frame, t.agent_id, &s});
    }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.agent < b.agent;
  });
  for (const Row& r : rows) {
    const AgentState& st = r.s->state;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.frame, r.s->time, r.agent,
                       st.position.x, st.position.y, st.velocity.x, st.velocity.y,
                       st.acceleration.x, st.acceleration.y, st.heading, st.length, st.width);
  }
  return out;
}

/// Parse the trajectory CSV. columns remaps canonical names to the file's
/// actual header names (for foreign datasets); extra columns are ignored.
inline std::vector<Trajectory> parse_trajectories(
    const std::string& text, const std::map<std::string, std::string>& columns = {}) {
  std::vector<std::string> lines = detail::split_lines(text);
  if (lines.empty()) fail("schema", "trajectory file has no header");
  std::vector<std::string> header = detail::split_csv_line(lines[0]);

  std::array<std::size_t, 12> idx{};
  for (std::size_t c = 0; c < kTrajectoryColumns.size(); ++c) {
    std::string want = kTrajectoryColumns[c];
    auto mapped = columns.find(want);
    if (mapped != columns.end()) want = mapped->second;
    auto it = std::find(header.begin(), header.end(), want);
    if (it == header.end())
      fail("schema", fmt::format("missing column {}", want));
    idx[c] = static_cast<std::size_t>(it - header.begin());
  }

  struct Row {
    std::int64_t frame;
    AgentId agent;
    TimedState s;
    int line;
  };
  std::vector<Row> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (detail::trim(lines[li]).empty()) continue;
    std::vector<std::string> f = detail::split_csv_line(lines[li]);
    int line = static_cast<int>(li) + 1;
    std::size_t needed = *std::max_element(idx.begin(), idx.end());
    if (f.size() <= needed)
      fail("schema", fmt::format("line {}: expected at least {} columns", line, needed + 1));
    auto num = [&](std::size_t c) { return detail::parse_double(f[idx[c]], line); };
    Row r;
    r.frame = detail::parse_int(f[idx[0]], line);
    r.s.time = num(1);
    r.agent = detail::parse_int(f[idx[2]], line);
    r.s.state.position = {num(3), num(4)};
    r.s.state.velocity = {num(5), num(6)};
    r.s.state.acceleration = {num(7), num(8)};
    r.s.state.heading = num(9);
    r.s.state.length = num(10);
    r.s.state.width = num(11);
    r.line = line;
    rows.push_back(std::move(r));
  }
  if (rows.empty()) return {};

  std::map<AgentId, std::vector<Row>> grouped;
  for (Row& r : rows) grouped[r.agent].push_back(std::move(r));
  double dt = 0.0;
  for (auto& [id, g] : grouped) {
    std::sort(g.begin(), g.end(), [](const Row& a, const Row& b) { return a.s.time < b.s.time; });
    if (dt == 0.0 && g.size() > 1) dt = g[1].s.time - g[0].s.time;
  }
  if (dt <= 0.0) fail("schema", "cannot infer the sampling interval");

  std::vector<Trajectory> out;
  for (auto& [id, g] : grouped) {
    Trajectory t;
    t.agent_id = id;
    t.dt = dt;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (i > 0) {
        double gap = g[i].s.time - g[i - 1].s.time;
        if (std::abs(gap - dt) > 1e-9)
          fail("schema", fmt::format("line {}: non-uniform dt ({} after {})", g[i].line, gap, dt));
        if (g[i].frame != g[i - 1].frame + 1)
          fail("schema", fmt::format("line {}: frames of agent {} are not contiguous", g[i].line,
                                     id));
      }
      if (std::abs(g[i].s.time - static_cast<double>(g[i].frame) * dt) > 1e-6)
        fail("schema",
             fmt::format("line {}: time does not match frame * dt", g[i].line));
      t.states.push_back(g[i].s);
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Trajectory> load_trajectories(
    const std::string& path, const std::map<std::string, std::string>& columns = {}) {
  return parse_trajectories(read_text_file(path), columns);
}

inline void save_trajectories(const std::string& path, std::span<const Trajectory> t) {
  write_text_file(path, serialize_trajectories(t));
}

inline std::string serialize_events(std::span<const DzEvent> events) {
  std::string out = kEventsHeader;
  out += "\n";
  for (const DzEvent& e : events)
    out += fmt::format("{},{},{},{}\n", e.agent_id, e.t_start, e.t_end, e.cause_id);
  return out;
}

inline std::vector<DzEvent> parse_events(const std::string& text, double dt) {
  if (!(dt > 0.0)) fail("schema", "events need a positive dt to recover frames");
  std::vector<std::string> lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines[0]) != kEventsHeader)
    fail("schema", "events file must start with the canonical header");
  std::vector<DzEvent> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (detail::trim(lines[li]).empty()) continue;
    std::vector<std::string> f = detail::split_csv_line(lines[li]);
    int line = static_cast<int>(li) + 1;
    if (f.size() != 4) fail("schema", fmt::format("line {}: expected 4 columns", line));
    DzEvent e;
    e.agent_id = detail::parse_int(f[0], line);
    e.t_start = detail::parse_double(f[1], line);
    e.t_end = detail::parse_double(f[2], line);
    e.cause_id = detail::parse_int(f[3], line);
    e.first_frame = static_cast<std::int64_t>(std::llround(e.t_start / dt));
    e.last_frame = static_cast<std::int64_t>(std::llround(e.t_end / dt));
    out.push_back(e);
  }
  return out;
}

inline std::vector<DzEvent> load_events(const std::string& path, double dt) {
  return parse_events(read_text_file(path), dt);
}

inline std::string serialize_roc(const RocCurve& roc) {
  std::string out = kRocHeader;
  out += "\n";
  for (const RocPoint& p : roc.points)
    out += fmt::format("{},{},{}\n", p.threshold, p.fpr, p.tpr);
  return out;
}

inline std::string serialize_windows(std::span<const WindowSample> windows) {
  std::string out = kWindowsHeader;
  out += "\n";
  for (const WindowSample& w : windows)
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", w.agent_id, w.start_frame, w.deltas[0],
                       w.deltas[1], w.deltas[2], w.deltas[3], w.max_step_ratio, w.ratio,
                       w.label ? 1 : 0);
  return out;
}

inline std::vector<WindowSample> parse_windows(const std::string& text) {
  std::vector<std::string> lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines[0]) != kWindowsHeader)
    fail("schema", "windows file must start with the canonical header");
  std::vector<WindowSample> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (detail::trim(lines[li]).empty()) continue;
    std::vector<std::string> f = detail::split_csv_line(lines[li]);
    int line = static_cast<int>(li) + 1;
    if (f.size() != 9) fail("schema", fmt::format("line {}: expected 9 columns", line));
    WindowSample w;
    w.agent_id = detail::parse_int(f[0], line);
    w.start_frame = detail::parse_int(f[1], line);
    for (int k = 0; k < 4; ++k)
      w.deltas[static_cast<std::size_t>(k)] = detail::parse_double(f[static_cast<std::size_t>(k) + 2], line);
    w.max_step_ratio = detail::parse_double(f[6], line);
    w.ratio = detail::parse_double(f[7], line);
    long lab = detail::parse_int(f[8], line);
    if (lab != 0 && lab != 1) fail("schema", fmt::format("line {}: label must be 0 or 1", line));
    w.label = lab == 1;
    out.push_back(w);
  }
  return out;
}

inline std::string serialize_deviations(std::span<const WindowScan> scans, double dt) {
  std::string out = kDeviationsHeader;
  out += "\n";
  for (const WindowScan& w : scans) {
    if (w.deviation.per_step.size() != 4) fail("horizon-mismatch", "deviation export expects T=4");
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", w.agent_id, w.anchor_frame,
                       static_cast<double>(w.anchor_frame) * dt, w.deviation.per_step[0],
                       w.deviation.per_step[1], w.deviation.per_step[2], w.deviation.per_step[3],
                       detail::mining_statistic(w.deviation), w.deviation.ratio);
  }
  return out;
}

/// Self-describing model container shared by the detector, the mode scorer,
/// and the forecaster. Sections are optional so partially trained pipelines
/// can persist what they have.
struct ModelFile {
  std::optional<DetectorParams> detector;
  std::optional<ModeWeights> mode_weights;
  std::optional<GnnParams> forecaster;
};

inline constexpr int kModelVersion = 1;

namespace detail {

inline nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) fail("schema", "model matrix must be a non-empty array");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[static_cast<std::size_t>(r)].size()) != cols)
      fail("schema", "model matrix rows have uneven lengths");
    for (int c = 0; c < cols; ++c)
      m.at(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace detail

inline std::string serialize_model(const ModelFile& m) {
  nlohmann::json j;
  j["version"] = kModelVersion;
  if (m.detector) {
    const DetectorParams& d = *m.detector;
    nlohmann::json jd;
    jd["threshold"] = d.threshold;
    jd["candidate_ratio"] = d.candidate_ratio;
    jd["loc_ratio"] = d.loc_ratio;
    jd["lead_frames"] = d.lead_frames;
    jd["span_frames"] = d.span_frames;
    jd["merge_gap"] = d.merge_gap;
    nlohmann::json w1 = nlohmann::json::array();
    for (const auto& row : d.mlp.w1) w1.push_back(row);
    jd["w1"] = std::move(w1);
    jd["b1"] = d.mlp.b1;
    jd["w2"] = d.mlp.w2;
    jd["b2"] = d.mlp.b2;
    j["detector"] = std::move(jd);
  }
  if (m.mode_weights) {
    nlohmann::json jm;
    nlohmann::json w = nlohmann::json::array();
    for (const auto& row : m.mode_weights->w) w.push_back(row);
    jm["w"] = std::move(w);
    jm["b"] = m.mode_weights->b;
    j["mode_weights"] = std::move(jm);
  }
  if (m.forecaster) {
    const GnnParams& g = *m.forecaster;
    nlohmann::json jf;
    jf["feature_dim"] = g.feature_dim;
    jf["hidden"] = g.hidden;
    nlohmann::json layers = nlohmann::json::array();
    for (const GnnParams::Layer& layer : g.layers) {
      nlohmann::json jl;
      jl["msg_w"] = detail::mat_to_json(layer.msg_w);
      jl["msg_b"] = layer.msg_b;
      jl["upd_w"] = detail::mat_to_json(layer.upd_w);
      jl["upd_b"] = layer.upd_b;
      layers.push_back(std::move(jl));
    }
    jf["layers"] = std::move(layers);
    jf["out_w"] = detail::mat_to_json(g.out_w);
    jf["out_b"] = g.out_b;
    j["forecaster"] = std::move(jf);
  }
  return j.dump(2) + "\n";
}

inline ModelFile parse_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail("schema", std::string("model file is not valid json: ") + e.what());
  }
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != kModelVersion)
    fail("schema", "model file version mismatch");
  for (const auto& [key, _] : j.items())
    if (key != "version" && key != "detector" && key != "mode_weights" && key != "forecaster")
      fail("schema", "unknown model section " + key);

  ModelFile m;
  try {
    if (j.contains("detector")) {
      const nlohmann::json& jd = j["detector"];
      DetectorParams d;
      d.threshold = jd.at("threshold").get<double>();
      d.candidate_ratio = jd.at("candidate_ratio").get<double>();
      d.loc_ratio = jd.at("loc_ratio").get<double>();
      d.lead_frames = jd.at("lead_frames").get<int>();
      d.span_frames = jd.at("span_frames").get<int>();
      d.merge_gap = jd.at("merge_gap").get<int>();
      const nlohmann::json& w1 = jd.at("w1");
      if (w1.size() != kMlpHidden) fail("schema", "detector w1 must have 32 rows");
      for (std::size_t r = 0; r < kMlpHidden; ++r) {
        if (w1[r].size() != kMlpInputs) fail("schema", "detector w1 rows must have 4 entries");
        for (std::size_t c = 0; c < kMlpInputs; ++c) d.mlp.w1[r][c] = w1[r][c].get<double>();
      }
      const nlohmann::json& b1 = jd.at("b1");
      const nlohmann::json& w2 = jd.at("w2");
      if (b1.size() != kMlpHidden || w2.size() != kMlpHidden)
        fail("schema", "detector b1/w2 must have 32 entries");
      for (std::size_t r = 0; r < kMlpHidden; ++r) {
        d.mlp.b1[r] = b1[r].get<double>();
        d.mlp.w2[r] = w2[r].get<double>();
      }
      d.mlp.b2 = jd.at("b2").get<double>();
      m.detector = d;
    }
    if (j.contains("mode_weights")) {
      const nlohmann::json& jm = j["mode_weights"];
      ModeWeights w;
      const nlohmann::json& jw = jm.at("w");
      const nlohmann::json& jb = jm.at("b");
      if (jw.size() != 3 || jb.size() != 3) fail("schema", "mode weights need 3 rows");
      for (std::size_t r = 0; r < 3; ++r) {
        if (jw[r].size() != kModeFeatureCount)
          fail("schema", "mode weight rows must have 6 entries");
        for (std::size_t c = 0; c < kModeFeatureCount; ++c) w.w[r][c] = jw[r][c].get<double>();
        w.b[r] = jb[r].get<double>();
      }
      m.mode_weights = w;
    }
    if (j.contains("forecaster")) {
      const nlohmann::json& jf = j["forecaster"];
      GnnParams g;
      g.feature_dim = jf.at("feature_dim").get<int>();
      g.hidden = jf.at("hidden").get<int>();
      if (g.feature_dim != kNodeFeatureCount)
        fail("schema", "forecaster feature_dim mismatch");
      if (g.hidden < 1) fail("schema", "forecaster hidden must be positive");
      for (const nlohmann::json& jl : jf.at("layers")) {
        GnnParams::Layer layer;
        layer.msg_w = detail::mat_from_json(jl.at("msg_w"));
        layer.upd_w = detail::mat_from_json(jl.at("upd_w"));
        layer.msg_b = jl.at("msg_b").get<std::vector<double>>();
        layer.upd_b = jl.at("upd_b").get<std::vector<double>>();
        int in_dim = g.layers.empty() ? g.feature_dim : g.hidden;
        if (layer.msg_w.rows != g.hidden || layer.msg_w.cols != in_dim + 1 ||
            layer.upd_w.rows != g.hidden || layer.upd_w.cols != in_dim + g.hidden ||
            static_cast<int>(layer.msg_b.size()) != g.hidden ||
            static_cast<int>(layer.upd_b.size()) != g.hidden)
          fail("schema", "forecaster layer shapes are inconsistent");
        g.layers.push_back(std::move(layer));
      }
      if (g.layers.empty()) fail("schema", "forecaster needs at least one round");
      g.out_w = detail::mat_from_json(jf.at("out_w"));
      g.out_b = jf.at("out_b").get<std::vector<double>>();
      if (g.out_w.rows != kForecastHeads || g.out_w.cols != g.hidden ||
          static_cast<int>(g.out_b.size()) != kForecastHeads)
        fail("schema", "forecaster readout shapes are inconsistent");
      m.forecaster = g;
    }
  } catch (const nlohmann::json::exception& e) {
    fail("schema", std::string("model file structure: ") + e.what());
  }
  return m;
}

inline ModelFile load_model(const std::string& path) { return parse_model(read_text_file(path)); }

inline void save_model(const std::string& path, const ModelFile& m) {
  write_text_file(path, serialize_model(m));
}

}  // namespace rdz
