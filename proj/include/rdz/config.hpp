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

#include <array>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rdz/detector.hpp"
#include "rdz/sim.hpp"

namespace rdz {

inline constexpr std::array<const char*, 12> kTrajectoryColumns = {
    "frame", "time", "agent_id", "x",  "y",      "vx",
    "vy",    "ax",   "ay",       "heading", "length", "width"};

/// Every tunable of the pipeline in one declarative file. Unknown keys are
/// rejected on load. alpha and gamma are carried verbatim for forward
/// compatibility; nothing reads them yet.
struct RunConfig {
  SignalParams signal;
  PredictorConfig predictor;
  TrainConfig train;
  MiningParams mining;
  double detector_threshold = 0.5;
  double loc_ratio = 0.3;
  int lead_frames = 3;
  int span_frames = 4;
  int merge_gap = 1;
  SimConfig sim;
  int forecaster_hidden = 16;
  int forecaster_rounds = 2;
  int label_horizon = 4;
  int frame_stride = 1;
  double min_speed_mph = 15.0;
  double max_speed_mph = 25.0;
  double alpha = 0.5;
  double gamma = 0.2;
  std::string map_path;  // resolved relative to the config file when relative
  std::map<std::string, std::string> columns;  // canonical name -> file header

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, int line) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    fail("schema", fmt::format("line {}: expected a number, got '{}'", line, v));
  return x;
}

inline long long parse_int(const std::string& v, int line) {
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    fail("schema", fmt::format("line {}: expected an integer, got '{}'", line, v));
  return x;
}

inline bool parse_bool(const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail("schema", fmt::format("line {}: expected true or false, got '{}'", line, v));
}

/// Sectioned key = value scanner shared by the config and map formats.
/// Handler gets (section, key, value, line).
inline void scan_ini(const std::string& text,
                     const std::function<void(const std::string&, const std::string&,
                                              const std::string&, int)>& on_pair,
                     const std::function<void(const std::string&, int)>& on_section) {
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    std::size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail("schema", fmt::format("line {}: unterminated section", line));
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) fail("schema", fmt::format("line {}: empty section name", line));
      on_section(section, line);
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      fail("schema", fmt::format("line {}: expected key = value", line));
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail("schema", fmt::format("line {}: empty key", line));
    if (section.empty())
      fail("schema", fmt::format("line {}: key outside any section", line));
    on_pair(section, key, value, line);
  }
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;

  detail::scan_ini(
      text,
      [&c](const std::string& sec, const std::string& key, const std::string& v, int line) {
        auto unknown = [&] {
          fail("schema", fmt::format("line {}: unknown key {}.{}", line, sec, key));
        };
        if (sec == "dilemma") {
          if (key == "reaction_time") c.signal.dz.reaction_time = parse_double(v, line);
          else if (key == "accel") c.signal.dz.accel = parse_double(v, line);
          else if (key == "decel") c.signal.dz.decel = parse_double(v, line);
          else if (key == "road_width") c.signal.dz.road_width = parse_double(v, line);
          else if (key == "vehicle_length") c.signal.dz.vehicle_length = parse_double(v, line);
          else unknown();
        } else if (sec == "signal") {
          if (key == "t_max") c.signal.t_max = parse_double(v, line);
          else if (key == "d_t") c.signal.d_t = parse_double(v, line);
          else if (key == "yellow_only") c.signal.yellow_only = parse_bool(v, line);
          else unknown();
        } else if (sec == "predictor") {
          if (key == "history_steps") c.predictor.history_steps = static_cast<int>(parse_int(v, line));
          else if (key == "horizon_steps") c.predictor.horizon_steps = static_cast<int>(parse_int(v, line));
          else if (key == "dt") c.predictor.dt = parse_double(v, line);
          else if (key == "use_dz_features") c.predictor.use_dz_features = parse_bool(v, line);
          else if (key == "creep_speed") c.predictor.creep_speed = parse_double(v, line);
          else unknown();
        } else if (sec == "train") {
          if (key == "epochs") c.train.epochs = static_cast<int>(parse_int(v, line));
          else if (key == "batch_size") c.train.batch_size = static_cast<int>(parse_int(v, line));
          else if (key == "learning_rate") c.train.learning_rate = parse_double(v, line);
          else if (key == "seed") c.train.seed = static_cast<std::uint64_t>(parse_int(v, line));
          else unknown();
        } else if (sec == "detector") {
          if (key == "ratio_threshold") c.mining.ratio_threshold = parse_double(v, line);
          else if (key == "threshold") c.detector_threshold = parse_double(v, line);
          else if (key == "loc_ratio") c.loc_ratio = parse_double(v, line);
          else if (key == "lead_frames") c.lead_frames = static_cast<int>(parse_int(v, line));
          else if (key == "span_frames") c.span_frames = static_cast<int>(parse_int(v, line));
          else if (key == "merge_gap") c.merge_gap = static_cast<int>(parse_int(v, line));
          else unknown();
        } else if (sec == "sim") {
          if (key == "dt") c.sim.dt = parse_double(v, line);
          else if (key == "substeps") c.sim.substeps = static_cast<int>(parse_int(v, line));
          else if (key == "duration") c.sim.duration = parse_double(v, line);
          else if (key == "arrival_rate") c.sim.arrival_rate = parse_double(v, line);
          else if (key == "circulating_rate") c.sim.circulating_rate = parse_double(v, line);
          else if (key == "initial_circulating") c.sim.initial_circulating = static_cast<int>(parse_int(v, line));
          else if (key == "circulating_speed") c.sim.circulating_speed = parse_double(v, line);
          else if (key == "exit_travel") c.sim.exit_travel = parse_double(v, line);
          else if (key == "accel_max") c.sim.accel_max = parse_double(v, line);
          else if (key == "comfort_decel") c.sim.comfort_decel = parse_double(v, line);
          else if (key == "time_gap") c.sim.time_gap = parse_double(v, line);
          else if (key == "min_entry_gap") c.sim.min_entry_gap = parse_double(v, line);
          else if (key == "reaction_time") c.sim.profile.reaction_time = parse_double(v, line);
          else if (key == "hard_brake_decel") c.sim.profile.hard_brake_decel = parse_double(v, line);
          else if (key == "dz_brake_probability") c.sim.profile.dz_brake_probability = parse_double(v, line);
          else if (key == "seed") c.sim.seed = static_cast<std::uint64_t>(parse_int(v, line));
          else unknown();
        } else if (sec == "forecaster") {
          if (key == "hidden") c.forecaster_hidden = static_cast<int>(parse_int(v, line));
          else if (key == "rounds") c.forecaster_rounds = static_cast<int>(parse_int(v, line));
          else if (key == "label_horizon") c.label_horizon = static_cast<int>(parse_int(v, line));
          else if (key == "frame_stride") c.frame_stride = static_cast<int>(parse_int(v, line));
          else unknown();
        } else if (sec == "limits") {
          if (key == "min_speed_mph") c.min_speed_mph = parse_double(v, line);
          else if (key == "max_speed_mph") c.max_speed_mph = parse_double(v, line);
          else unknown();
        } else if (sec == "extras") {
          if (key == "alpha") c.alpha = parse_double(v, line);
          else if (key == "gamma") c.gamma = parse_double(v, line);
          else unknown();
        } else if (sec == "paths") {
          if (key == "map") c.map_path = v;
          else unknown();
        } else if (sec == "columns") {
          bool known = false;
          for (const char* col : kTrajectoryColumns)
            if (key == col) known = true;
          if (!known) unknown();
          c.columns[key] = v;
        } else {
          fail("schema", fmt::format("line {}: unknown section [{}]", line, sec));
        }
      },
      [](const std::string&, int) {});

  // mph speed band converts once at the boundary; simulate consumes m/s.
  c.sim.min_desired_speed = c.min_speed_mph * kMphToMps;
  c.sim.max_desired_speed = c.max_speed_mph * kMphToMps;
  c.sim.signal = c.signal;
  validate(c.sim);
  if (c.predictor.history_steps < 1 || c.predictor.horizon_steps < 1 || !(c.predictor.dt > 0.0))
    fail("schema", "predictor steps must be positive");
  if (c.train.epochs < 0 || c.train.batch_size < 1 || !(c.train.learning_rate >= 0.0))
    fail("schema", "train section invalid");
  if (c.forecaster_hidden < 1 || c.forecaster_rounds < 1)
    fail("schema", "forecaster architecture fields must be positive");
  if (c.label_horizon < 1 || c.frame_stride < 1)
    fail("schema", "forecaster label fields must be positive");
  if (!(c.min_speed_mph <= c.max_speed_mph)) fail("schema", "speed limit band inverted");
  return c;
}

inline std::string serialize_config(const RunConfig& c) {
  std::string out;
  auto d = [](double x) { return fmt::format("{}", x); };
  out += "[dilemma]\n";
  out += fmt::format("reaction_time = {}\n", d(c.signal.dz.reaction_time));
  out += fmt::format("accel = {}\n", d(c.signal.dz.accel));
  out += fmt::format("decel = {}\n", d(c.signal.dz.decel));
  out += fmt::format("road_width = {}\n", d(c.signal.dz.road_width));
  out += fmt::format("vehicle_length = {}\n\n", d(c.signal.dz.vehicle_length));
  out += "[signal]\n";
  out += fmt::format("t_max = {}\n", d(c.signal.t_max));
  out += fmt::format("d_t = {}\n", d(c.signal.d_t));
  out += fmt::format("yellow_only = {}\n\n", c.signal.yellow_only ? "true" : "false");
  out += "[predictor]\n";
  out += fmt::format("history_steps = {}\n", c.predictor.history_steps);
  out += fmt::format("horizon_steps = {}\n", c.predictor.horizon_steps);
  out += fmt::format("dt = {}\n", d(c.predictor.dt));
  out += fmt::format("use_dz_features = {}\n", c.predictor.use_dz_features ? "true" : "false");
  out += fmt::format("creep_speed = {}\n\n", d(c.predictor.creep_speed));
  out += "[train]\n";
  out += fmt::format("epochs = {}\n", c.train.epochs);
  out += fmt::format("batch_size = {}\n", c.train.batch_size);
  out += fmt::format("learning_rate = {}\n", d(c.train.learning_rate));
  out += fmt::format("seed = {}\n\n", c.train.seed);
  out += "[detector]\n";
  out += fmt::format("ratio_threshold = {}\n", d(c.mining.ratio_threshold));
  out += fmt::format("threshold = {}\n", d(c.detector_threshold));
  out += fmt::format("loc_ratio = {}\n", d(c.loc_ratio));
  out += fmt::format("lead_frames = {}\n", c.lead_frames);
  out += fmt::format("span_frames = {}\n", c.span_frames);
  out += fmt::format("merge_gap = {}\n\n", c.merge_gap);
  out += "[sim]\n";
  out += fmt::format("dt = {}\n", d(c.sim.dt));
  out += fmt::format("substeps = {}\n", c.sim.substeps);
  out += fmt::format("duration = {}\n", d(c.sim.duration));
  out += fmt::format("arrival_rate = {}\n", d(c.sim.arrival_rate));
  out += fmt::format("circulating_rate = {}\n", d(c.sim.circulating_rate));
  out += fmt::format("initial_circulating = {}\n", c.sim.initial_circulating);
  out += fmt::format("circulating_speed = {}\n", d(c.sim.circulating_speed));
  out += fmt::format("exit_travel = {}\n", d(c.sim.exit_travel));
  out += fmt::format("accel_max = {}\n", d(c.sim.accel_max));
  out += fmt::format("comfort_decel = {}\n", d(c.sim.comfort_decel));
  out += fmt::format("time_gap = {}\n", d(c.sim.time_gap));
  out += fmt::format("min_entry_gap = {}\n", d(c.sim.min_entry_gap));
  out += fmt::format("reaction_time = {}\n", d(c.sim.profile.reaction_time));
  out += fmt::format("hard_brake_decel = {}\n", d(c.sim.profile.hard_brake_decel));
  out += fmt::format("dz_brake_probability = {}\n", d(c.sim.profile.dz_brake_probability));
  out += fmt::format("seed = {}\n\n", c.sim.seed);
  out += "[forecaster]\n";
  out += fmt::format("hidden = {}\n", c.forecaster_hidden);
  out += fmt::format("rounds = {}\n", c.forecaster_rounds);
  out += fmt::format("label_horizon = {}\n", c.label_horizon);
  out += fmt::format("frame_stride = {}\n\n", c.frame_stride);
  out += "[limits]\n";
  out += fmt::format("min_speed_mph = {}\n", d(c.min_speed_mph));
  out += fmt::format("max_speed_mph = {}\n\n", d(c.max_speed_mph));
  out += "[extras]\n";
  out += fmt::format("alpha = {}\n", d(c.alpha));
  out += fmt::format("gamma = {}\n", d(c.gamma));
  if (!c.map_path.empty()) {
    out += "\n[paths]\n";
    out += fmt::format("map = {}\n", c.map_path);
  }
  if (!c.columns.empty()) {
    out += "\n[columns]\n";
    for (const auto& [k, v] : c.columns) out += fmt::format("{} = {}\n", k, v);
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot write " + path);
  out << text;
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

inline void save_config(const std::string& path, const RunConfig& c) {
  write_text_file(path, serialize_config(c));
}

inline Vec2 parse_vec2(const std::string& v, int line) {
  std::istringstream ss(v);
  double x = 0.0;
  double y = 0.0;
  if (!(ss >> x >> y)) fail("schema", fmt::format("line {}: expected two numbers", line));
  std::string rest;
  if (ss >> rest) fail("schema", fmt::format("line {}: trailing content '{}'", line, rest));
  return {x, y};
}

/// Map file: one [roundabout] section plus one [leg NAME] section per
/// approach. Centerline points are semicolon-separated "x y" pairs ordered
/// from upstream toward the ring.
inline RoundaboutMap parse_map(const std::string& text) {
  RoundaboutMap map;
  map.legs.clear();
  bool seen_roundabout = false;
  std::string current;

  detail::scan_ini(
      text,
      [&](const std::string& sec, const std::string& key, const std::string& v, int line) {
        auto unknown = [&] {
          fail("schema", fmt::format("line {}: unknown key {}.{}", line, sec, key));
        };
        if (sec == "roundabout") {
          if (key == "center") map.center = parse_vec2(v, line);
          else if (key == "inner_radius") map.inner_radius = detail::parse_double(v, line);
          else if (key == "outer_radius") map.outer_radius = detail::parse_double(v, line);
          else if (key == "lane_width") map.lane_width = detail::parse_double(v, line);
          else if (key == "circulation") {
            if (v == "ccw") map.circulation = Circulation::CounterClockwise;
            else if (v == "cw") map.circulation = Circulation::Clockwise;
            else fail("schema", fmt::format("line {}: circulation must be ccw or cw", line));
          } else unknown();
        } else if (sec == current && !current.empty()) {
          ApproachLeg& leg = map.legs.back();
          if (key == "centerline") {
            std::istringstream parts(v);
            std::string piece;
            leg.centerline.clear();
            while (std::getline(parts, piece, ';')) {
              piece = detail::trim(piece);
              if (!piece.empty()) leg.centerline.push_back(parse_vec2(piece, line));
            }
            if (leg.centerline.size() < 2)
              fail("schema", fmt::format("line {}: centerline needs at least two points", line));
          } else if (key == "yield") leg.yield_point = parse_vec2(v, line);
          else if (key == "conflict") leg.conflict_point = parse_vec2(v, line);
          else unknown();
        } else {
          fail("schema", fmt::format("line {}: unknown section [{}]", line, sec));
        }
      },
      [&](const std::string& sec, int line) {
        if (sec == "roundabout") {
          seen_roundabout = true;
          current.clear();
          return;
        }
        if (sec.rfind("leg ", 0) == 0) {
          ApproachLeg leg;
          leg.leg_id = detail::trim(sec.substr(4));
          if (leg.leg_id.empty()) fail("schema", fmt::format("line {}: leg needs a name", line));
          map.legs.push_back(leg);
          current = sec;
          return;
        }
        fail("schema", fmt::format("line {}: unknown section [{}]", line, sec));
      });

  if (!seen_roundabout) fail("schema", "map file lacks a [roundabout] section");
  validate(map);
  return map;
}

inline std::string serialize_map(const RoundaboutMap& map) {
  auto d = [](double x) { return fmt::format("{}", x); };
  std::string out = "[roundabout]\n";
  out += fmt::format("center = {} {}\n", d(map.center.x), d(map.center.y));
  out += fmt::format("inner_radius = {}\n", d(map.inner_radius));
  out += fmt::format("outer_radius = {}\n", d(map.outer_radius));
  out += fmt::format("lane_width = {}\n", d(map.lane_width));
  out += fmt::format("circulation = {}\n",
                     map.circulation == Circulation::CounterClockwise ? "ccw" : "cw");
  for (const ApproachLeg& leg : map.legs) {
    out += fmt::format("\n[leg {}]\n", leg.leg_id);
    out += "centerline = ";
    for (std::size_t i = 0; i < leg.centerline.size(); ++i) {
      if (i) out += "; ";
      out += fmt::format("{} {}", d(leg.centerline[i].x), d(leg.centerline[i].y));
    }
    out += "\n";
    out += fmt::format("yield = {} {}\n", d(leg.yield_point.x), d(leg.yield_point.y));
    out += fmt::format("conflict = {} {}\n", d(leg.conflict_point.x), d(leg.conflict_point.y));
  }
  return out;
}

inline RoundaboutMap load_map(const std::string& path) { return parse_map(read_text_file(path)); }

inline void save_map(const std::string& path, const RoundaboutMap& map) {
  write_text_file(path, serialize_map(map));
}

}  // namespace rdz
