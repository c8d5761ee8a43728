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

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rdz/io.hpp"
#include "rdz/metrics.hpp"
#include "rdz/sim.hpp"

namespace {

namespace fs = std::filesystem;

int log_level() {
  const char* v = std::getenv("DZ_LOG");
  return v ? std::atoi(v) : 0;
}

void logv(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << "[rdz] " << msg << "\n";
}

struct Options {
  std::string config;
  std::string input;
  std::string output;
  std::string model;
  long long seed = -1;  // negative means "use the config seeds"
};

void add_common(CLI::App* cmd, Options* o, bool needs_input, bool needs_output,
                bool needs_model) {
  cmd->add_option("--config", o->config, "pipeline configuration file")->required();
  auto* in = cmd->add_option("--input", o->input, "input file or directory");
  auto* out = cmd->add_option("--output", o->output, "output directory");
  auto* model = cmd->add_option("--model", o->model, "model file");
  cmd->add_option("--seed", o->seed, "override the config seed");
  if (needs_input) in->required();
  if (needs_output) out->required();
  if (needs_model) model->required();
}

rdz::RunConfig load_run_config(const Options& o) {
  rdz::RunConfig cfg = rdz::load_config(o.config);
  logv(2, "loaded config " + o.config);
  return cfg;
}

rdz::RoundaboutMap load_map_for(const Options& o, const rdz::RunConfig& cfg) {
  if (cfg.map_path.empty()) rdz::fail("schema", "config has no [paths] map entry");
  fs::path p(cfg.map_path);
  if (p.is_relative()) p = fs::path(o.config).parent_path() / p;
  logv(2, "loading map " + p.string());
  return rdz::load_map(p.string());
}

fs::path ensure_output(const Options& o) {
  fs::path dir(o.output);
  fs::create_directories(dir);
  return dir;
}

rdz::ModeWeights mode_weights_for(const rdz::ModelFile& m) {
  return m.mode_weights ? *m.mode_weights : rdz::ModeWeights::tuned_defaults();
}

int cmd_simulate(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  rdz::RoundaboutMap map = load_map_for(o, cfg);
  if (o.seed >= 0) cfg.sim.seed = static_cast<std::uint64_t>(o.seed);
  rdz::SimResult result = rdz::simulate(map, cfg.sim);
  fs::path dir = ensure_output(o);
  rdz::save_trajectories((dir / "trajectories.csv").string(), result.trajectories);
  rdz::write_text_file((dir / "events.csv").string(), rdz::serialize_events(result.events));
  std::cout << fmt::format("simulated {}s: {} agents, {} events, {} hard brakes, {} collisions\n",
                           cfg.sim.duration, result.trajectories.size(), result.events.size(),
                           result.hard_brake_count, result.collisions.size());
  return 0;
}

int cmd_mine(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  rdz::RoundaboutMap map = load_map_for(o, cfg);
  std::vector<rdz::Trajectory> traj = rdz::load_trajectories(o.input, cfg.columns);
  rdz::FrameTable table(traj);
  std::vector<rdz::DzEvent> events = rdz::label_dz_events(traj, map, cfg.signal);
  logv(1, fmt::format("labeled {} ground-truth events", events.size()));
  std::vector<rdz::WindowScan> scans =
      rdz::scan_windows(table, map, rdz::ModeWeights::tuned_defaults(), cfg.signal, cfg.predictor);
  std::vector<rdz::WindowSample> windows =
      rdz::build_training_set(scans, events, cfg.predictor, cfg.mining);
  fs::path dir = ensure_output(o);
  rdz::write_text_file((dir / "windows.csv").string(), rdz::serialize_windows(windows));
  rdz::write_text_file((dir / "events.csv").string(), rdz::serialize_events(events));
  std::size_t positives = 0;
  for (const rdz::WindowSample& w : windows) positives += w.label ? 1 : 0;
  std::cout << fmt::format("mined {} windows ({} positive) from {} scans\n", windows.size(),
                           positives, scans.size());
  return 0;
}

int cmd_train_detector(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  if (o.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(o.seed);
  std::vector<rdz::WindowSample> windows = rdz::parse_windows(rdz::read_text_file(o.input));
  std::vector<rdz::WindowSample> train;
  std::vector<rdz::WindowSample> test;
  rdz::split_by_agent(windows, 0.2, cfg.train.seed, &train, &test);
  std::vector<rdz::LabeledSample> batch;
  for (const rdz::WindowSample& w : train) batch.push_back(rdz::to_labeled(w));
  rdz::MlpTrainResult trained = rdz::mlp_train(batch, cfg.train);

  rdz::ModelFile model;
  if (!o.model.empty() && fs::exists(o.model)) model = rdz::load_model(o.model);
  rdz::DetectorParams det;
  det.mlp = trained.params;
  det.threshold = cfg.detector_threshold;
  det.candidate_ratio = cfg.mining.ratio_threshold;
  det.loc_ratio = cfg.loc_ratio;
  det.lead_frames = cfg.lead_frames;
  det.span_frames = cfg.span_frames;
  det.merge_gap = cfg.merge_gap;
  model.detector = det;
  if (!model.mode_weights) model.mode_weights = rdz::ModeWeights::tuned_defaults();
  rdz::save_model(o.model, model);

  auto report = [&det](std::span<const rdz::WindowSample> set) {
    rdz::ClassificationCounts c;
    for (const rdz::WindowSample& w : set) {
      bool pred = rdz::mlp_forward(det.mlp, w.deltas) > det.threshold;
      if (pred && w.label) ++c.tp;
      else if (pred && !w.label) ++c.fp;
      else if (!pred && w.label) ++c.fn;
      else ++c.tn;
    }
    return rdz::classification_report(c);
  };
  rdz::ClassificationReport tr = report(train);
  rdz::ClassificationReport te = report(test);
  std::cout << fmt::format(
      "trained on {} windows (test {}): train f1 {:.3f}, test f1 {:.3f}, test fpr {:.3f}, test "
      "recall {:.3f}, final loss {:.4f}\n",
      train.size(), test.size(), tr.f1, te.f1, te.fpr, te.recall,
      trained.loss_trace.empty() ? 0.0 : trained.loss_trace.back());
  return 0;
}

int cmd_detect(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  rdz::RoundaboutMap map = load_map_for(o, cfg);
  rdz::ModelFile model = rdz::load_model(o.model);
  if (!model.detector) rdz::fail("schema", "model file lacks a detector section");
  std::vector<rdz::Trajectory> traj = rdz::load_trajectories(o.input, cfg.columns);
  rdz::FrameTable table(traj);
  std::vector<rdz::WindowScan> scans =
      rdz::scan_windows(table, map, mode_weights_for(model), cfg.signal, cfg.predictor);
  std::vector<rdz::DzDetection> detections =
      rdz::detect(scans, table, cfg.predictor, *model.detector);
  std::vector<rdz::DzEvent> rows;
  for (const rdz::DzDetection& d : detections)
    rows.push_back({d.agent_id, d.first_frame, d.last_frame, d.t_start, d.t_end, 0});
  fs::path dir = ensure_output(o);
  rdz::write_text_file((dir / "detections.csv").string(), rdz::serialize_events(rows));
  std::cout << fmt::format("detected {} intervals over {} windows\n", detections.size(),
                           scans.size());
  return 0;
}

int cmd_train_forecaster(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  rdz::RoundaboutMap map = load_map_for(o, cfg);
  if (o.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(o.seed);
  std::vector<rdz::Trajectory> traj = rdz::load_trajectories(o.input, cfg.columns);
  rdz::FrameTable table(traj);
  std::vector<rdz::DzEvent> events = rdz::label_dz_events(traj, map, cfg.signal);
  std::vector<rdz::LabeledScene> scenes = rdz::build_training_scenes(
      table, map, events, cfg.signal, cfg.label_horizon, cfg.frame_stride);
  logv(1, fmt::format("built {} training scenes from {} events", scenes.size(), events.size()));
  rdz::GnnTrainResult trained =
      rdz::train_forecaster(scenes, cfg.forecaster_hidden, cfg.forecaster_rounds, cfg.train);
  rdz::ModelFile model;
  if (!o.model.empty() && fs::exists(o.model)) model = rdz::load_model(o.model);
  model.forecaster = trained.params;
  if (!model.mode_weights) model.mode_weights = rdz::ModeWeights::tuned_defaults();
  rdz::save_model(o.model, model);
  std::cout << fmt::format("trained forecaster on {} scenes, final loss {:.4f}\n", scenes.size(),
                           trained.loss_trace.empty() ? 0.0 : trained.loss_trace.back());
  return 0;
}

int cmd_forecast(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  rdz::RoundaboutMap map = load_map_for(o, cfg);
  rdz::ModelFile model = rdz::load_model(o.model);
  if (!model.forecaster) rdz::fail("schema", "model file lacks a forecaster section");
  std::vector<rdz::Trajectory> traj = rdz::load_trajectories(o.input, cfg.columns);
  rdz::FrameTable table(traj);
  std::string out = "frame,agent_id,p_dilemma,p_causal,p_pass\n";
  for (std::int64_t f = table.first_frame(); f <= table.last_frame(); f += cfg.frame_stride) {
    std::span<const rdz::TrackedAgent> scene = table.scene(f);
    if (scene.empty()) continue;
    rdz::SceneGraph g = rdz::build_scene_graph(scene, map, cfg.signal);
    for (const rdz::NodeProbabilities& p : rdz::forecast(g, *model.forecaster))
      out += fmt::format("{},{},{},{},{}\n", f, p.agent_id, p.p_dilemma, p.p_causal, p.p_pass);
  }
  fs::path dir = ensure_output(o);
  rdz::write_text_file((dir / "forecast.csv").string(), out);
  std::cout << fmt::format("forecast written for frames {}..{}\n", table.first_frame(),
                           table.last_frame());
  return 0;
}

int cmd_evaluate(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  fs::path dir(o.input);
  std::vector<rdz::Trajectory> traj =
      rdz::load_trajectories((dir / "trajectories.csv").string(), cfg.columns);
  rdz::FrameTable table(traj);
  std::vector<rdz::DzEvent> truth =
      rdz::load_events((dir / "events.csv").string(), table.dt());
  std::vector<rdz::DzEvent> detections =
      rdz::load_events((dir / "detections.csv").string(), table.dt());

  rdz::ClassificationCounts counts;
  for (const auto& [id, t] : table.agents()) {
    std::int64_t first = table.agent_first_frame(id);
    std::int64_t last = table.agent_last_frame(id);
    for (std::int64_t f = first; f <= last; ++f) {
      auto covered = [&](std::span<const rdz::DzEvent> set) {
        for (const rdz::DzEvent& e : set)
          if (e.agent_id == id && e.first_frame <= f && f <= e.last_frame) return true;
        return false;
      };
      bool pred = covered(detections);
      bool real = covered(truth);
      if (pred && real) ++counts.tp;
      else if (pred && !real) ++counts.fp;
      else if (!pred && real) ++counts.fn;
      else ++counts.tn;
    }
  }
  rdz::ClassificationReport rep = rdz::classification_report(counts);

  auto to_intervals = [&table](std::span<const rdz::DzEvent> set) {
    std::vector<rdz::AgentInterval> out;
    for (const rdz::DzEvent& e : set)
      out.push_back({e.agent_id, e.t_start, e.t_end + table.dt()});
    return out;
  };
  std::vector<rdz::AgentInterval> det_iv = to_intervals(detections);
  std::vector<rdz::AgentInterval> tru_iv = to_intervals(truth);
  rdz::TemporalIouResult iou = rdz::temporal_iou(det_iv, tru_iv);

  std::string report;
  report += fmt::format("frames = {}\n", counts.tp + counts.fp + counts.fn + counts.tn);
  report += fmt::format("tp = {}\n", counts.tp);
  report += fmt::format("fp = {}\n", counts.fp);
  report += fmt::format("fn = {}\n", counts.fn);
  report += fmt::format("tn = {}\n", counts.tn);
  report += fmt::format("fpr = {}\n", rep.fpr);
  report += fmt::format("recall = {}\n", rep.recall);
  report += fmt::format("precision = {}\n", rep.precision);
  report += fmt::format("f1 = {}\n", rep.f1);
  report += fmt::format("degenerate = {}\n", rep.degenerate ? "true" : "false");
  report += fmt::format("iou_intersection = {}\n", iou.intersection);
  report += fmt::format("iou_union = {}\n", iou.union_length);
  report += fmt::format("temporal_iou = {}\n", iou.iou);
  report += fmt::format("iou_degenerate = {}\n", iou.degenerate ? "true" : "false");
  fs::path out_dir = ensure_output(o);
  rdz::write_text_file((out_dir / "report.txt").string(), report);
  std::cout << report;
  return 0;
}

int cmd_maneuver_study(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  rdz::RoundaboutMap map = load_map_for(o, cfg);
  rdz::ModelFile model = rdz::load_model(o.model);
  if (!model.forecaster) rdz::fail("schema", "model file lacks a forecaster section");
  std::uint64_t base = o.seed >= 0 ? static_cast<std::uint64_t>(o.seed) : cfg.sim.seed;

  std::vector<rdz::ManeuverScenario> pool;
  int pass = 0;
  int stop = 0;
  const int kMaxRuns = 80;
  for (int run = 0; run < kMaxRuns && (pass < 100 || stop < 100); ++run) {
    rdz::SimConfig sim_cfg = cfg.sim;
    sim_cfg.seed = base + static_cast<std::uint64_t>(run);
    rdz::SimResult result = rdz::simulate(map, sim_cfg);
    std::vector<rdz::ManeuverScenario> found =
        rdz::sample_scenarios(result, map, cfg.signal, cfg.predictor);
    for (rdz::ManeuverScenario& sc : found) {
      (sc.pass_opportunity ? pass : stop) += 1;
      pool.push_back(std::move(sc));
    }
    logv(1, fmt::format("seed {}: pool now pass={} stop={}", sim_cfg.seed, pass, stop));
  }
  rdz::ManeuverReport rep =
      rdz::maneuver_experiment(pool, map, mode_weights_for(model), cfg.predictor, cfg.signal,
                               *model.forecaster, 100);

  std::string out = "bucket,action,scenarios,collision_free,fraction\n";
  auto emit = [&out](const char* bucket, const rdz::ManeuverCell& c) {
    out += fmt::format("{},{},{},{},{}\n", bucket, c.action, c.scenarios, c.collision_free,
                       c.fraction());
  };
  for (const rdz::ManeuverCell& c : rep.high_pass) emit("p_pass>0.5", c);
  for (const rdz::ManeuverCell& c : rep.low_pass) emit("p_pass<=0.5", c);
  fs::path dir = ensure_output(o);
  rdz::write_text_file((dir / "maneuver.csv").string(), out);
  std::cout << out;
  return 0;
}

int cmd_export_roc(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  rdz::RoundaboutMap map = load_map_for(o, cfg);
  rdz::ModelFile model = rdz::load_model(o.model);
  if (!model.detector) rdz::fail("schema", "model file lacks a detector section");
  std::vector<rdz::Trajectory> traj = rdz::load_trajectories(o.input, cfg.columns);
  rdz::FrameTable table(traj);
  std::vector<rdz::DzEvent> events = rdz::label_dz_events(traj, map, cfg.signal);
  std::vector<rdz::WindowScan> scans =
      rdz::scan_windows(table, map, mode_weights_for(model), cfg.signal, cfg.predictor);
  std::vector<rdz::WindowSample> windows =
      rdz::build_training_set(scans, events, cfg.predictor, cfg.mining);
  std::vector<rdz::WindowSample> train;
  std::vector<rdz::WindowSample> test;
  rdz::split_by_agent(windows, 0.2, cfg.train.seed, &train, &test);

  std::vector<double> scores;
  std::vector<double> baseline;
  std::vector<bool> labels;
  for (const rdz::WindowSample& w : test) {
    scores.push_back(rdz::mlp_forward(model.detector->mlp, w.deltas));
    baseline.push_back(w.deltas[0] + w.deltas[1] + w.deltas[2] + w.deltas[3]);
    labels.push_back(w.label);
  }
  rdz::RocCurve roc = rdz::roc_points(scores, labels);
  rdz::RocCurve base = rdz::roc_points(baseline, labels);
  fs::path dir = ensure_output(o);
  rdz::write_text_file((dir / "roc.csv").string(), rdz::serialize_roc(roc));
  rdz::write_text_file((dir / "roc_baseline.csv").string(), rdz::serialize_roc(base));
  std::cout << fmt::format("auc = {}\nbaseline_auc = {}\n", roc.auc, base.auc);
  return 0;
}

int cmd_export_deviations(const Options& o) {
  rdz::RunConfig cfg = load_run_config(o);
  rdz::RoundaboutMap map = load_map_for(o, cfg);
  rdz::ModeWeights weights = rdz::ModeWeights::tuned_defaults();
  if (!o.model.empty()) weights = mode_weights_for(rdz::load_model(o.model));
  std::vector<rdz::Trajectory> traj = rdz::load_trajectories(o.input, cfg.columns);
  rdz::FrameTable table(traj);
  std::vector<rdz::WindowScan> scans =
      rdz::scan_windows(table, map, weights, cfg.signal, cfg.predictor);
  fs::path dir = ensure_output(o);
  rdz::write_text_file((dir / "deviations.csv").string(),
                       rdz::serialize_deviations(scans, table.dt()));
  std::cout << fmt::format("exported {} window deviations\n", scans.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roundabout dilemma-zone mining, detection, and forecasting pipeline"};
  app.require_subcommand(1);

  Options opt;
  CLI::App* c_sim = app.add_subcommand("simulate", "run the seeded micro-simulator");
  add_common(c_sim, &opt, false, true, false);
  CLI::App* c_mine = app.add_subcommand("mine", "label events and mine deviation windows");
  add_common(c_mine, &opt, true, true, false);
  CLI::App* c_traind = app.add_subcommand("train-detector", "train the window classifier");
  add_common(c_traind, &opt, true, false, true);
  CLI::App* c_detect = app.add_subcommand("detect", "detect dilemma events in trajectories");
  add_common(c_detect, &opt, true, true, true);
  CLI::App* c_trainf = app.add_subcommand("train-forecaster", "train the scene forecaster");
  add_common(c_trainf, &opt, true, false, true);
  CLI::App* c_fore = app.add_subcommand("forecast", "per-frame node probabilities");
  add_common(c_fore, &opt, true, true, true);
  CLI::App* c_eval = app.add_subcommand("evaluate", "score detections against ground truth");
  add_common(c_eval, &opt, true, true, false);
  CLI::App* c_man = app.add_subcommand("maneuver-study", "collision-free grid over actions");
  add_common(c_man, &opt, false, true, true);
  CLI::App* c_roc = app.add_subcommand("export-roc", "ROC rows for the trained detector");
  add_common(c_roc, &opt, true, true, true);
  CLI::App* c_dev = app.add_subcommand("export-deviations", "per-window deviation series");
  add_common(c_dev, &opt, true, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error:usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (c_sim->parsed()) return cmd_simulate(opt);
    if (c_mine->parsed()) return cmd_mine(opt);
    if (c_traind->parsed()) return cmd_train_detector(opt);
    if (c_detect->parsed()) return cmd_detect(opt);
    if (c_trainf->parsed()) return cmd_train_forecaster(opt);
    if (c_fore->parsed()) return cmd_forecast(opt);
    if (c_eval->parsed()) return cmd_evaluate(opt);
    if (c_man->parsed()) return cmd_maneuver_study(opt);
    if (c_roc->parsed()) return cmd_export_roc(opt);
    if (c_dev->parsed()) return cmd_export_deviations(opt);
  } catch (const rdz::Error& e) {
    std::cerr << "error:" << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error:internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
