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
#include <map>
#include <span>
#include <vector>

#include "rdz/error.hpp"
#include "rdz/geometry.hpp"

namespace rdz {

struct ClassificationCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;
};

/// Ratio metrics over binary counts. Any metric whose denominator is zero is
/// reported as 0 and flips the degenerate flag instead of dividing.
struct ClassificationReport {
  ClassificationCounts counts;
  double fpr = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  bool degenerate = false;
};

inline ClassificationReport classification_report(const ClassificationCounts& c) {
  ClassificationReport r;
  r.counts = c;
  auto ratio = [&r](long num, long den) {
    if (den == 0) {
      r.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.fpr = ratio(c.fp, c.fp + c.tn);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.precision = ratio(c.tp, c.tp + c.fp);
  if (r.precision + r.recall == 0.0) {
    r.degenerate = true;
    r.f1 = 0.0;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

inline ClassificationReport classification_report(const std::vector<bool>& predictions,
                                                  const std::vector<bool>& labels) {
  if (predictions.size() != labels.size())
    fail("schema", "predictions and labels differ in length");
  ClassificationCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] && labels[i]) ++c.tp;
    else if (predictions[i] && !labels[i]) ++c.fp;
    else if (!predictions[i] && labels[i]) ++c.fn;
    else ++c.tn;
  }
  return classification_report(c);
}

/// Half-open time interval [begin, end) attributed to one agent.
struct AgentInterval {
  AgentId agent_id = 0;
  double begin = 0.0;
  double end = 0.0;
};

namespace detail {

/// Sort and merge overlapping or touching intervals; total length is then the
/// sum of the pieces.
inline std::vector<std::pair<double, double>> normalize_intervals(
    std::vector<std::pair<double, double>> v) {
  for (auto& [b, e] : v)
    if (e < b) fail("schema", "interval ends before it begins");
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  for (const auto& [b, e] : v) {
    if (!out.empty() && b <= out.back().second)
      out.back().second = std::max(out.back().second, e);
    else
      out.emplace_back(b, e);
  }
  return out;
}

inline double total_length(const std::vector<std::pair<double, double>>& v) {
  double s = 0.0;
  for (const auto& [b, e] : v) s += e - b;
  return s;
}

inline double intersection_length(const std::vector<std::pair<double, double>>& a,
                                  const std::vector<std::pair<double, double>>& b) {
  double s = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    double lo = std::max(a[i].first, b[j].first);
    double hi = std::min(a[i].second, b[j].second);
    if (hi > lo) s += hi - lo;
    if (a[i].second < b[j].second) ++i;
    else ++j;
  }
  return s;
}

}  // namespace detail

/// Continuous-time overlap score between detected and ground-truth intervals,
/// micro-aggregated: total intersection length over total union length, with
/// intervals of different agents never interacting. Zero union reports IoU 0
/// with the degenerate flag set.
struct TemporalIouResult {
  double intersection = 0.0;
  double union_length = 0.0;
  double iou = 0.0;
  bool degenerate = false;
};

inline TemporalIouResult temporal_iou(std::span<const AgentInterval> detected,
                                      std::span<const AgentInterval> truth) {
  std::map<AgentId, std::vector<std::pair<double, double>>> det;
  std::map<AgentId, std::vector<std::pair<double, double>>> tru;
  for (const AgentInterval& iv : detected) det[iv.agent_id].emplace_back(iv.begin, iv.end);
  for (const AgentInterval& iv : truth) tru[iv.agent_id].emplace_back(iv.begin, iv.end);

  TemporalIouResult r;
  std::vector<AgentId> agents;
  for (const auto& [id, _] : det) agents.push_back(id);
  for (const auto& [id, _] : tru)
    if (!det.count(id)) agents.push_back(id);
  for (AgentId id : agents) {
    auto a = detail::normalize_intervals(det.count(id) ? det[id] : std::vector<std::pair<double, double>>{});
    auto b = detail::normalize_intervals(tru.count(id) ? tru[id] : std::vector<std::pair<double, double>>{});
    double inter = detail::intersection_length(a, b);
    r.intersection += inter;
    r.union_length += detail::total_length(a) + detail::total_length(b) - inter;
  }
  if (r.union_length <= 0.0) {
    r.degenerate = true;
    r.iou = 0.0;
  } else {
    r.iou = r.intersection / r.union_length;
  }
  return r;
}

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Area under a curve of (fpr, tpr) points by the trapezoid rule. Points must
/// already be ordered by ascending fpr.
inline double trapezoid_auc(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    double w = points[i].fpr - points[i - 1].fpr;
    area += w * 0.5 * (points[i].tpr + points[i - 1].tpr);
  }
  return area;
}

/// ROC by sweeping the decision threshold over the unique scores in descending
/// order; a sample is predicted positive when score >= threshold. The curve is
/// anchored at (0,0) with threshold +inf and ends at (1,1) at the lowest
/// score. Requires both label classes.
inline RocCurve roc_curve(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size())
    fail("schema", "roc needs one label per score");
  long pos = 0;
  long neg = 0;
  for (bool y : labels) (y ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    fail("degenerate-labels", "roc curve needs both classes");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  long tp = 0;
  long fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({t, static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  curve.auc = trapezoid_auc(curve.points);
  return curve;
}

inline RocCurve roc_points(std::span<const double> scores, const std::vector<bool>& labels) {
  return roc_curve(scores, labels);
}

/// Average displacement error over a batch of per-step errors.
inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace rdz
