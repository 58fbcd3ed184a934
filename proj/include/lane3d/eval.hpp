#pragma once

// 3D lane evaluation: pair costs with visibility penalty, one-to-one
// min-cost matching, the 75% point rule, F1, category accuracy and near/far
// x/z errors.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lane3d/assignment.hpp"
#include "lane3d/lane.hpp"
#include "lane3d/parallel.hpp"

namespace lane3d {

struct EvalConfig {
  double distance_threshold = 1.5;  // m, per-point match threshold
  double match_ratio = 0.75;        // fraction of visible gt points within threshold
  double visibility_penalty = 1.5;  // m, per-point cost when visibility disagrees
  double near_far_boundary = 40.0;  // m, y split for the error metrics
  double prob_threshold = 0.5;      // minimum non-background probability of a prediction
  double visibility_threshold = 0.5;  // visibility >= this counts as visible
  double unmatched_cost = 1000.0;   // cost of leaving a lane unmatched

  void validate() const {
    detail::require(distance_threshold > 0.0 && visibility_penalty > 0.0 && near_far_boundary > 0.0 &&
                        prob_threshold > 0.0 && visibility_threshold > 0.0 && unmatched_cost > 0.0,
                    "EvalConfig: thresholds must be positive");
    detail::require(match_ratio > 0.0 && match_ratio <= 1.0, "EvalConfig: match_ratio must lie in (0,1]");
  }
};

struct PairCost {
  double cost = 0.0;
  std::vector<bool> pointwise_ok;  // distance below threshold at a gt-visible point
  std::size_t gt_visible = 0;
  std::size_t ok_count = 0;

  /// True-positive rule: enough gt-visible points within the threshold.
  bool matched(double ratio) const {
    return gt_visible > 0 && static_cast<double>(ok_count) >= ratio * static_cast<double>(gt_visible);
  }
};

/// Per point: Euclidean (x, z) distance when both lanes are visible, the
/// visibility penalty when exactly one is, 0 when neither is. The pair cost is
/// the square root of the summed per-point distances.
inline PairCost lane_pair_cost(const Lane3D& gt, const Proposal& pred, const EvalConfig& cfg = {}) {
  const std::size_t n = gt.size();
  detail::require(pred.size() == n && pred.z.size() == n && pred.visibility.size() == n && gt.z.size() == n &&
                      gt.visibility.size() == n,
                  "lane_pair_cost: lane lengths differ");
  PairCost out;
  out.pointwise_ok.assign(n, false);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const bool gv = gt.visibility[k] >= cfg.visibility_threshold;
    const bool pv = pred.visibility[k] >= cfg.visibility_threshold;
    double d = 0.0;
    if (gv && pv)
      d = std::hypot(gt.x[k] - pred.x[k], gt.z[k] - pred.z[k]);
    else if (gv != pv)
      d = cfg.visibility_penalty;
    sum += d;
    if (gv) {
      ++out.gt_visible;
      if (d < cfg.distance_threshold) {
        out.pointwise_ok[k] = true;
        ++out.ok_count;
      }
    }
  }
  out.cost = std::sqrt(sum);
  return out;
}

struct MatchedPair {
  std::size_t gt = 0;
  std::size_t pred = 0;
  double cost = 0.0;
  bool true_positive = false;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;  // ascending gt index
  std::vector<std::size_t> unmatched_gts;
  std::vector<std::size_t> unmatched_preds;
  /// Sum of matched pair costs plus unmatched_cost per unmatched lane.
  double total_cost = 0.0;

  std::size_t true_positives() const {
    std::size_t n = 0;
    for (const auto& p : pairs) n += p.true_positive ? 1 : 0;
    return n;
  }
};

/// Optimal one-to-one partial matching between the given lanes, minimizing
/// matched pair costs plus `unmatched_cost` for every lane left unmatched.
/// Solved exactly as a square assignment problem padded with dummy lanes.
/// Every lane passed in participates; filtering happens in evaluate_frame.
inline MatchResult match_lanes(const std::vector<Lane3D>& gts, const std::vector<Proposal>& preds,
                               const EvalConfig& cfg = {}) {
  const std::size_t g = gts.size(), p = preds.size(), n = g + p;
  std::vector<std::vector<PairCost>> pc(g, std::vector<PairCost>(p));
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      pc[i][j] = lane_pair_cost(gts[i], preds[j], cfg);
      cost[i][j] = pc[i][j].cost;
    }
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = p; j < n; ++j) cost[i][j] = cfg.unmatched_cost;
  for (std::size_t i = g; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) cost[i][j] = cfg.unmatched_cost;

  const auto row_to_col = solve_min_cost_assignment(cost);
  MatchResult out;
  std::vector<bool> pred_used(p, false);
  for (std::size_t i = 0; i < g; ++i) {
    const auto j = static_cast<std::size_t>(row_to_col[i]);
    if (j < p) {
      out.pairs.push_back({i, j, pc[i][j].cost, pc[i][j].matched(cfg.match_ratio)});
      pred_used[j] = true;
      out.total_cost += pc[i][j].cost;
    } else {
      out.unmatched_gts.push_back(i);
      out.total_cost += cfg.unmatched_cost;
    }
  }
  for (std::size_t j = 0; j < p; ++j)
    if (!pred_used[j]) {
      out.unmatched_preds.push_back(j);
      out.total_cost += cfg.unmatched_cost;
    }
  return out;
}

/// Additive per-frame counts; frames combine by summation.
struct EvalTally {
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t category_correct = 0;
  double x_near_sum = 0.0, x_far_sum = 0.0, z_near_sum = 0.0, z_far_sum = 0.0;
  std::size_t near_points = 0, far_points = 0;
  std::size_t frames = 0;

  EvalTally& operator+=(const EvalTally& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    category_correct += o.category_correct;
    x_near_sum += o.x_near_sum;
    x_far_sum += o.x_far_sum;
    z_near_sum += o.z_near_sum;
    z_far_sum += o.z_far_sum;
    near_points += o.near_points;
    far_points += o.far_points;
    frames += o.frames;
    return *this;
  }
};

struct EvalReport {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> category_accuracy;  // absent without true positives
  std::optional<double> x_near, x_far, z_near, z_far;
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t frames = 0;
};

namespace detail {

inline bool has_visible_point(const std::vector<double>& vis, double threshold) {
  for (double v : vis)
    if (v >= threshold) return true;
  return false;
}

}  // namespace detail

/// Evaluates one frame. Predictions below the confidence threshold and lanes
/// with no visible point are dropped before matching.
inline EvalTally evaluate_frame(const std::vector<Lane3D>& gts, const std::vector<Proposal>& preds,
                                const YSteps& ysteps, const EvalConfig& cfg = {}) {
  std::vector<Lane3D> g;
  std::vector<Proposal> p;
  for (const auto& lane : gts) {
    lane.validate(ysteps.size());
    if (detail::has_visible_point(lane.visibility, cfg.visibility_threshold)) g.push_back(lane);
  }
  for (const auto& lane : preds) {
    detail::require(lane.size() == ysteps.size() && lane.z.size() == ysteps.size() &&
                        lane.visibility.size() == ysteps.size(),
                    "evaluate_frame: prediction length differs from y-steps");
    if (lane.confidence() >= cfg.prob_threshold && detail::has_visible_point(lane.visibility, cfg.visibility_threshold))
      p.push_back(lane);
  }

  const MatchResult m = match_lanes(g, p, cfg);
  EvalTally t;
  t.frames = 1;
  for (const auto& pair : m.pairs) {
    if (!pair.true_positive) continue;
    ++t.tp;
    const Lane3D& gl = g[pair.gt];
    const Proposal& pl = p[pair.pred];
    if (pl.predicted_category() == gl.category) ++t.category_correct;
    for (std::size_t k = 0; k < ysteps.size(); ++k) {
      if (gl.visibility[k] < cfg.visibility_threshold || pl.visibility[k] < cfg.visibility_threshold) continue;
      const double dx = std::abs(pl.x[k] - gl.x[k]);
      const double dz = std::abs(pl.z[k] - gl.z[k]);
      if (ysteps[k] < cfg.near_far_boundary) {
        t.x_near_sum += dx;
        t.z_near_sum += dz;
        ++t.near_points;
      } else {
        t.x_far_sum += dx;
        t.z_far_sum += dz;
        ++t.far_points;
      }
    }
  }
  t.fp = p.size() - t.tp;
  t.fn = g.size() - t.tp;
  return t;
}

inline EvalReport finalize_report(const EvalTally& t) {
  EvalReport r;
  r.tp = t.tp;
  r.fp = t.fp;
  r.fn = t.fn;
  r.frames = t.frames;
  r.precision = t.tp + t.fp > 0 ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp) : 0.0;
  r.recall = t.tp + t.fn > 0 ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  if (t.tp > 0) r.category_accuracy = static_cast<double>(t.category_correct) / static_cast<double>(t.tp);
  if (t.near_points > 0) {
    r.x_near = t.x_near_sum / static_cast<double>(t.near_points);
    r.z_near = t.z_near_sum / static_cast<double>(t.near_points);
  }
  if (t.far_points > 0) {
    r.x_far = t.x_far_sum / static_cast<double>(t.far_points);
    r.z_far = t.z_far_sum / static_cast<double>(t.far_points);
  }
  return r;
}

inline EvalReport compute_report(const std::vector<Lane3D>& gts, const std::vector<Proposal>& preds,
                                 const YSteps& ysteps, const EvalConfig& cfg = {}) {
  cfg.validate();
  return finalize_report(evaluate_frame(gts, preds, ysteps, cfg));
}

struct FrameLanes {
  std::vector<Lane3D> gts;
  std::vector<Proposal> preds;
};

/// Multi-frame report. Counts and error sums are pooled over all frames;
/// frames are evaluated on up to `threads` workers and summed in input
/// order, so the result does not depend on the worker count.
inline EvalReport compute_report(const std::vector<FrameLanes>& frames, const YSteps& ysteps,
                                 const EvalConfig& cfg = {}, unsigned threads = 1) {
  cfg.validate();
  std::vector<EvalTally> per_frame(frames.size());
  parallel_for(frames.size(), threads,
               [&](std::size_t i) { per_frame[i] = evaluate_frame(frames[i].gts, frames[i].preds, ysteps, cfg); });
  EvalTally total;
  for (const auto& t : per_frame) total += t;
  return finalize_report(total);
}

}  // namespace lane3d
