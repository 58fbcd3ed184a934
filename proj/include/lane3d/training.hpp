#pragma once

// Anchor-to-lane matching and the per-lane training losses, as plain
// functions of their inputs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "lane3d/error.hpp"
#include "lane3d/lane.hpp"

namespace lane3d {

/// Visibility-weighted mean (x, z) distance between a lane and an anchor.
/// Returns +infinity when the lane has no visible points.
inline double matching_cost(const Lane3D& gt, const LaneAnchor& anchor) {
  const std::size_t n = gt.size();
  detail::require(gt.z.size() == n && gt.visibility.size() == n && anchor.x.size() == n && anchor.z.size() == n,
                  "matching_cost: lane and anchor lengths differ");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = gt.visibility[k];
    if (v == 0.0) continue;
    num += v * std::hypot(gt.x[k] - anchor.x[k], gt.z[k] - anchor.z[k]);
    den += v;
  }
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

struct LaneAssignment {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  bool unmatchable = false;  // lane had no visible points
};

struct Assignment {
  std::vector<LaneAssignment> lanes;  // one per ground-truth lane, input order
  std::vector<std::size_t> background;  // anchors claimed by no lane, ascending
};

struct AssignmentParams {
  std::size_t positives = 3;
  std::size_t negatives = 9;
};

/// Greedy disjoint assignment. Lanes are processed in input order; each takes
/// the `positives` cheapest anchors not yet claimed (ties by anchor index) as
/// positives and the following `negatives` as negatives. Claimed anchors are
/// unavailable to later lanes. Lanes without visible points get no anchors.
inline Assignment assign_anchors(const std::vector<Lane3D>& gts, const std::vector<LaneAnchor>& anchors,
                                 const AssignmentParams& params = {}) {
  const std::size_t per_lane = params.positives + params.negatives;
  const std::size_t required = gts.size() * per_lane;
  if (anchors.size() < required) throw InsufficientAnchors(required, anchors.size());

  Assignment out;
  out.lanes.resize(gts.size());
  std::vector<bool> claimed(anchors.size(), false);
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(anchors.size());

  for (std::size_t i = 0; i < gts.size(); ++i) {
    auto& lane = out.lanes[i];
    if (std::accumulate(gts[i].visibility.begin(), gts[i].visibility.end(), 0.0) <= 0.0) {
      lane.unmatchable = true;
      continue;
    }
    ranked.clear();
    for (std::size_t j = 0; j < anchors.size(); ++j)
      if (!claimed[j]) ranked.emplace_back(matching_cost(gts[i], anchors[j]), j);
    const std::size_t take = std::min(per_lane, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end());
    for (std::size_t r = 0; r < take; ++r) {
      const std::size_t j = ranked[r].second;
      (r < params.positives ? lane.positives : lane.negatives).push_back(j);
      claimed[j] = true;
    }
  }
  for (std::size_t j = 0; j < anchors.size(); ++j)
    if (!claimed[j]) out.background.push_back(j);
  return out;
}

struct RegressionLoss {
  std::optional<double> x;  // absent when the lane has no visible points
  std::optional<double> z;
  double visibility = 0.0;
};

/// Point-wise L1 regression of the positive proposals against one lane. The
/// x and z terms are summed over proposals and divided by the visible-point
/// weight of the lane; the visibility term is averaged over all points and
/// proposals.
inline RegressionLoss regression_loss(const Lane3D& gt, const std::vector<Proposal>& positives) {
  detail::require(!positives.empty(), "regression_loss: need at least one positive proposal");
  const std::size_t n = gt.size();
  for (const auto& p : positives)
    detail::require(p.x.size() == n && p.z.size() == n && p.visibility.size() == n,
                    "regression_loss: proposal length differs from lane");

  const double vis_total = std::accumulate(gt.visibility.begin(), gt.visibility.end(), 0.0);
  double sx = 0.0, sz = 0.0, sv = 0.0;
  for (const auto& p : positives) {
    for (std::size_t k = 0; k < n; ++k) {
      sx += gt.visibility[k] * std::abs(p.x[k] - gt.x[k]);
      sz += gt.visibility[k] * std::abs(p.z[k] - gt.z[k]);
      sv += std::abs(p.visibility[k] - gt.visibility[k]);
    }
  }
  RegressionLoss loss;
  loss.visibility = sv / static_cast<double>(n * positives.size());
  if (vis_total > 0.0) {
    loss.x = sx / vis_total;
    loss.z = sz / vis_total;
  }
  return loss;
}

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

/// -alpha (1 - p_t)^gamma log(p_t), p_t clamped below at 1e-12.
inline double focal_loss(const std::vector<double>& probs, int target_class, const FocalParams& params = {}) {
  detail::require(target_class >= 0 && static_cast<std::size_t>(target_class) < probs.size(),
                  "focal_loss: target class out of range");
  detail::require(params.gamma >= 0.0, "focal_loss: gamma must be non-negative");
  detail::require_simplex(probs, 1e-6, "focal_loss");
  const double pt = std::clamp(probs[static_cast<std::size_t>(target_class)], 1e-12, 1.0);
  return -params.alpha * std::pow(1.0 - pt, params.gamma) * std::log(pt);
}

/// Relative weights of the per-lane loss terms; all default to 1.
struct LossWeights {
  double x = 1.0;
  double z = 1.0;
  double visibility = 1.0;
  double classification = 1.0;
};

struct LaneLoss {
  RegressionLoss regression;
  double classification = 0.0;  // mean focal loss over positives and negatives
  double total = 0.0;
};

/// Combines the regression terms of one lane with the focal loss pulling its
/// positives toward the lane category and its negatives toward background.
inline LaneLoss lane_loss(const Lane3D& gt, const std::vector<Proposal>& positives,
                          const std::vector<Proposal>& negatives, const LossWeights& w = {},
                          const FocalParams& focal = {}) {
  LaneLoss out;
  out.regression = regression_loss(gt, positives);
  double cls = 0.0;
  for (const auto& p : positives) cls += focal_loss(p.class_probs, gt.category, focal);
  for (const auto& p : negatives) cls += focal_loss(p.class_probs, kBackground, focal);
  out.classification = cls / static_cast<double>(positives.size() + negatives.size());
  out.total = w.visibility * out.regression.visibility + w.classification * out.classification;
  if (out.regression.x) out.total += w.x * *out.regression.x + w.z * *out.regression.z;
  return out;
}

}  // namespace lane3d
