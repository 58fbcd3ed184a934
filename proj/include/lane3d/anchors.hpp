#pragma once

// 3D lane anchors: generation, projection into both feature domains, joint
// feature sampling and proposal assembly.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "lane3d/camera.hpp"
#include "lane3d/lane.hpp"
#include "lane3d/parallel.hpp"

namespace lane3d {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Anchor casting configuration. Angles are stored in degrees and converted
/// when anchors are generated.
struct AnchorConfig {
  int lateral_starts = 45;
  std::vector<double> pitches_deg{0.0, 1.0, -1.0, 2.0, -2.0};
  std::vector<double> yaws_deg{0.0,  1.0,  -1.0,  3.0,  -3.0,  5.0,  -5.0, 7.0,
                               -7.0, 10.0, -10.0, 15.0, -15.0, 20.0, -20.0};
  RoiConfig roi{};
  std::size_t ystep_count = 20;

  YSteps ysteps() const { return YSteps::uniform(roi.y_min, roi.y_max, ystep_count); }
};

/// Casts lateral_starts x |pitches| x |yaws| straight anchors. Start points are
/// spread uniformly over [roi.x_min, roi.x_max] (the midpoint for a single
/// start). Anchor j follows x(y) = origin + y tan(yaw), z(y) = y tan(pitch).
/// Output order is lexicographic in (origin, pitch, yaw), all ascending.
inline std::vector<LaneAnchor> generate_anchors(int lateral_starts, const RoiConfig& roi,
                                                std::vector<double> pitches, std::vector<double> yaws,
                                                const YSteps& ysteps) {
  detail::require(lateral_starts >= 1, "generate_anchors: need at least one lateral start");
  detail::require(!pitches.empty() && !yaws.empty(), "generate_anchors: angle lists must be non-empty");
  roi.validate();
  for (double a : pitches) detail::require(std::abs(a) < std::numbers::pi / 2, "generate_anchors: |pitch| must be < 90 deg");
  for (double a : yaws) detail::require(std::abs(a) < std::numbers::pi / 2, "generate_anchors: |yaw| must be < 90 deg");
  std::sort(pitches.begin(), pitches.end());
  std::sort(yaws.begin(), yaws.end());

  std::vector<LaneAnchor> anchors;
  anchors.reserve(static_cast<std::size_t>(lateral_starts) * pitches.size() * yaws.size());
  const std::size_t n = ysteps.size();
  for (int s = 0; s < lateral_starts; ++s) {
    const double origin = lateral_starts == 1
                              ? 0.5 * (roi.x_min + roi.x_max)
                              : roi.x_min + (roi.x_max - roi.x_min) * s / static_cast<double>(lateral_starts - 1);
    for (double pitch : pitches) {
      const double tp = std::tan(pitch);
      for (double yaw : yaws) {
        const double ty = std::tan(yaw);
        LaneAnchor a;
        a.origin_x = origin;
        a.pitch = pitch;
        a.yaw = yaw;
        a.x.resize(n);
        a.z.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
          a.x[k] = origin + ysteps[k] * ty;
          a.z[k] = ysteps[k] * tp;
        }
        anchors.push_back(std::move(a));
      }
    }
  }
  return anchors;
}

inline std::vector<LaneAnchor> generate_anchors(const AnchorConfig& cfg) {
  std::vector<double> pitches, yaws;
  for (double d : cfg.pitches_deg) pitches.push_back(deg_to_rad(d));
  for (double d : cfg.yaws_deg) yaws.push_back(deg_to_rad(d));
  return generate_anchors(cfg.lateral_starts, cfg.roi, pitches, yaws, cfg.ysteps());
}

struct AnchorImagePoint {
  double u = 0.0;  // normalized
  double v = 0.0;  // normalized
  bool in_frustum = false;
};

/// Projects every anchor point; points behind the camera or outside the
/// normalized image square are flagged (behind-camera points report (0, 0)).
inline std::vector<AnchorImagePoint> project_anchor_to_image(const LaneAnchor& anchor, const YSteps& ysteps,
                                                             const CameraModel& cam) {
  detail::require(anchor.size() == ysteps.size(), "project_anchor_to_image: anchor length differs from y-steps");
  std::vector<AnchorImagePoint> out(anchor.size());
  for (std::size_t k = 0; k < anchor.size(); ++k) {
    const auto p = project_to_image(Vec3(anchor.x[k], ysteps[k], anchor.z[k]), cam);
    if (p) out[k] = {p->u, p->v, p->inside_image()};
  }
  return out;
}

struct BevPoint {
  double x = 0.0;  // normalized lateral
  double y = 0.0;  // normalized depth
};

inline std::vector<BevPoint> anchor_to_bev(const LaneAnchor& anchor, const YSteps& ysteps, const RoiConfig& roi) {
  roi.validate();
  detail::require(anchor.size() == ysteps.size(), "anchor_to_bev: anchor length differs from y-steps");
  std::vector<BevPoint> out(anchor.size());
  for (std::size_t k = 0; k < anchor.size(); ++k)
    out[k] = {(anchor.x[k] - roi.x_min) / (roi.x_max - roi.x_min), (ysteps[k] - roi.y_min) / (roi.y_max - roi.y_min)};
  return out;
}

/// M_a x N x (d_FV + d_BEV) anchor features, FV channels first.
struct AnchorFeatures {
  std::size_t anchors = 0;
  std::size_t points = 0;
  int fv_channels = 0;
  int bev_channels = 0;
  std::vector<double> data;
  std::vector<bool> fv_valid;   // per (anchor, point)
  std::vector<bool> bev_valid;  // per (anchor, point)

  int channels() const noexcept { return fv_channels + bev_channels; }
  std::span<const double> at(std::size_t anchor, std::size_t point) const {
    return {data.data() + (anchor * points + point) * static_cast<std::size_t>(channels()),
            static_cast<std::size_t>(channels())};
  }
};

/// Samples FV features at the projected image coordinates and BEV features at
/// the normalized ground-plane coordinates. Points outside the frustum get zero
/// FV features; points outside the ROI get zero BEV features.
inline AnchorFeatures sample_anchor_features(const std::vector<LaneAnchor>& anchors, const YSteps& ysteps,
                                             const CameraModel& cam, const RoiConfig& roi, const FeatureGrid& fv,
                                             const FeatureGrid& bev, unsigned threads = 1) {
  if (fv.domain() != GridDomain::ImageNormalized)
    throw InvalidArgument("sample_anchor_features: front-view grid must be image-normalized");
  if (bev.domain() != GridDomain::GroundNormalized)
    throw InvalidArgument("sample_anchor_features: bird's-eye grid must be ground-normalized");

  AnchorFeatures f;
  f.anchors = anchors.size();
  f.points = ysteps.size();
  f.fv_channels = fv.channels();
  f.bev_channels = bev.channels();
  const std::size_t cells = f.anchors * f.points;
  f.data.assign(cells * static_cast<std::size_t>(f.channels()), 0.0);
  std::vector<unsigned char> fv_ok(cells, 0), bev_ok(cells, 0);

  parallel_for(anchors.size(), threads, [&](std::size_t j) {
    const auto img = project_anchor_to_image(anchors[j], ysteps, cam);
    const auto ground = anchor_to_bev(anchors[j], ysteps, roi);
    for (std::size_t k = 0; k < f.points; ++k) {
      const std::size_t cell = j * f.points + k;
      double* dst = f.data.data() + cell * static_cast<std::size_t>(f.channels());
      if (img[k].in_frustum) {
        bilinear_sample_into(fv, img[k].u, img[k].v, {dst, static_cast<std::size_t>(f.fv_channels)});
        fv_ok[cell] = 1;
      }
      const double gx = ground[k].x, gy = ground[k].y;
      if (gx >= 0.0 && gx <= 1.0 && gy >= 0.0 && gy <= 1.0) {
        bilinear_sample_into(bev, gx, gy, {dst + f.fv_channels, static_cast<std::size_t>(f.bev_channels)});
        bev_ok[cell] = 1;
      }
    }
  });
  f.fv_valid.assign(fv_ok.begin(), fv_ok.end());
  f.bev_valid.assign(bev_ok.begin(), bev_ok.end());
  return f;
}

/// Proposal = anchor geometry + predicted offsets.
inline Proposal assemble_proposal(const LaneAnchor& anchor, const std::vector<double>& dx,
                                  const std::vector<double>& dz, const std::vector<double>& visibility,
                                  const std::vector<double>& class_probs) {
  const std::size_t n = anchor.size();
  if (anchor.z.size() != n || dx.size() != n || dz.size() != n || visibility.size() != n)
    throw InvalidArgument("assemble_proposal: offsets and visibility must match the anchor length");
  detail::require_simplex(class_probs, 1e-6, "assemble_proposal");
  for (double v : visibility) detail::require(v >= 0.0 && v <= 1.0, "assemble_proposal: visibility must lie in [0,1]");

  Proposal p;
  p.class_probs = class_probs;
  p.visibility = visibility;
  p.x.resize(n);
  p.z.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    p.x[k] = anchor.x[k] + dx[k];
    p.z[k] = anchor.z[k] + dz[k];
  }
  return p;
}

}  // namespace lane3d
