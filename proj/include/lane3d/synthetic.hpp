#pragma once

// Deterministic synthetic road scenes with exact ground truth: a quadratic
// height field, polynomial lane curves painted onto it, per-pixel depth from
// analytic ray casting, relative poses, analytic feature fields and a learned
// intrinsics noise model.
//
// World frame: the ego frame of frame 0 with its origin dropped to z = 0.
// Terrain height depends on world y only: z = a0 + a1 y + a2 y^2.
// Lane i runs along x = offset + slope y + curvature y^2 on the terrain.
// The ego frame of frame k sits on the terrain below the camera, level, and
// turned by the accumulated heading about world Z.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "lane3d/anchors.hpp"
#include "lane3d/camera.hpp"
#include "lane3d/image.hpp"
#include "lane3d/intrinsics_fit.hpp"
#include "lane3d/lane.hpp"
#include "lane3d/parallel.hpp"
#include "lane3d/random.hpp"
#include "lane3d/view_synthesis.hpp"

namespace lane3d {

struct LaneSpec {
  double offset = 0.0;
  double slope = 0.0;
  double curvature = 0.0;
  int category = 1;
};

struct TerrainSpec {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;

  double height(double y) const { return a0 + a1 * y + a2 * y * y; }
};

struct CameraSpec {
  double height = 1.5;  // meters above ground
  double pitch = 0.02;  // radians, positive looks down
  Intrinsics intrinsics{516.0, 516.0, 240.0, 160.0};
  int width = 480;
  int image_height = 320;
};

/// Per-frame forward step and a sinusoidal yaw-rate profile.
struct TrajectorySpec {
  int frame_count = 2;
  double step = 1.0;            // meters between frames
  double yaw_amplitude = 0.0;   // radians per frame
  double yaw_period = 50.0;     // frames
  double yaw_jitter = 0.0;      // std-dev of the observed rotation noise, radians

  double yaw_delta(int frame) const {
    if (frame <= 0 || yaw_amplitude == 0.0) return 0.0;
    return yaw_amplitude * std::sin(2.0 * std::numbers::pi * frame / yaw_period);
  }
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::vector<LaneSpec> lanes{{-5.25, 0.0, 2e-4, 1}, {-1.75, 0.0, 2e-4, 2}, {1.75, 0.0, 2e-4, 2}, {5.25, 0.0, 2e-4, 1}};
  TerrainSpec terrain{};
  CameraSpec camera{};
  TrajectorySpec trajectory{};
  RoiConfig roi{};
  std::size_t ystep_count = 20;
  DepthRange depth_range{};
  double lane_width = 0.15;  // meters of paint

  YSteps ysteps() const { return YSteps::uniform(roi.y_min, roi.y_max, ystep_count); }

  void validate() const {
    roi.validate();
    detail::require(camera.height > 0.0 && camera.width > 0 && camera.image_height > 0,
                    "SceneSpec: camera height and image size must be positive");
    detail::require(camera.intrinsics.fx > 0.0 && camera.intrinsics.fy > 0.0, "SceneSpec: focal must be positive");
    detail::require(trajectory.frame_count >= 1, "SceneSpec: need at least one frame");
    detail::require(trajectory.yaw_period > 0.0, "SceneSpec: yaw period must be positive");
    detail::require(lane_width > 0.0, "SceneSpec: lane width must be positive");
    detail::require(ystep_count >= 2, "SceneSpec: need at least two y-steps");
  }

  CameraModel camera_model() const {
    return CameraModel(camera.intrinsics, camera.width, camera.image_height,
                       make_extrinsics(camera.height, camera.pitch));
  }
};

struct RenderedFrame {
  Image image;
  DepthMap depth;
  std::vector<Lane3D> gt_lanes;
  RigidPose pose;  // this camera -> previous camera; identity for frame 0
  CameraModel cam;
  Transform world_from_ego;
};

namespace detail {

struct Sinusoid {
  double kx = 0.0, ky = 0.0, phase = 0.0, amplitude = 0.0;
};

// Three seeded ground sinusoids per color channel.
struct GroundTexture {
  std::array<std::array<Sinusoid, 3>, 3> waves{};
  std::array<double, 3> base{0.42, 0.42, 0.45};

  explicit GroundTexture(std::uint64_t seed) {
    Rng rng = Rng::derive(seed, 0x7e47u);
    std::array<Sinusoid, 3> shared{};
    for (auto& s : shared) {
      const double wavelength_x = rng.uniform(4.0, 12.0);
      const double wavelength_y = rng.uniform(15.0, 40.0);
      s.kx = 2.0 * std::numbers::pi / wavelength_x * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      s.ky = 2.0 * std::numbers::pi / wavelength_y;
      s.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      s.amplitude = rng.uniform(0.04, 0.08);
    }
    for (int c = 0; c < 3; ++c)
      for (int s = 0; s < 3; ++s) {
        waves[c][s] = shared[s];
        waves[c][s].amplitude *= rng.uniform(0.8, 1.2);
      }
  }

  double at(int channel, double x, double y) const {
    double v = base[channel];
    for (const auto& w : waves[channel]) v += w.amplitude * std::sin(w.kx * x + w.ky * y + w.phase);
    return v;
  }
};

inline double smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

inline double lane_x(const LaneSpec& l, double y) { return l.offset + l.slope * y + l.curvature * y * y; }

// Smallest t > 0 with origin + t dir on the terrain, if any.
inline std::optional<double> intersect_terrain(const TerrainSpec& terrain, const Vec3& origin, const Vec3& dir) {
  const double a = -terrain.a2 * dir.y() * dir.y();
  const double b = dir.z() - terrain.a1 * dir.y() - 2.0 * terrain.a2 * origin.y() * dir.y();
  const double c = origin.z() - terrain.height(origin.y());
  std::optional<double> t;
  if (std::abs(a) < 1e-14) {
    if (b < 0.0) t = -c / b;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      const double r1 = q / a;
      const double r2 = q != 0.0 ? c / q : r1;
      const double lo = std::min(r1, r2), hi = std::max(r1, r2);
      if (lo > 0.0)
        t = lo;
      else if (hi > 0.0)
        t = hi;
    }
  }
  if (!t) return std::nullopt;
  // Newton polish on the quadratic residual.
  for (int it = 0; it < 3; ++it) {
    const double f = (a * *t + b) * *t + c;
    const double df = 2.0 * a * *t + b;
    if (df == 0.0) break;
    *t -= f / df;
  }
  return t;
}

inline Transform world_from_ego(const TerrainSpec& terrain, double px, double py, double heading) {
  Transform t = Transform::Identity();
  t.linear() = Eigen::AngleAxisd(heading, Vec3::UnitZ()).toRotationMatrix();
  t.translation() = Vec3(px, py, terrain.height(py));
  return t;
}

}  // namespace detail

/// Vehicle poses in the world frame, one per frame.
inline std::vector<Transform> trajectory_poses(const SceneSpec& spec) {
  std::vector<Transform> poses;
  double px = 0.0, py = 0.0, heading = 0.0;
  for (int k = 0; k < spec.trajectory.frame_count; ++k) {
    if (k > 0) {
      px += -std::sin(heading) * spec.trajectory.step;
      py += std::cos(heading) * spec.trajectory.step;
      heading += spec.trajectory.yaw_delta(k);
    }
    poses.push_back(detail::world_from_ego(spec.terrain, px, py, heading));
  }
  return poses;
}

/// Ground-truth lanes of one frame, sampled at the scene's y-steps in that
/// frame's ego coordinates. A point is visible when it lies inside the ROI,
/// projects into the image with valid depth and is not hidden by the terrain.
inline std::vector<Lane3D> sample_gt_lanes(const SceneSpec& spec, const Transform& world_from_ego,
                                           const CameraModel& cam) {
  const YSteps ys = spec.ysteps();
  const Transform ego_from_world = world_from_ego.inverse(Eigen::Isometry);
  const Transform world_from_cam = world_from_ego * cam.camera_to_ego();
  const Vec3 cam_center = world_from_cam.translation();
  const double px = world_from_ego.translation().x();
  const double py = world_from_ego.translation().y();
  const Mat3 r = world_from_ego.linear();
  const double cos_h = r(0, 0), sin_h = r(1, 0);

  std::vector<Lane3D> lanes;
  for (const auto& spec_lane : spec.lanes) {
    Lane3D lane;
    lane.category = spec_lane.category;
    lane.x.assign(ys.size(), 0.0);
    lane.z.assign(ys.size(), 0.0);
    lane.visibility.assign(ys.size(), 0.0);
    for (std::size_t k = 0; k < ys.size(); ++k) {
      // Solve ego_y(s) = ys[k] for the world parameter s (world y).
      const double qa = -sin_h * spec_lane.curvature;
      const double qb = -sin_h * spec_lane.slope + cos_h;
      const double qc = -sin_h * (spec_lane.offset - px) - cos_h * py - ys[k];
      std::optional<double> s;
      if (std::abs(qa) < 1e-14) {
        if (qb != 0.0) s = -qc / qb;
      } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          const double guess = py + ys[k];
          const double s1 = (-qb + sq) / (2.0 * qa), s2 = (-qb - sq) / (2.0 * qa);
          s = std::abs(s1 - guess) < std::abs(s2 - guess) ? s1 : s2;
        }
      }
      if (!s) continue;
      const Vec3 world(detail::lane_x(spec_lane, *s), *s, spec.terrain.height(*s));
      const Vec3 ego = ego_from_world * world;
      lane.x[k] = ego.x();
      lane.z[k] = ego.z();

      if (!spec.roi.contains(ego.x(), ys[k])) continue;
      const auto proj = project_to_image(ego, cam);
      if (!proj || !proj->inside_image() || !spec.depth_range.contains(proj->depth)) continue;
      const Vec3 dir = (world - cam_center) / proj->depth;
      const auto hit = detail::intersect_terrain(spec.terrain, cam_center, dir);
      if (hit && *hit < proj->depth * (1.0 - 1e-6) - 1e-6) continue;  // behind a crest
      lane.visibility[k] = 1.0;
    }
    lanes.push_back(std::move(lane));
  }
  return lanes;
}

/// Renders every frame of the scene. Frames are rendered on up to `threads`
/// workers; the output is bitwise identical for any worker count.
inline std::vector<RenderedFrame> render_scene(const SceneSpec& spec, unsigned threads = 1) {
  spec.validate();
  const CameraModel cam = spec.camera_model();
  const auto poses = trajectory_poses(spec);
  const detail::GroundTexture texture(spec.seed);
  const auto& k = cam.intrinsics();
  constexpr std::array<float, 3> kSky{0.55f, 0.70f, 0.90f};
  constexpr double kPaint = 0.92;
  constexpr double kPaintEdge = 0.05;
  constexpr double kFarColorLimit = 1e4;

  std::vector<std::optional<RenderedFrame>> slots(poses.size());
  parallel_for(poses.size(), threads, [&](std::size_t f) {
    const Transform world_from_cam = poses[f] * cam.camera_to_ego();
    const Mat3 rot = world_from_cam.linear();
    const Vec3 center = world_from_cam.translation();

    RenderedFrame frame{Image(cam.width(), cam.height(), 3), DepthMap(cam.width(), cam.height(), 0.0, spec.depth_range),
                        {}, RigidPose::identity(), cam, poses[f]};
    for (int row = 0; row < cam.height(); ++row) {
      for (int col = 0; col < cam.width(); ++col) {
        // Direction per unit camera depth, so the hit parameter is the depth.
        const Vec3 dir = rot * Vec3((col - k.cx) / k.fx, (row - k.cy) / k.fy, 1.0);
        const auto t = detail::intersect_terrain(spec.terrain, center, dir);
        if (!t || *t > kFarColorLimit) {
          for (int c = 0; c < 3; ++c) frame.image.at(row, col, c) = kSky[static_cast<std::size_t>(c)];
          continue;
        }
        if (spec.depth_range.contains(*t)) frame.depth.at(row, col) = *t;
        const Vec3 p = center + *t * dir;
        double paint = 0.0;
        for (const auto& lane : spec.lanes) {
          const double dx = std::abs(p.x() - detail::lane_x(lane, p.y()));
          paint = std::max(paint, detail::smoothstep01((0.5 * spec.lane_width + kPaintEdge - dx) / (2.0 * kPaintEdge)));
        }
        for (int c = 0; c < 3; ++c) {
          const double base = texture.at(c, p.x(), p.y());
          frame.image.at(row, col, c) = static_cast<float>(std::clamp((1.0 - paint) * base + paint * kPaint, 0.0, 1.0));
        }
      }
    }
    frame.gt_lanes = sample_gt_lanes(spec, poses[f], cam);
    if (f > 0) {
      const Transform prev_world_from_cam = poses[f - 1] * cam.camera_to_ego();
      frame.pose = RigidPose(prev_world_from_cam.inverse(Eigen::Isometry) * world_from_cam);
    }
    slots[f] = std::move(frame);
  });

  std::vector<RenderedFrame> frames;
  frames.reserve(slots.size());
  for (auto& s : slots) frames.push_back(std::move(*s));
  return frames;
}

/// Coefficients of f(a, b) = alpha a + beta b + gamma a b for one channel.
struct BilinearField {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  double operator()(double a, double b) const { return alpha * a + beta * b + gamma * a * b; }
};

struct FeatureFields {
  FeatureGrid fv;
  FeatureGrid bev;
  std::vector<BilinearField> fv_fields;
  std::vector<BilinearField> bev_fields;
};

struct FeatureGridSize {
  int width = 0;
  int height = 0;
};

/// Feature grids whose channels sample seeded bilinear fields at the grid
/// nodes, so any bilinear lookup reproduces the field exactly.
inline FeatureFields make_feature_fields(const SceneSpec& spec, int fv_channels, int bev_channels,
                                         FeatureGridSize fv_size = {60, 40}, FeatureGridSize bev_size = {50, 100}) {
  detail::require(fv_channels >= 1 && bev_channels >= 1, "make_feature_fields: channel counts must be >= 1");
  Rng rng = Rng::derive(spec.seed, 0xfea7u);
  auto fields = [&](int n) {
    std::vector<BilinearField> out(static_cast<std::size_t>(n));
    for (auto& f : out) f = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    return out;
  };
  auto fill = [](FeatureGrid& g, const std::vector<BilinearField>& fs) {
    for (int r = 0; r < g.height(); ++r)
      for (int c = 0; c < g.width(); ++c) {
        const double a = g.width() > 1 ? static_cast<double>(c) / (g.width() - 1) : 0.0;
        const double b = g.height() > 1 ? static_cast<double>(r) / (g.height() - 1) : 0.0;
        for (int ch = 0; ch < g.channels(); ++ch) g.at(r, c, ch) = fs[static_cast<std::size_t>(ch)](a, b);
      }
  };
  FeatureFields out{FeatureGrid(fv_size.width, fv_size.height, fv_channels, GridDomain::ImageNormalized),
                    FeatureGrid(bev_size.width, bev_size.height, bev_channels, GridDomain::GroundNormalized),
                    fields(fv_channels), fields(bev_channels)};
  fill(out.fv, out.fv_fields);
  fill(out.bev, out.bev_fields);
  return out;
}

/// Per-frame learned focal lengths for the scene's trajectory. Frame i
/// observes r_z = |yaw delta of step i+1 + jitter| and a learned focal drawn
/// uniformly from [f_true - bound(f_true, W, r_z), f_true] (floored at 1 px).
/// Each frame draws from its own stream derived from (seed, i).
inline SegmentObservations simulate_learned_intrinsics(const SceneSpec& spec, double f_true, std::uint64_t seed) {
  detail::require(f_true > 0.0, "simulate_learned_intrinsics: f_true must be positive");
  constexpr double kFloor = 1.0;
  SegmentObservations obs;
  obs.width = spec.camera.width;
  obs.frames.resize(static_cast<std::size_t>(spec.trajectory.frame_count));
  for (int i = 0; i < spec.trajectory.frame_count; ++i) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
    const double jitter = spec.trajectory.yaw_jitter > 0.0 ? rng.normal(0.0, spec.trajectory.yaw_jitter) : 0.0;
    const double rz = std::abs(spec.trajectory.yaw_delta(i + 1) + jitter);
    const double lo = std::max(kFloor, f_true - focal_bound(f_true, obs.width, rz));
    obs.frames[static_cast<std::size_t>(i)].r_z = rz;
    obs.frames[static_cast<std::size_t>(i)].f_x = lo >= f_true ? f_true : rng.uniform(lo, f_true);
  }
  return obs;
}

}  // namespace lane3d
