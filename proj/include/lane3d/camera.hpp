#pragma once

// Camera and lane geometry.
//
// Frames:
//   ego     origin on the ground below the camera; X right, Y forward, Z up.
//   camera  origin at the optical center; X right, Y down, Z forward.
//   image   origin at the top-left pixel; U right, V down. Pixel (col, row)
//           sits at continuous coordinate (u, v) = (col, row). Normalized
//           coordinates are (u / W, v / H).

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "lane3d/error.hpp"
#include "lane3d/image.hpp"

namespace lane3d {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Transform = Eigen::Isometry3d;

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  static Intrinsics from_matrix(const Mat3& k) { return {k(0, 0), k(1, 1), k(0, 2), k(1, 2)}; }

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

namespace detail {

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

// Snaps coordinates within `tol` of an integer onto it, so that warps and
// lookups that are exact in real arithmetic read grid nodes exactly.
inline double snap_to_node(double x, double tol = 1e-6) {
  const double r = std::round(x);
  return std::abs(x - r) <= tol ? r : x;
}

}  // namespace detail

/// Pinhole camera with ego->camera extrinsics.
class CameraModel {
 public:
  CameraModel(Intrinsics k, int width, int height, const Transform& ego_to_camera)
      : k_(k), width_(width), height_(height), ego_to_camera_(ego_to_camera) {
    detail::require(k.fx > 0.0 && k.fy > 0.0, "CameraModel: focal lengths must be positive");
    detail::require(width > 0 && height > 0, "CameraModel: image size must be positive");
    detail::require(detail::is_rotation(ego_to_camera.linear()),
                    "CameraModel: extrinsic rotation must be orthonormal with det +1");
    camera_to_ego_ = ego_to_camera_.inverse(Eigen::Isometry);
  }

  const Intrinsics& intrinsics() const noexcept { return k_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const Transform& ego_to_camera() const noexcept { return ego_to_camera_; }
  const Transform& camera_to_ego() const noexcept { return camera_to_ego_; }

  Mat3 K() const { return k_.matrix(); }
  Mat3 K_inverse() const {
    Mat3 inv;
    inv << 1.0 / k_.fx, 0.0, -k_.cx / k_.fx, 0.0, 1.0 / k_.fy, -k_.cy / k_.fy, 0.0, 0.0, 1.0;
    return inv;
  }

  CameraModel with_intrinsics(Intrinsics k) const { return {k, width_, height_, ego_to_camera_}; }

 private:
  Intrinsics k_;
  int width_;
  int height_;
  Transform ego_to_camera_;
  Transform camera_to_ego_;
};

/// Valid depth interval in meters.
struct DepthRange {
  double min = 0.1;
  double max = 80.0;

  bool contains(double d) const noexcept { return std::isfinite(d) && d >= min && d <= max; }
};

/// Dense per-pixel camera-frame depth (z, not ray length). Values outside the
/// range are invalid pixels; invalid pixels are conventionally stored as 0.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0, DepthRange range = {})
      : width_(width), height_(height), range_(range) {
    detail::require(width > 0 && height > 0, "DepthMap: dimensions must be positive");
    detail::require(range.min > 0.0 && range.max > range.min, "DepthMap: need 0 < d_min < d_max");
    values_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const DepthRange& range() const noexcept { return range_; }

  double at(int row, int col) const { return values_[index(row, col)]; }
  double& at(int row, int col) { return values_[index(row, col)]; }
  bool valid(int row, int col) const { return range_.contains(at(row, col)); }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (double d : values_) n += range_.contains(d) ? 1 : 0;
    return n;
  }

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int width_ = 0;
  int height_ = 0;
  DepthRange range_;
  std::vector<double> values_;
};

/// One row of the 8-column point cloud: ego xyz, color, source pixel.
struct CloudPoint {
  double x = 0.0, y = 0.0, z = 0.0;
  float r = 0.0f, g = 0.0f, b = 0.0f;
  double u = 0.0, v = 0.0;
};

struct PointCloud8 {
  std::vector<CloudPoint> rows;

  std::size_t size() const noexcept { return rows.size(); }

  Eigen::Matrix<double, Eigen::Dynamic, 8> to_matrix() const {
    Eigen::Matrix<double, Eigen::Dynamic, 8> m(static_cast<Eigen::Index>(rows.size()), 8);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& p = rows[i];
      m.row(static_cast<Eigen::Index>(i)) << p.x, p.y, p.z, p.r, p.g, p.b, p.u, p.v;
    }
    return m;
  }
};

/// Builds the ego->camera transform for a camera mounted `camera_height`
/// meters above the ego origin. Positive pitch tilts the optical axis toward
/// the ground; yaw turns it about the vertical axis and roll about the
/// optical axis. At zero angles ego (x, y, z) maps to camera (x, h - z, y).
inline Transform make_extrinsics(double camera_height, double pitch, double roll = 0.0,
                                 double yaw = 0.0) {
  detail::require(camera_height > 0.0, "make_extrinsics: camera_height must be positive");
  detail::require(std::abs(pitch) < std::numbers::pi / 2, "make_extrinsics: |pitch| must be < pi/2");

  Mat3 relabel;
  relabel << 1.0, 0.0, 0.0,  //
      0.0, 0.0, -1.0,        //
      0.0, 1.0, 0.0;
  const Mat3 tilt = (Eigen::AngleAxisd(roll, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitX()) *
                     Eigen::AngleAxisd(yaw, Vec3::UnitY()))
                        .toRotationMatrix();

  Transform t = Transform::Identity();
  t.linear() = tilt * relabel;
  t.translation() = tilt * Vec3(0.0, camera_height, 0.0);
  return t;
}

/// Normalized image coordinates plus camera-frame depth.
struct ImageProjection {
  double u = 0.0;  // u_pixel / W
  double v = 0.0;  // v_pixel / H
  double depth = 0.0;

  bool inside_image() const noexcept { return u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0; }
};

/// Projects a camera-frame point. Points with non-positive depth are not
/// projectable and yield nullopt.
inline std::optional<ImageProjection> project_camera_point(const Vec3& p_cam, const CameraModel& cam) {
  const Vec3 h = cam.K() * p_cam;
  const double d = h.z();
  if (!(d > 0.0)) return std::nullopt;
  return ImageProjection{h.x() / (cam.width() * d), h.y() / (cam.height() * d), d};
}

inline std::optional<ImageProjection> project_to_image(const Vec3& p_ego, const CameraModel& cam) {
  return project_camera_point(cam.ego_to_camera() * p_ego, cam);
}

/// Lifts pixel (u, v) at camera depth `depth` into the ego frame.
inline Vec3 backproject_pixel(double u, double v, double depth, const CameraModel& cam,
                              const DepthRange& range = {}) {
  if (!range.contains(depth)) throw InvalidArgument("backproject_pixel: depth outside valid range");
  if (!(u >= 0.0 && u <= cam.width() && v >= 0.0 && v <= cam.height()))
    throw InvalidArgument("backproject_pixel: pixel outside image");
  const auto& k = cam.intrinsics();
  const Vec3 p_cam(depth * (u - k.cx) / k.fx, depth * (v - k.cy) / k.fy, depth);
  return cam.camera_to_ego() * p_cam;
}

/// Back-projects every valid depth pixel and attaches its color and pixel
/// coordinates. Rows are emitted in row-major pixel order.
inline PointCloud8 build_point_cloud(const Image& image, const DepthMap& depth, const CameraModel& cam) {
  if (image.width() != depth.width() || image.height() != depth.height())
    throw InvalidArgument("build_point_cloud: image and depth dimensions differ");
  detail::require(image.channels() == 3, "build_point_cloud: image must have 3 channels");
  PointCloud8 cloud;
  cloud.rows.reserve(depth.valid_count());
  for (int row = 0; row < depth.height(); ++row) {
    for (int col = 0; col < depth.width(); ++col) {
      if (!depth.valid(row, col)) continue;
      const Vec3 p = backproject_pixel(col, row, depth.at(row, col), cam, depth.range());
      cloud.rows.push_back({p.x(), p.y(), p.z(), image.at(row, col, 0), image.at(row, col, 1),
                            image.at(row, col, 2), static_cast<double>(col), static_cast<double>(row)});
    }
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Feature grids

enum class GridDomain { ImageNormalized, GroundNormalized };

/// H_f x W_f x d feature grid. Normalized query (a, b) in [0,1]^2 maps to
/// column a * (W_f - 1) and row b * (H_f - 1), so the corners of the unit
/// square land on the corner nodes.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int width, int height, int channels, GridDomain domain)
      : width_(width), height_(height), channels_(channels), domain_(domain) {
    detail::require(width > 0 && height > 0 && channels > 0, "FeatureGrid: dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height * channels, 0.0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  GridDomain domain() const noexcept { return domain_; }

  double& at(int row, int col, int ch) { return data_[index(row, col, ch)]; }
  double at(int row, int col, int ch) const { return data_[index(row, col, ch)]; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

 private:
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  GridDomain domain_ = GridDomain::ImageNormalized;
  std::vector<double> data_;
};

struct GridSample {
  std::vector<double> values;
  bool out_of_bounds = false;
};

/// Bilinear lookup writing `grid.channels()` values into `out`. Queries
/// outside [0,1]^2 are clamped to the border; the return value is true when
/// clamping happened.
inline bool bilinear_sample_into(const FeatureGrid& grid, double a, double b, std::span<double> out) {
  detail::require(static_cast<int>(out.size()) == grid.channels(), "bilinear_sample: output size mismatch");
  const bool oob = !(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0);
  a = std::isfinite(a) ? std::clamp(a, 0.0, 1.0) : 0.0;
  b = std::isfinite(b) ? std::clamp(b, 0.0, 1.0) : 0.0;

  const double x = detail::snap_to_node(a * (grid.width() - 1), 1e-9);
  const double y = detail::snap_to_node(b * (grid.height() - 1), 1e-9);
  const int x0 = grid.width() > 1 ? std::min(static_cast<int>(std::floor(x)), grid.width() - 2) : 0;
  const int y0 = grid.height() > 1 ? std::min(static_cast<int>(std::floor(y)), grid.height() - 2) : 0;
  const int x1 = std::min(x0 + 1, grid.width() - 1);
  const int y1 = std::min(y0 + 1, grid.height() - 1);
  const double tx = x - x0;
  const double ty = y - y0;

  for (int c = 0; c < grid.channels(); ++c) {
    const double top = (1.0 - tx) * grid.at(y0, x0, c) + tx * grid.at(y0, x1, c);
    const double bottom = (1.0 - tx) * grid.at(y1, x0, c) + tx * grid.at(y1, x1, c);
    out[static_cast<std::size_t>(c)] = (1.0 - ty) * top + ty * bottom;
  }
  return oob;
}

inline GridSample bilinear_sample(const FeatureGrid& grid, double a, double b) {
  GridSample s;
  s.values.resize(static_cast<std::size_t>(grid.channels()));
  s.out_of_bounds = bilinear_sample_into(grid, a, b, s.values);
  return s;
}

}  // namespace lane3d
