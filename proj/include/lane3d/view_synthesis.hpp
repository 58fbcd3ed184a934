#pragma once

// Target-view reconstruction from a source view through depth and relative
// pose, and the photometric, smoothness and GPS-scale losses evaluated on it.

#include <algorithm>
#include <cmath>
#include <span>

#include "lane3d/camera.hpp"
#include "lane3d/error.hpp"
#include "lane3d/image.hpp"
#include "lane3d/parallel.hpp"

namespace lane3d {

/// Rigid motion mapping target-camera coordinates into source-camera
/// coordinates.
class RigidPose {
 public:
  RigidPose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidPose(const Mat3& rotation, const Vec3& translation) : rotation_(rotation), translation_(translation) {
    detail::require(detail::is_rotation(rotation), "RigidPose: rotation must be orthonormal with det +1");
  }
  explicit RigidPose(const Transform& t) : RigidPose(Mat3(t.linear()), Vec3(t.translation())) {}

  static RigidPose identity() { return {}; }

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

  RigidPose inverse() const {
    const Mat3 rt = rotation_.transpose();
    return {rt, -(rt * translation_)};
  }

  /// this after other: p -> this(other(p)).
  RigidPose operator*(const RigidPose& other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }

  Transform as_transform() const {
    Transform t = Transform::Identity();
    t.linear() = rotation_;
    t.translation() = translation_;
    return t;
  }

  /// Rotation about the camera's vertical (Y) axis, radians.
  double yaw() const { return std::atan2(rotation_(0, 2), rotation_(2, 2)); }
  /// Rotation about the camera's horizontal (X) axis, radians.
  double pitch() const { return std::atan2(-rotation_(1, 2), rotation_(2, 2)); }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

struct ReconstructionResult {
  Image image;
  Mask valid;
};

/// Bilinear lookup at continuous pixel coordinates. Requires
/// 0 <= x <= W-1 and 0 <= y <= H-1.
inline void sample_image_bilinear(const Image& img, double x, double y, std::span<float> out) {
  const int w = img.width();
  const int h = img.height();
  const int x0 = w > 1 ? std::min(static_cast<int>(std::floor(x)), w - 2) : 0;
  const int y0 = h > 1 ? std::min(static_cast<int>(std::floor(y)), h - 2) : 0;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double tx = x - x0;
  const double ty = y - y0;
  for (int c = 0; c < img.channels(); ++c) {
    const double top = (1.0 - tx) * img.at(y0, x0, c) + tx * img.at(y0, x1, c);
    const double bottom = (1.0 - tx) * img.at(y1, x0, c) + tx * img.at(y1, x1, c);
    out[static_cast<std::size_t>(c)] = static_cast<float>((1.0 - ty) * top + ty * bottom);
  }
}

/// Reconstructs the target view: every target pixel is lifted with its depth,
/// moved by `target_to_source`, projected with K and sampled bilinearly from
/// `source`. Pixels whose sample falls outside the source image (or whose
/// depth is invalid, or which land behind the source camera) are masked out
/// and filled with 0. Rows may be processed on `threads` workers; the result
/// is identical for any worker count.
inline ReconstructionResult synthesize_view(const Image& source, const DepthMap& target_depth,
                                            const RigidPose& target_to_source, const CameraModel& cam,
                                            unsigned threads = 1) {
  const int w = source.width();
  const int h = source.height();
  detail::require(target_depth.width() == w && target_depth.height() == h,
                  "synthesize_view: source and depth dimensions differ");
  detail::require(cam.width() == w && cam.height() == h, "synthesize_view: camera size differs from image");

  ReconstructionResult out{Image(w, h, source.channels(), 0.0f), Mask(w, h, false)};
  const auto& k = cam.intrinsics();
  const Mat3& r = target_to_source.rotation();
  const Vec3& t = target_to_source.translation();

  // std::vector<bool> is not safe for concurrent writes to neighboring bits.
  std::vector<unsigned char> valid(static_cast<std::size_t>(w) * h, 0);

  parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t row_index) {
    const int row = static_cast<int>(row_index);
    for (int col = 0; col < w; ++col) {
      if (!target_depth.valid(row, col)) continue;
      const double d = target_depth.at(row, col);
      const Vec3 p_target(d * (col - k.cx) / k.fx, d * (row - k.cy) / k.fy, d);
      const Vec3 p_source = r * p_target + t;
      if (!(p_source.z() > 0.0)) continue;
      const double us = detail::snap_to_node(k.fx * p_source.x() / p_source.z() + k.cx);
      const double vs = detail::snap_to_node(k.fy * p_source.y() / p_source.z() + k.cy);
      if (!(us >= 0.0 && us <= w - 1 && vs >= 0.0 && vs <= h - 1)) continue;
      float* px = &out.image.at(row, col, 0);
      sample_image_bilinear(source, us, vs, std::span<float>(px, static_cast<std::size_t>(source.channels())));
      valid[static_cast<std::size_t>(row) * w + col] = 1;
    }
  });
  for (std::size_t i = 0; i < valid.size(); ++i) out.valid.values[i] = valid[i] != 0;
  return out;
}

// ---------------------------------------------------------------------------
// Losses

struct PhotometricParams {
  double alpha = 0.85;  // SSIM weight; 1 - alpha goes to L1
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

namespace detail {

inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

}  // namespace detail

/// Per-pixel SSIM dissimilarity (1 - SSIM) / 2, clamped to [0, 1], averaged
/// over channels. Statistics use a 3x3 window with reflected borders; window
/// members outside the validity mask are skipped.
inline double ssim_dissimilarity_at(const Image& x, const Image& y, const Mask& mask, int row, int col,
                                    const PhotometricParams& p) {
  double total = 0.0;
  for (int c = 0; c < x.channels(); ++c) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    int n = 0;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const int r = detail::reflect_index(row + dr, x.height());
        const int q = detail::reflect_index(col + dc, x.width());
        if (!mask.at(r, q)) continue;
        const double a = x.at(r, q, c);
        const double b = y.at(r, q, c);
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
        ++n;
      }
    }
    const double mx = sx / n, my = sy / n;
    const double vx = sxx / n - mx * mx;
    const double vy = syy / n - my * my;
    const double cxy = sxy / n - mx * my;
    const double num = (2.0 * mx * my + p.c1) * (2.0 * cxy + p.c2);
    const double den = (mx * mx + my * my + p.c1) * (vx + vy + p.c2);
    total += std::clamp((1.0 - num / den) / 2.0, 0.0, 1.0);
  }
  return total / x.channels();
}

/// Mean over valid pixels of alpha * SSIM-dissimilarity + (1 - alpha) * L1.
inline double photometric_error(const Image& target, const ReconstructionResult& recon,
                                const PhotometricParams& params = {}) {
  detail::require(params.alpha >= 0.0 && params.alpha <= 1.0, "photometric_error: alpha must lie in [0,1]");
  detail::require(target.same_shape(recon.image), "photometric_error: image shapes differ");
  detail::require(recon.valid.width == target.width() && recon.valid.height == target.height(),
                  "photometric_error: mask shape differs");
  detail::require(target.width() >= 2 && target.height() >= 2, "photometric_error: images must be at least 2x2");

  double sum = 0.0;
  std::size_t n = 0;
  for (int row = 0; row < target.height(); ++row) {
    for (int col = 0; col < target.width(); ++col) {
      if (!recon.valid.at(row, col)) continue;
      double l1 = 0.0;
      for (int c = 0; c < target.channels(); ++c)
        l1 += std::abs(static_cast<double>(target.at(row, col, c)) - recon.image.at(row, col, c));
      l1 /= target.channels();
      const double ssim =
          params.alpha > 0.0 ? ssim_dissimilarity_at(target, recon.image, recon.valid, row, col, params) : 0.0;
      sum += params.alpha * ssim + (1.0 - params.alpha) * l1;
      ++n;
    }
  }
  if (n == 0) throw NoValidPixels();
  return sum / static_cast<double>(n);
}

/// Edge-aware first-order smoothness of mean-normalized disparity (1/depth).
/// Neighbor pairs with an invalid depth are skipped. Result is the mean
/// horizontal term plus the mean vertical term.
inline double smoothness_loss(const DepthMap& depth, const Image& image) {
  detail::require(depth.width() == image.width() && depth.height() == image.height(),
                  "smoothness_loss: depth and image dimensions differ");
  const int w = depth.width();
  const int h = depth.height();

  double disp_sum = 0.0;
  std::size_t disp_n = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (depth.valid(r, c)) {
        disp_sum += 1.0 / depth.at(r, c);
        ++disp_n;
      }
  if (disp_n == 0) return 0.0;
  const double mean_disp = disp_sum / static_cast<double>(disp_n);
  auto norm_disp = [&](int r, int c) { return (1.0 / depth.at(r, c)) / mean_disp; };
  auto image_grad = [&](int r0, int c0, int r1, int c1) {
    double g = 0.0;
    for (int ch = 0; ch < image.channels(); ++ch)
      g += std::abs(static_cast<double>(image.at(r0, c0, ch)) - image.at(r1, c1, ch));
    return g / image.channels();
  };

  double gx = 0.0, gy = 0.0;
  std::size_t nx = 0, ny = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!depth.valid(r, c)) continue;
      if (c + 1 < w && depth.valid(r, c + 1)) {
        gx += std::abs(norm_disp(r, c) - norm_disp(r, c + 1)) * std::exp(-image_grad(r, c, r, c + 1));
        ++nx;
      }
      if (r + 1 < h && depth.valid(r + 1, c)) {
        gy += std::abs(norm_disp(r, c) - norm_disp(r + 1, c)) * std::exp(-image_grad(r, c, r + 1, c));
        ++ny;
      }
    }
  }
  return (nx ? gx / static_cast<double>(nx) : 0.0) + (ny ? gy / static_cast<double>(ny) : 0.0);
}

/// | ||translation|| - gps displacement |.
inline double gps_scale_loss(const RigidPose& pose, double gps_displacement) {
  detail::require(gps_displacement >= 0.0, "gps_scale_loss: displacement must be non-negative");
  return std::abs(pose.translation().norm() - gps_displacement);
}

}  // namespace lane3d
