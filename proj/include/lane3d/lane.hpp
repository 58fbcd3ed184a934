#pragma once

// Lane, anchor and proposal types shared by every stage. All of them carry
// one value per entry of a common YSteps vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lane3d/error.hpp"

namespace lane3d {

/// Category id reserved for "no lane".
inline constexpr int kBackground = 0;
/// Default number of lane categories (background excluded).
inline constexpr int kDefaultCategoryCount = 14;

/// Strictly increasing forward coordinates (meters) at which lanes are sampled.
class YSteps {
 public:
  explicit YSteps(std::vector<double> y) : y_(std::move(y)) {
    detail::require(y_.size() >= 2, "YSteps: need at least two positions");
    detail::require(y_.front() >= 0.0, "YSteps: positions must be non-negative");
    for (std::size_t i = 1; i < y_.size(); ++i)
      detail::require(y_[i] > y_[i - 1], "YSteps: positions must be strictly increasing");
  }

  static YSteps uniform(double y_min, double y_max, std::size_t count) {
    detail::require(count >= 2 && y_max > y_min, "YSteps::uniform: need count >= 2 and y_max > y_min");
    std::vector<double> y(count);
    for (std::size_t i = 0; i < count; ++i)
      y[i] = y_min + (y_max - y_min) * static_cast<double>(i) / static_cast<double>(count - 1);
    y.back() = y_max;
    return YSteps(std::move(y));
  }

  /// 20 positions spanning the default ROI depth range.
  static YSteps defaults() { return uniform(0.1, 80.0, 20); }

  std::size_t size() const noexcept { return y_.size(); }
  double operator[](std::size_t i) const { return y_[i]; }
  const std::vector<double>& values() const noexcept { return y_; }

  friend bool operator==(const YSteps&, const YSteps&) = default;

 private:
  std::vector<double> y_;
};

/// Bird's-eye region of interest in ego meters.
struct RoiConfig {
  double x_min = -20.0;
  double x_max = 20.0;
  double y_min = 0.1;
  double y_max = 80.0;

  void validate() const {
    detail::require(x_min < x_max && y_min < y_max, "RoiConfig: need x_min < x_max and y_min < y_max");
  }
  bool contains(double x, double y) const noexcept {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

/// Ground-truth lane sampled at YSteps.
struct Lane3D {
  int category = kBackground;
  std::vector<double> x;
  std::vector<double> z;
  std::vector<double> visibility;

  std::size_t size() const noexcept { return x.size(); }

  void validate(std::size_t n) const {
    detail::require(x.size() == n && z.size() == n && visibility.size() == n,
                    "Lane3D: x, z and visibility must have one entry per y-step");
    for (double v : visibility) detail::require(v >= 0.0 && v <= 1.0, "Lane3D: visibility must lie in [0,1]");
  }

  friend bool operator==(const Lane3D&, const Lane3D&) = default;
};

/// Straight 3D ray cast from (origin_x, 0, 0) at fixed pitch and yaw.
struct LaneAnchor {
  std::vector<double> x;
  std::vector<double> z;
  double origin_x = 0.0;
  double pitch = 0.0;  // radians
  double yaw = 0.0;    // radians

  std::size_t size() const noexcept { return x.size(); }
  friend bool operator==(const LaneAnchor&, const LaneAnchor&) = default;
};

/// Anchor geometry plus predicted offsets, visibility and class distribution.
/// class_probs[0] is the background probability.
struct Proposal {
  std::vector<double> class_probs;
  std::vector<double> x;
  std::vector<double> z;
  std::vector<double> visibility;

  std::size_t size() const noexcept { return x.size(); }

  /// Highest non-background probability.
  double confidence() const {
    if (class_probs.size() < 2) return 0.0;
    return *std::max_element(class_probs.begin() + 1, class_probs.end());
  }

  /// Most likely non-background category (lowest id on ties).
  int predicted_category() const {
    if (class_probs.size() < 2) return kBackground;
    return static_cast<int>(std::max_element(class_probs.begin() + 1, class_probs.end()) - class_probs.begin());
  }

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

namespace detail {

inline void require_simplex(const std::vector<double>& p, double tol, const char* what) {
  double s = 0.0;
  for (double v : p) {
    require(std::isfinite(v) && v >= -tol && v <= 1.0 + tol, std::string(what) + ": probabilities must lie in [0,1]");
    s += v;
  }
  require(!p.empty() && std::abs(s - 1.0) <= tol, std::string(what) + ": probabilities must sum to 1");
}

}  // namespace detail
}  // namespace lane3d
