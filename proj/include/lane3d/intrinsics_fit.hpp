#pragma once

// Per-segment focal length from per-frame learned focals and rotations.
//
// A frame rotating by r radians constrains the learned focal f_hat of an
// image of size W (pixels) to |f - f_hat| <= 2 f^2 / (W^2 r) around the true
// focal f. The segment focal minimizes the total amount by which the frames
// exceed that envelope:
//
//   J(f) = sum_i max(0, |f - f_hat_i| - 2 f^2 / (W^2 r_i))
//
// J tends to 0 as f grows, so the fit returns the smallest minimizer inside a
// bounded search interval.
//
// Between consecutive breakpoints (the f_hat_i and the roots where a hinge
// switches on or off) every active term is concave in f, so J restricted to
// each piece is concave and attains its minimum at a piece endpoint. The fit
// therefore evaluates J exactly at every breakpoint instead of scanning.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lane3d/error.hpp"

namespace lane3d {

/// Envelope 2 f^2 / (dim^2 r). Infinite for r == 0 (the frame constrains
/// nothing).
inline double focal_bound(double f, double image_dim, double rotation) {
  detail::require(f > 0.0 && image_dim > 0.0, "focal_bound: f and image dimension must be positive");
  detail::require(rotation >= 0.0, "focal_bound: rotation magnitude must be non-negative");
  if (rotation == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * f * f / (image_dim * image_dim * rotation);
}

/// One (rotation magnitude, learned focal) pair.
struct FocalSample {
  double rotation = 0.0;
  double focal = 0.0;
};

struct FrameObservation {
  double r_z = 0.0;  // |yaw| between frames, radians
  double f_x = 0.0;  // learned horizontal focal, pixels
  std::optional<double> r_x;
  std::optional<double> f_y;
};

struct SegmentObservations {
  double width = 0.0;
  std::optional<double> height;
  std::vector<FrameObservation> frames;

  void validate() const {
    detail::require(width > 0.0, "SegmentObservations: width must be positive");
    for (const auto& f : frames) {
      detail::require(f.f_x > 0.0 && std::isfinite(f.f_x), "SegmentObservations: f_x must be positive");
      detail::require(f.r_z >= 0.0 && std::isfinite(f.r_z), "SegmentObservations: r_z must be a magnitude");
      if (f.f_y) detail::require(*f.f_y > 0.0, "SegmentObservations: f_y must be positive");
      if (f.r_x) detail::require(*f.r_x >= 0.0, "SegmentObservations: r_x must be a magnitude");
    }
  }

  std::vector<FocalSample> x_samples() const {
    std::vector<FocalSample> s;
    s.reserve(frames.size());
    for (const auto& f : frames) s.push_back({f.r_z, f.f_x});
    return s;
  }

  std::vector<FocalSample> y_samples() const {
    std::vector<FocalSample> s;
    for (const auto& f : frames)
      if (f.r_x && f.f_y) s.push_back({*f.r_x, *f.f_y});
    return s;
  }
};

struct SearchInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct FitResult {
  double focal = 0.0;
  double objective = 0.0;
  std::size_t used_count = 0;
  std::size_t filtered_count = 0;
  SearchInterval search;
};

inline double hinge_objective(double f, std::span<const FocalSample> samples, double image_dim) {
  detail::require(!samples.empty(), "hinge_objective: no observations");
  double total = 0.0;
  for (const auto& s : samples) {
    if (s.rotation == 0.0) continue;
    const double excess = std::abs(f - s.focal) - focal_bound(f, image_dim, s.rotation);
    if (excess > 0.0) total += excess;
  }
  return total;
}

inline double hinge_objective(double f, const SegmentObservations& obs) {
  const auto s = obs.x_samples();
  return hinge_objective(f, s, obs.width);
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Points where some hinge term changes its smooth expression.
inline std::vector<double> hinge_breakpoints(std::span<const FocalSample> samples, double image_dim) {
  std::vector<double> pts;
  for (const auto& s : samples) {
    const double c = 2.0 / (image_dim * image_dim * s.rotation);
    const double fh = s.focal;
    pts.push_back(fh);
    // f_hat - f = c f^2 (below f_hat)
    pts.push_back(2.0 * fh / (1.0 + std::sqrt(1.0 + 4.0 * c * fh)));
    // f - f_hat = c f^2 (above f_hat), when real
    const double disc = 1.0 - 4.0 * c * fh;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      pts.push_back(2.0 * fh / (1.0 + sq));
      pts.push_back((1.0 + sq) / (2.0 * c));
    }
  }
  return pts;
}

}  // namespace detail

/// Fits one focal from (rotation, learned focal) samples. Samples with
/// rotation below `rotation_min` (or exactly zero) are discarded. The search
/// interval defaults to [0.5, 2] x the median learned focal of the kept
/// samples. Returns the smallest f in the interval attaining the minimum of
/// the hinge objective.
inline FitResult fit_focal(std::span<const FocalSample> samples, double image_dim, double rotation_min,
                           std::optional<SearchInterval> search = std::nullopt) {
  detail::require(image_dim > 0.0, "fit_focal: image dimension must be positive");
  std::vector<FocalSample> used;
  for (const auto& s : samples)
    if (s.rotation > 0.0 && s.rotation >= rotation_min) used.push_back(s);
  if (used.empty()) throw UninformativeSegment();

  FitResult out;
  out.used_count = used.size();
  out.filtered_count = samples.size() - used.size();
  if (search) {
    detail::require(search->lo > 0.0 && search->hi >= search->lo, "fit_focal: invalid search interval");
    out.search = *search;
  } else {
    std::vector<double> f;
    for (const auto& s : used) f.push_back(s.focal);
    const double m = detail::median(std::move(f));
    out.search = {0.5 * m, 2.0 * m};
  }

  std::vector<double> candidates{out.search.lo, out.search.hi};
  for (double p : detail::hinge_breakpoints(used, image_dim))
    if (p > out.search.lo && p < out.search.hi) candidates.push_back(p);
  std::sort(candidates.begin(), candidates.end());

  std::vector<double> values(candidates.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    values[i] = hinge_objective(candidates[i], used, image_dim);
    best = std::min(best, values[i]);
  }
  const double tol = 1e-9 * (1.0 + best);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (values[i] <= best + tol) {
      out.focal = candidates[i];
      out.objective = values[i];
      break;
    }
  }
  return out;
}

/// Horizontal focal of a segment from its (r_z, f_x) observations.
inline FitResult fit_segment_focal(const SegmentObservations& obs, double rz_min,
                                   std::optional<SearchInterval> search = std::nullopt) {
  obs.validate();
  const auto s = obs.x_samples();
  return fit_focal(s, obs.width, rz_min, search);
}

/// Vertical focal from the optional (r_x, f_y) observations; needs the image
/// height. Returns nullopt when no frame carries vertical observations.
inline std::optional<FitResult> fit_segment_focal_y(const SegmentObservations& obs, double rx_min,
                                                    std::optional<SearchInterval> search = std::nullopt) {
  obs.validate();
  const auto s = obs.y_samples();
  if (s.empty()) return std::nullopt;
  detail::require(obs.height && *obs.height > 0.0, "fit_segment_focal_y: image height required");
  return fit_focal(s, *obs.height, rx_min, search);
}

}  // namespace lane3d
