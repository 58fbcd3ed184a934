#pragma once

// JSON and JSON Lines formats: frame annotations, predictions, learned
// intrinsics observations, anchor dumps, configs and reports. Parsers are
// strict about types and shapes and name the offending path in ParseError.

#include <cmath>
#include <initializer_list>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lane3d/anchors.hpp"
#include "lane3d/camera.hpp"
#include "lane3d/eval.hpp"
#include "lane3d/intrinsics_fit.hpp"
#include "lane3d/lane.hpp"
#include "lane3d/synthetic.hpp"
#include "lane3d/view_synthesis.hpp"

namespace lane3d {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

namespace detail {

inline Json parse_json_text(std::string_view text, const std::string& what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::exception& e) {  // also number overflow
    throw ParseError(what + ": invalid JSON (" + e.what() + ")");
  }
}

inline const Json& member(const Json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + " must be an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError((path.empty() ? "" : path + ".") + key + " missing");
  return *it;
}

inline const Json* optional_member(const Json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(path + " must be finite");
  return d;
}

inline long long as_integer(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ParseError(path + " must be an integer");
  return v.get<long long>();
}

inline std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ParseError(path + " must be a string");
  return v.get<std::string>();
}

inline std::vector<double> as_numbers(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path + " must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// Accepts a nested rows x cols array or a flat row-major array.
template <int Rows, int Cols>
Eigen::Matrix<double, Rows, Cols> as_matrix(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path + " must be an array");
  Eigen::Matrix<double, Rows, Cols> m;
  if (v.size() == static_cast<std::size_t>(Rows * Cols) && !v.empty() && !v[0].is_array()) {
    const auto flat = as_numbers(v, path);
    for (int r = 0; r < Rows; ++r)
      for (int c = 0; c < Cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * Cols + c)];
    return m;
  }
  if (v.size() != static_cast<std::size_t>(Rows))
    throw ParseError(path + " must be " + std::to_string(Rows) + "x" + std::to_string(Cols));
  for (int r = 0; r < Rows; ++r) {
    const auto row = as_numbers(v[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]");
    if (row.size() != static_cast<std::size_t>(Cols))
      throw ParseError(path + " must be " + std::to_string(Rows) + "x" + std::to_string(Cols));
    for (int c = 0; c < Cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

template <typename M>
Json matrix_to_json(const M& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> allowed, const std::string& path) {
  if (!obj.is_object()) throw ParseError((path.empty() ? std::string("document") : path) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError((path.empty() ? "" : path + ".") + key + " is not a recognized key");
  }
}

template <typename T>
void read_if(const Json& obj, const char* key, const std::string& path, T& out) {
  const Json* v = optional_member(obj, key);
  if (!v) return;
  const std::string p = (path.empty() ? "" : path + ".") + key;
  if constexpr (std::is_same_v<T, double>) {
    out = as_number(*v, p);
  } else if constexpr (std::is_same_v<T, std::string>) {
    out = as_string(*v, p);
  } else {
    out = static_cast<T>(as_integer(*v, p));
  }
}

inline std::string join_path(const std::string& base, const char* key) { return base.empty() ? key : base + "." + key; }

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string line(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

inline bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Lane polylines

/// Lane polyline as stored in files: parallel x, y, z, visibility arrays.
struct LanePolyline {
  std::vector<double> x, y, z, visibility;
};

/// Resamples a polyline at the y-steps: x and z are linearly interpolated in
/// y, visibility is taken from the nearest original point. Positions outside
/// the polyline's y span get visibility 0 and the nearest endpoint's x, z.
inline void resample_polyline(const LanePolyline& line, const YSteps& ys, std::vector<double>& x,
                              std::vector<double>& z, std::vector<double>& vis) {
  const std::size_t n = ys.size();
  x.assign(n, 0.0);
  z.assign(n, 0.0);
  vis.assign(n, 0.0);
  if (line.y.empty()) return;

  std::vector<std::size_t> order(line.y.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return line.y[a] < line.y[b]; });

  for (std::size_t k = 0; k < n; ++k) {
    const double yt = ys[k];
    const std::size_t first = order.front(), last = order.back();
    if (yt < line.y[first] || yt > line.y[last]) {
      const std::size_t e = yt < line.y[first] ? first : last;
      x[k] = line.x[e];
      z[k] = line.z[e];
      continue;
    }
    // First sorted point with y >= yt.
    std::size_t hi = 0;
    while (line.y[order[hi]] < yt) ++hi;
    const std::size_t b = order[hi];
    if (line.y[b] == yt || hi == 0) {
      x[k] = line.x[b];
      z[k] = line.z[b];
      vis[k] = line.visibility[b];
      continue;
    }
    const std::size_t a = order[hi - 1];
    const double t = (yt - line.y[a]) / (line.y[b] - line.y[a]);
    x[k] = (1.0 - t) * line.x[a] + t * line.x[b];
    z[k] = (1.0 - t) * line.z[a] + t * line.z[b];
    vis[k] = t <= 0.5 ? line.visibility[a] : line.visibility[b];
  }
}

namespace detail {

inline LanePolyline read_polyline(const Json& lane, const std::string& path) {
  const Json& xyz = member(lane, "xyz", path);
  if (!xyz.is_array() || xyz.size() != 3) throw ParseError(path + ".xyz must hold 3 rows (x, y, z)");
  LanePolyline line;
  line.x = as_numbers(xyz[0], path + ".xyz[0]");
  line.y = as_numbers(xyz[1], path + ".xyz[1]");
  line.z = as_numbers(xyz[2], path + ".xyz[2]");
  if (line.x.size() != line.y.size() || line.x.size() != line.z.size()) throw ParseError(path + ".xyz ragged");
  if (line.x.empty()) throw ParseError(path + ".xyz is empty");
  line.visibility = as_numbers(member(lane, "visibility", path), path + ".visibility");
  if (line.visibility.size() != line.x.size()) throw ParseError(path + ".visibility length differs from xyz");
  for (double v : line.visibility)
    if (v < 0.0 || v > 1.0) throw ParseError(path + ".visibility values must lie in [0,1]");
  return line;
}

inline Json polyline_json(const std::vector<double>& x, const std::vector<double>& z, const std::vector<double>& vis,
                          const YSteps& ys) {
  Json lane;
  lane["xyz"] = Json::array({Json(x), Json(ys.values()), Json(z)});
  lane["visibility"] = vis;
  return lane;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Frame annotations

/// One annotated frame. `extrinsic` is the ego->camera transform. Lanes are
/// stored resampled at the y-steps used when parsing.
struct FrameAnnotation {
  std::string frame_id;
  Mat3 intrinsic = Mat3::Identity();
  Eigen::Matrix4d extrinsic = Eigen::Matrix4d::Identity();
  int image_width = 0;   // 0 when not recorded
  int image_height = 0;
  std::vector<Lane3D> lanes;

  friend bool operator==(const FrameAnnotation& a, const FrameAnnotation& b) {
    return a.frame_id == b.frame_id && a.intrinsic == b.intrinsic && a.extrinsic == b.extrinsic &&
           a.image_width == b.image_width && a.image_height == b.image_height && a.lanes == b.lanes;
  }
};

inline FrameAnnotation parse_annotation(std::string_view text, const YSteps& ys) {
  const Json doc = detail::parse_json_text(text, "annotation");
  if (!doc.is_object()) throw ParseError("annotation must be a JSON object");
  FrameAnnotation a;
  a.frame_id = detail::as_string(detail::member(doc, "frame_id", ""), "frame_id");
  a.intrinsic = detail::as_matrix<3, 3>(detail::member(doc, "intrinsic", ""), "intrinsic");
  a.extrinsic = detail::as_matrix<4, 4>(detail::member(doc, "extrinsic", ""), "extrinsic");
  detail::read_if(doc, "image_width", "", a.image_width);
  detail::read_if(doc, "image_height", "", a.image_height);

  const Json& lanes = detail::member(doc, "lane_lines", "");
  if (!lanes.is_array()) throw ParseError("lane_lines must be an array");
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const std::string path = "lane_lines[" + std::to_string(i) + "]";
    const long long category = detail::as_integer(detail::member(lanes[i], "category", path), path + ".category");
    if (category < 0) throw ParseError(path + ".category must be non-negative");
    const LanePolyline line = detail::read_polyline(lanes[i], path);
    Lane3D lane;
    lane.category = static_cast<int>(category);
    resample_polyline(line, ys, lane.x, lane.z, lane.visibility);
    a.lanes.push_back(std::move(lane));
  }
  return a;
}

inline std::string serialize_annotation(const FrameAnnotation& a, const YSteps& ys) {
  Json doc;
  doc["frame_id"] = a.frame_id;
  doc["intrinsic"] = detail::matrix_to_json(a.intrinsic);
  doc["extrinsic"] = detail::matrix_to_json(a.extrinsic);
  if (a.image_width > 0) doc["image_width"] = a.image_width;
  if (a.image_height > 0) doc["image_height"] = a.image_height;
  doc["lane_lines"] = Json::array();
  for (const auto& lane : a.lanes) {
    Json l = detail::polyline_json(lane.x, lane.z, lane.visibility, ys);
    l["category"] = lane.category;
    doc["lane_lines"].push_back(std::move(l));
  }
  return doc.dump(1) + "\n";
}

/// Camera described by an annotation (image size must be recorded).
inline CameraModel annotation_camera(const FrameAnnotation& a) {
  if (a.image_width <= 0 || a.image_height <= 0) throw ParseError("annotation lacks image_width/image_height");
  Transform t = Transform::Identity();
  t.matrix() = a.extrinsic;
  return CameraModel(Intrinsics::from_matrix(a.intrinsic), a.image_width, a.image_height, t);
}

// ---------------------------------------------------------------------------
// Predictions (JSON Lines, one frame per line)

struct FramePredictions {
  std::string frame_id;
  std::vector<Proposal> lanes;
};

inline std::vector<FramePredictions> parse_predictions(std::string_view text, const YSteps& ys,
                                                       int category_count = kDefaultCategoryCount) {
  std::vector<FramePredictions> frames;
  const auto lines = detail::split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::blank(lines[ln])) continue;
    const std::string where = "line " + std::to_string(ln + 1);
    const Json doc = detail::parse_json_text(lines[ln], where);
    if (!doc.is_object()) throw ParseError(where + " must be a JSON object");
    FramePredictions f;
    f.frame_id = detail::as_string(detail::member(doc, "frame_id", where), where + ": frame_id");
    const Json& lanes = detail::member(doc, "lanes", where);
    if (!lanes.is_array()) throw ParseError(where + ": lanes must be an array");
    for (std::size_t i = 0; i < lanes.size(); ++i) {
      const std::string path = where + ": lanes[" + std::to_string(i) + "]";
      Proposal p;
      if (const Json* probs = detail::optional_member(lanes[i], "category_probs")) {
        p.class_probs = detail::as_numbers(*probs, path + ".category_probs");
        if (p.class_probs.size() < 2) throw ParseError(path + ".category_probs needs background plus categories");
        double sum = 0.0;
        for (double v : p.class_probs) {
          if (v < 0.0 || v > 1.0) throw ParseError(path + ".category_probs values must lie in [0,1]");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-3) throw ParseError(path + ".category_probs must sum to 1");
        for (double& v : p.class_probs) v /= sum;
      } else {
        const long long cat = detail::as_integer(detail::member(lanes[i], "category", path), path + ".category");
        const double score = detail::as_number(detail::member(lanes[i], "score", path), path + ".score");
        if (cat < 1) throw ParseError(path + ".category must be a lane category (>= 1)");
        if (score < 0.0 || score > 1.0) throw ParseError(path + ".score must lie in [0,1]");
        const auto size = static_cast<std::size_t>(std::max<long long>(category_count, cat)) + 1;
        p.class_probs.assign(size, 0.0);
        p.class_probs[static_cast<std::size_t>(cat)] = score;
        p.class_probs[kBackground] = 1.0 - score;
      }
      const LanePolyline line = detail::read_polyline(lanes[i], path);
      resample_polyline(line, ys, p.x, p.z, p.visibility);
      f.lanes.push_back(std::move(p));
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

inline std::string serialize_predictions(const std::vector<FramePredictions>& frames, const YSteps& ys) {
  std::string out;
  for (const auto& f : frames) {
    Json doc;
    doc["frame_id"] = f.frame_id;
    doc["lanes"] = Json::array();
    for (const auto& p : f.lanes) {
      Json l = detail::polyline_json(p.x, p.z, p.visibility, ys);
      l["category_probs"] = p.class_probs;
      doc["lanes"].push_back(std::move(l));
    }
    out += doc.dump();
    out += '\n';
  }
  return out;
}

/// Ground-truth lanes re-expressed as certain predictions.
inline std::vector<Proposal> lanes_as_predictions(const std::vector<Lane3D>& lanes,
                                                  int category_count = kDefaultCategoryCount) {
  std::vector<Proposal> out;
  for (const auto& l : lanes) {
    Proposal p;
    p.class_probs.assign(static_cast<std::size_t>(std::max(category_count, l.category)) + 1, 0.0);
    p.class_probs[static_cast<std::size_t>(l.category)] = 1.0;
    p.x = l.x;
    p.z = l.z;
    p.visibility = l.visibility;
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Learned intrinsics observations (JSON Lines)

/// Observations grouped by segment id, in file order within each segment.
/// The image size is not part of the format; callers set it.
inline std::map<std::string, SegmentObservations> parse_observations(std::string_view text) {
  std::map<std::string, SegmentObservations> segments;
  const auto lines = detail::split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::blank(lines[ln])) continue;
    const std::string where = "line " + std::to_string(ln + 1);
    const Json doc = detail::parse_json_text(lines[ln], where);
    if (!doc.is_object()) throw ParseError(where + " must be a JSON object");
    const std::string id = detail::as_string(detail::member(doc, "segment_id", where), where + ": segment_id");
    FrameObservation o;
    o.r_z = std::abs(detail::as_number(detail::member(doc, "r_z", where), where + ": r_z"));
    o.f_x = detail::as_number(detail::member(doc, "f_x", where), where + ": f_x");
    if (o.f_x <= 0.0) throw ParseError(where + ": f_x must be positive");
    if (const Json* v = detail::optional_member(doc, "r_x")) o.r_x = std::abs(detail::as_number(*v, where + ": r_x"));
    if (const Json* v = detail::optional_member(doc, "f_y")) {
      o.f_y = detail::as_number(*v, where + ": f_y");
      if (*o.f_y <= 0.0) throw ParseError(where + ": f_y must be positive");
    }
    segments[id].frames.push_back(o);
  }
  return segments;
}

inline std::string serialize_observations(const std::string& segment_id, const SegmentObservations& obs) {
  std::string out;
  for (const auto& f : obs.frames) {
    OrderedJson doc;
    doc["segment_id"] = segment_id;
    doc["r_z"] = f.r_z;
    doc["f_x"] = f.f_x;
    if (f.r_x) doc["r_x"] = *f.r_x;
    if (f.f_y) doc["f_y"] = *f.f_y;
    out += doc.dump();
    out += '\n';
  }
  return out;
}

inline OrderedJson fit_result_json(const FitResult& x, const std::optional<FitResult>& y) {
  OrderedJson j;
  j["f_x"] = x.focal;
  j["f_y"] = y ? y->focal : x.focal;
  j["objective"] = x.objective;
  j["used_count"] = x.used_count;
  j["filtered_count"] = x.filtered_count;
  j["search_lo"] = x.search.lo;
  j["search_hi"] = x.search.hi;
  if (y) j["objective_y"] = y->objective;
  return j;
}

// ---------------------------------------------------------------------------
// Reports

inline OrderedJson report_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? OrderedJson(*v) : OrderedJson(nullptr); };
  OrderedJson j;
  j["f1"] = r.f1;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["category_accuracy"] = opt(r.category_accuracy);
  j["x_near"] = opt(r.x_near);
  j["x_far"] = opt(r.x_far);
  j["z_near"] = opt(r.z_near);
  j["z_far"] = opt(r.z_far);
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["frames"] = r.frames;
  return j;
}

// ---------------------------------------------------------------------------
// Anchors

inline std::string serialize_anchors(const std::vector<LaneAnchor>& anchors) {
  OrderedJson list = OrderedJson::array();
  for (const auto& a : anchors) {
    OrderedJson j;
    j["origin_x"] = a.origin_x;
    j["pitch_deg"] = rad_to_deg(a.pitch);
    j["yaw_deg"] = rad_to_deg(a.yaw);
    j["x"] = a.x;
    j["z"] = a.z;
    list.push_back(std::move(j));
  }
  return list.dump() + "\n";
}

inline std::vector<LaneAnchor> parse_anchors(std::string_view text) {
  const Json doc = detail::parse_json_text(text, "anchors");
  if (!doc.is_array()) throw ParseError("anchor dump must be a JSON array");
  std::vector<LaneAnchor> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string path = "[" + std::to_string(i) + "]";
    LaneAnchor a;
    a.origin_x = detail::as_number(detail::member(doc[i], "origin_x", path), path + ".origin_x");
    a.pitch = deg_to_rad(detail::as_number(detail::member(doc[i], "pitch_deg", path), path + ".pitch_deg"));
    a.yaw = deg_to_rad(detail::as_number(detail::member(doc[i], "yaw_deg", path), path + ".yaw_deg"));
    a.x = detail::as_numbers(detail::member(doc[i], "x", path), path + ".x");
    a.z = detail::as_numbers(detail::member(doc[i], "z", path), path + ".z");
    if (a.x.size() != a.z.size()) throw ParseError(path + ": x and z lengths differ");
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configs (unknown keys are rejected)

namespace detail {

inline RoiConfig parse_roi(const Json& j, const std::string& path) {
  reject_unknown(j, {"x_min", "x_max", "y_min", "y_max"}, path);
  RoiConfig roi;
  read_if(j, "x_min", path, roi.x_min);
  read_if(j, "x_max", path, roi.x_max);
  read_if(j, "y_min", path, roi.y_min);
  read_if(j, "y_max", path, roi.y_max);
  if (!(roi.x_min < roi.x_max && roi.y_min < roi.y_max)) throw ParseError(path + ": need x_min < x_max and y_min < y_max");
  return roi;
}

inline OrderedJson roi_json(const RoiConfig& r) {
  OrderedJson j;
  j["x_min"] = r.x_min;
  j["x_max"] = r.x_max;
  j["y_min"] = r.y_min;
  j["y_max"] = r.y_max;
  return j;
}

}  // namespace detail

struct EvalSettings {
  EvalConfig eval;
  YSteps ysteps = YSteps::defaults();
  int category_count = kDefaultCategoryCount;
};

/// {"distance_threshold", "match_ratio", "visibility_penalty",
///  "near_far_boundary", "prob_threshold", "visibility_threshold",
///  "unmatched_cost", "category_count",
///  "ysteps": [..] | {"y_min", "y_max", "count"}}; every key optional.
inline EvalSettings parse_eval_settings(std::string_view text) {
  const Json doc = detail::parse_json_text(text, "config");
  detail::reject_unknown(doc,
                         {"distance_threshold", "match_ratio", "visibility_penalty", "near_far_boundary",
                          "prob_threshold", "visibility_threshold", "unmatched_cost", "category_count", "ysteps"},
                         "");
  EvalSettings s;
  detail::read_if(doc, "distance_threshold", "", s.eval.distance_threshold);
  detail::read_if(doc, "match_ratio", "", s.eval.match_ratio);
  detail::read_if(doc, "visibility_penalty", "", s.eval.visibility_penalty);
  detail::read_if(doc, "near_far_boundary", "", s.eval.near_far_boundary);
  detail::read_if(doc, "prob_threshold", "", s.eval.prob_threshold);
  detail::read_if(doc, "visibility_threshold", "", s.eval.visibility_threshold);
  detail::read_if(doc, "unmatched_cost", "", s.eval.unmatched_cost);
  detail::read_if(doc, "category_count", "", s.category_count);
  if (const Json* y = detail::optional_member(doc, "ysteps")) {
    try {
      if (y->is_array()) {
        s.ysteps = YSteps(detail::as_numbers(*y, "ysteps"));
      } else {
        detail::reject_unknown(*y, {"y_min", "y_max", "count"}, "ysteps");
        double lo = 0.1, hi = 80.0;
        long long count = 20;
        detail::read_if(*y, "y_min", "ysteps", lo);
        detail::read_if(*y, "y_max", "ysteps", hi);
        detail::read_if(*y, "count", "ysteps", count);
        if (count < 2) throw ParseError("ysteps.count must be >= 2");
        s.ysteps = YSteps::uniform(lo, hi, static_cast<std::size_t>(count));
      }
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("ysteps: ") + e.what());
    }
  }
  try {
    s.eval.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return s;
}

/// {"lateral_starts", "pitches_deg", "yaws_deg", "roi", "ystep_count"}.
inline AnchorConfig parse_anchor_config(std::string_view text) {
  const Json doc = detail::parse_json_text(text, "anchor config");
  detail::reject_unknown(doc, {"lateral_starts", "pitches_deg", "yaws_deg", "roi", "ystep_count"}, "");
  AnchorConfig c;
  detail::read_if(doc, "lateral_starts", "", c.lateral_starts);
  if (const Json* v = detail::optional_member(doc, "pitches_deg")) c.pitches_deg = detail::as_numbers(*v, "pitches_deg");
  if (const Json* v = detail::optional_member(doc, "yaws_deg")) c.yaws_deg = detail::as_numbers(*v, "yaws_deg");
  if (const Json* v = detail::optional_member(doc, "roi")) c.roi = detail::parse_roi(*v, "roi");
  detail::read_if(doc, "ystep_count", "", c.ystep_count);
  if (c.lateral_starts < 1) throw ParseError("lateral_starts must be >= 1");
  if (c.pitches_deg.empty() || c.yaws_deg.empty()) throw ParseError("angle lists must be non-empty");
  for (double a : c.pitches_deg)
    if (std::abs(a) >= 90.0) throw ParseError("pitches_deg: |angle| must be < 90");
  for (double a : c.yaws_deg)
    if (std::abs(a) >= 90.0) throw ParseError("yaws_deg: |angle| must be < 90");
  if (c.ystep_count < 2) throw ParseError("ystep_count must be >= 2");
  return c;
}

/// Scene description for the synthetic renderer. Every key is optional.
inline SceneSpec parse_scene_spec(std::string_view text) {
  const Json doc = detail::parse_json_text(text, "scene spec");
  detail::reject_unknown(
      doc, {"seed", "lanes", "terrain", "camera", "trajectory", "roi", "ystep_count", "depth_range", "lane_width"}, "");
  SceneSpec s;
  if (const Json* v = detail::optional_member(doc, "seed")) {
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
      throw ParseError("seed must be a non-negative integer");
    s.seed = v->get<std::uint64_t>();
  }
  if (const Json* lanes = detail::optional_member(doc, "lanes")) {
    if (!lanes->is_array()) throw ParseError("lanes must be an array");
    s.lanes.clear();
    for (std::size_t i = 0; i < lanes->size(); ++i) {
      const std::string p = "lanes[" + std::to_string(i) + "]";
      detail::reject_unknown((*lanes)[i], {"offset", "slope", "curvature", "category"}, p);
      LaneSpec l;
      detail::read_if((*lanes)[i], "offset", p, l.offset);
      detail::read_if((*lanes)[i], "slope", p, l.slope);
      detail::read_if((*lanes)[i], "curvature", p, l.curvature);
      detail::read_if((*lanes)[i], "category", p, l.category);
      if (l.category < 1) throw ParseError(p + ".category must be >= 1");
      s.lanes.push_back(l);
    }
  }
  if (const Json* t = detail::optional_member(doc, "terrain")) {
    detail::reject_unknown(*t, {"a0", "a1", "a2"}, "terrain");
    detail::read_if(*t, "a0", "terrain", s.terrain.a0);
    detail::read_if(*t, "a1", "terrain", s.terrain.a1);
    detail::read_if(*t, "a2", "terrain", s.terrain.a2);
  }
  if (const Json* c = detail::optional_member(doc, "camera")) {
    detail::reject_unknown(*c, {"height", "pitch", "fx", "fy", "cx", "cy", "width", "image_height"}, "camera");
    detail::read_if(*c, "height", "camera", s.camera.height);
    detail::read_if(*c, "pitch", "camera", s.camera.pitch);
    detail::read_if(*c, "fx", "camera", s.camera.intrinsics.fx);
    detail::read_if(*c, "fy", "camera", s.camera.intrinsics.fy);
    detail::read_if(*c, "cx", "camera", s.camera.intrinsics.cx);
    detail::read_if(*c, "cy", "camera", s.camera.intrinsics.cy);
    detail::read_if(*c, "width", "camera", s.camera.width);
    detail::read_if(*c, "image_height", "camera", s.camera.image_height);
  }
  if (const Json* t = detail::optional_member(doc, "trajectory")) {
    detail::reject_unknown(*t, {"frame_count", "step", "yaw_amplitude", "yaw_period", "yaw_jitter"}, "trajectory");
    detail::read_if(*t, "frame_count", "trajectory", s.trajectory.frame_count);
    detail::read_if(*t, "step", "trajectory", s.trajectory.step);
    detail::read_if(*t, "yaw_amplitude", "trajectory", s.trajectory.yaw_amplitude);
    detail::read_if(*t, "yaw_period", "trajectory", s.trajectory.yaw_period);
    detail::read_if(*t, "yaw_jitter", "trajectory", s.trajectory.yaw_jitter);
  }
  if (const Json* r = detail::optional_member(doc, "roi")) s.roi = detail::parse_roi(*r, "roi");
  detail::read_if(doc, "ystep_count", "", s.ystep_count);
  if (const Json* d = detail::optional_member(doc, "depth_range")) {
    detail::reject_unknown(*d, {"min", "max"}, "depth_range");
    detail::read_if(*d, "min", "depth_range", s.depth_range.min);
    detail::read_if(*d, "max", "depth_range", s.depth_range.max);
    if (!(s.depth_range.min > 0.0 && s.depth_range.max > s.depth_range.min))
      throw ParseError("depth_range: need 0 < min < max");
  }
  detail::read_if(doc, "lane_width", "", s.lane_width);
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("scene spec: ") + e.what());
  }
  return s;
}

inline std::string serialize_scene_spec(const SceneSpec& s) {
  OrderedJson j;
  j["seed"] = s.seed;
  j["lanes"] = OrderedJson::array();
  for (const auto& l : s.lanes)
    j["lanes"].push_back({{"offset", l.offset}, {"slope", l.slope}, {"curvature", l.curvature}, {"category", l.category}});
  j["terrain"] = {{"a0", s.terrain.a0}, {"a1", s.terrain.a1}, {"a2", s.terrain.a2}};
  j["camera"] = {{"height", s.camera.height}, {"pitch", s.camera.pitch},       {"fx", s.camera.intrinsics.fx},
                 {"fy", s.camera.intrinsics.fy}, {"cx", s.camera.intrinsics.cx}, {"cy", s.camera.intrinsics.cy},
                 {"width", s.camera.width},    {"image_height", s.camera.image_height}};
  j["trajectory"] = {{"frame_count", s.trajectory.frame_count},     {"step", s.trajectory.step},
                     {"yaw_amplitude", s.trajectory.yaw_amplitude}, {"yaw_period", s.trajectory.yaw_period},
                     {"yaw_jitter", s.trajectory.yaw_jitter}};
  j["roi"] = detail::roi_json(s.roi);
  j["ystep_count"] = s.ystep_count;
  j["depth_range"] = {{"min", s.depth_range.min}, {"max", s.depth_range.max}};
  j["lane_width"] = s.lane_width;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Poses and intrinsics for the warp tool

/// {"rotation": 3x3, "translation": [3]} mapping target to source camera.
inline RigidPose parse_pose(std::string_view text) {
  const Json doc = detail::parse_json_text(text, "pose");
  const Mat3 r = detail::as_matrix<3, 3>(detail::member(doc, "rotation", ""), "rotation");
  const auto t = detail::as_numbers(detail::member(doc, "translation", ""), "translation");
  if (t.size() != 3) throw ParseError("translation must have 3 entries");
  if (!detail::is_rotation(r, 1e-6)) throw ParseError("rotation must be orthonormal with det +1");
  // Re-orthonormalize so file rounding does not trip the strict pose check.
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return RigidPose(svd.matrixU() * svd.matrixV().transpose(), Vec3(t[0], t[1], t[2]));
}

inline std::string serialize_pose(const RigidPose& p) {
  OrderedJson j;
  j["rotation"] = detail::matrix_to_json(p.rotation());
  j["translation"] = {p.translation().x(), p.translation().y(), p.translation().z()};
  return j.dump(2) + "\n";
}

/// {"fx", "fy", "cx", "cy"} or {"intrinsic": 3x3}.
inline Intrinsics parse_intrinsics(std::string_view text) {
  const Json doc = detail::parse_json_text(text, "intrinsics");
  if (!doc.is_object()) throw ParseError("intrinsics must be a JSON object");
  Intrinsics k;
  if (const Json* m = detail::optional_member(doc, "intrinsic")) {
    k = Intrinsics::from_matrix(detail::as_matrix<3, 3>(*m, "intrinsic"));
  } else {
    k.fx = detail::as_number(detail::member(doc, "fx", ""), "fx");
    k.fy = detail::as_number(detail::member(doc, "fy", ""), "fy");
    k.cx = detail::as_number(detail::member(doc, "cx", ""), "cx");
    k.cy = detail::as_number(detail::member(doc, "cy", ""), "cy");
  }
  if (!(k.fx > 0.0 && k.fy > 0.0)) throw ParseError("intrinsics: focal lengths must be positive");
  return k;
}

inline std::string serialize_intrinsics(const Intrinsics& k) {
  OrderedJson j;
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  return j.dump(2) + "\n";
}

}  // namespace lane3d
