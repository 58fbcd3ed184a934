#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "lane3d/eval.hpp"
#include "lane3d/io.hpp"
#include "lane3d/raster_io.hpp"
#include "lane3d/synthetic.hpp"

using namespace lane3d;

namespace {

const char* kAnnotation = R"({
  "frame_id": "seg0/000001",
  "intrinsic": [[500, 0, 240], [0, 500, 160], [0, 0, 1]],
  "extrinsic": [[1, 0, 0, 0], [0, 0, -1, 1.5], [0, 1, 0, 0], [0, 0, 0, 1]],
  "lane_lines": [
    {"category": 2, "xyz": [[1.0, 1.0, 3.0], [0.0, 10.0, 20.0], [0.0, 0.5, 1.0]], "visibility": [1, 1, 0]}
  ]
})";

std::string expect_parse_error(auto&& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ParseError";
  return {};
}

FrameAnnotation synthetic_annotation(const RenderedFrame& f, const std::string& id) {
  FrameAnnotation a;
  a.frame_id = id;
  a.intrinsic = f.cam.K();
  a.extrinsic = f.cam.ego_to_camera().matrix();
  a.image_width = f.cam.width();
  a.image_height = f.cam.height();
  a.lanes = f.gt_lanes;
  return a;
}

}  // namespace

TEST(Polyline, ResamplesLinearlyWithNearestVisibility) {
  const LanePolyline line{{0, 10, 10}, {0, 10, 20}, {0, 1, 3}, {1, 0, 1}};
  const YSteps ys({0.0, 4.0, 6.0, 10.0, 15.0, 20.0, 25.0});
  std::vector<double> x, z, v;
  resample_polyline(line, ys, x, z, v);
  const std::vector<double> ex{0, 4, 6, 10, 10, 10, 10};
  const std::vector<double> ez{0, 0.4, 0.6, 1, 2, 3, 3};
  const std::vector<double> ev{1, 1, 0, 0, 0, 1, 0};
  for (std::size_t k = 0; k < ys.size(); ++k) {
    EXPECT_NEAR(x[k], ex[k], 1e-12) << k;
    EXPECT_NEAR(z[k], ez[k], 1e-12) << k;
    EXPECT_EQ(v[k], ev[k]) << k;
  }
}

TEST(Polyline, UnsortedInputAndOutsideSpan) {
  const LanePolyline line{{5, 1}, {30, 10}, {2, 0}, {1, 1}};
  const YSteps ys({5.0, 20.0, 40.0});
  std::vector<double> x, z, v;
  resample_polyline(line, ys, x, z, v);
  EXPECT_EQ(x[0], 1.0);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_NEAR(x[1], 3.0, 1e-12);
  EXPECT_NEAR(z[1], 1.0, 1e-12);
  EXPECT_EQ(v[1], 1.0);
  EXPECT_EQ(x[2], 5.0);
  EXPECT_EQ(v[2], 0.0);
}

TEST(Annotation, Parses) {
  const YSteps ys({0.0, 5.0, 10.0, 20.0});
  const auto a = parse_annotation(kAnnotation, ys);
  EXPECT_EQ(a.frame_id, "seg0/000001");
  EXPECT_EQ(a.intrinsic(0, 2), 240.0);
  EXPECT_EQ(a.extrinsic(1, 3), 1.5);
  EXPECT_EQ(a.image_width, 0);
  ASSERT_EQ(a.lanes.size(), 1u);
  EXPECT_EQ(a.lanes[0].category, 2);
  EXPECT_EQ(a.lanes[0].x, (std::vector<double>{1, 1, 1, 3}));
  EXPECT_EQ(a.lanes[0].z, (std::vector<double>{0, 0.25, 0.5, 1}));
  EXPECT_EQ(a.lanes[0].visibility, (std::vector<double>{1, 1, 1, 0}));
  EXPECT_THROW(annotation_camera(a), ParseError);
}

TEST(Annotation, ErrorsNameTheField) {
  const YSteps ys = YSteps::defaults();
  Json doc = Json::parse(kAnnotation);
  doc["lane_lines"][0]["xyz"][1] = {0.0, 10.0};
  EXPECT_NE(expect_parse_error([&] { parse_annotation(doc.dump(), ys); }).find("lane_lines[0].xyz ragged"),
            std::string::npos);

  doc = Json::parse(kAnnotation);
  doc.erase("intrinsic");
  EXPECT_NE(expect_parse_error([&] { parse_annotation(doc.dump(), ys); }).find("intrinsic"), std::string::npos);

  doc = Json::parse(kAnnotation);
  doc["lane_lines"][0]["visibility"] = {1, 2, 0};
  EXPECT_NE(expect_parse_error([&] { parse_annotation(doc.dump(), ys); }).find("visibility"), std::string::npos);

  doc = Json::parse(kAnnotation);
  doc["lane_lines"][0]["category"] = -1;
  EXPECT_THROW(parse_annotation(doc.dump(), ys), ParseError);

  doc = Json::parse(kAnnotation);
  doc["lane_lines"][0]["xyz"] = {{1.0}, {2.0}};
  EXPECT_THROW(parse_annotation(doc.dump(), ys), ParseError);

  doc = Json::parse(kAnnotation);
  doc["intrinsic"] = {1, 2, 3};
  EXPECT_THROW(parse_annotation(doc.dump(), ys), ParseError);

  EXPECT_THROW(parse_annotation("{not json", ys), ParseError);
  EXPECT_THROW(parse_annotation("[]", ys), ParseError);
}

TEST(Annotation, NonFiniteRejected) {
  std::string text = kAnnotation;
  text.replace(text.find("0.5, 1.0]"), 3, "NaN");
  EXPECT_THROW(parse_annotation(text, YSteps::defaults()), ParseError);
  text = kAnnotation;
  text.replace(text.find("0.5, 1.0]"), 3, "1e999");
  EXPECT_THROW(parse_annotation(text, YSteps::defaults()), ParseError);
}

TEST(Annotation, FlatIntrinsicMatrixAccepted) {
  Json doc = Json::parse(kAnnotation);
  doc["intrinsic"] = {500, 0, 240, 0, 500, 160, 0, 0, 1};
  const auto a = parse_annotation(doc.dump(), YSteps::defaults());
  EXPECT_EQ(a.intrinsic(1, 2), 160.0);
}

TEST(Annotation, RoundTripsSyntheticFrames) {
  SceneSpec s;
  s.trajectory.frame_count = 3;
  s.terrain = {0.0, 0.02, -3e-4};
  const auto frames = render_scene(s, 2);
  const YSteps ys = s.ysteps();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto a = synthetic_annotation(frames[f], "seg/" + std::to_string(f));
    const std::string text = serialize_annotation(a, ys);
    const auto back = parse_annotation(text, ys);
    EXPECT_TRUE(back == a);
    EXPECT_EQ(serialize_annotation(back, ys), text);
    const CameraModel cam = annotation_camera(back);
    EXPECT_TRUE(cam.ego_to_camera().matrix().isApprox(frames[f].cam.ego_to_camera().matrix(), 1e-15));
    EXPECT_EQ(cam.intrinsics(), frames[f].cam.intrinsics());
  }
}

TEST(Predictions, BothEncodings) {
  const YSteps ys({0.0, 10.0});
  const std::string text =
      R"({"frame_id": "a", "lanes": [{"category": 3, "score": 0.8, "xyz": [[0, 0], [0, 10], [0, 0]], "visibility": [1, 1]}]})"
      "\n\n"
      R"({"frame_id": "b", "lanes": [{"category_probs": [0.2, 0.3, 0.5], "xyz": [[1, 2], [0, 10], [0, 0]], "visibility": [1, 0]}]})"
      "\n";
  const auto frames = parse_predictions(text, ys, 5);
  ASSERT_EQ(frames.size(), 2u);
  const auto& p = frames[0].lanes[0];
  ASSERT_EQ(p.class_probs.size(), 6u);
  EXPECT_DOUBLE_EQ(p.class_probs[3], 0.8);
  EXPECT_NEAR(p.class_probs[0], 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(p.confidence(), 0.8);
  const auto& q = frames[1].lanes[0];
  EXPECT_EQ(q.class_probs.size(), 3u);
  EXPECT_DOUBLE_EQ(q.confidence(), 0.5);
  EXPECT_EQ(q.x, (std::vector<double>{1, 2}));
  EXPECT_EQ(q.visibility, (std::vector<double>{1, 0}));
}

TEST(Predictions, NearSimplexIsNormalized) {
  const YSteps ys({0.0, 10.0});
  const auto f = parse_predictions(
      R"({"frame_id": "a", "lanes": [{"category_probs": [0.2, 0.3, 0.5005], "xyz": [[0, 0], [0, 10], [0, 0]], "visibility": [1, 1]}]})",
      ys);
  double sum = 0.0;
  for (double v : f[0].lanes[0].class_probs) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(Predictions, Errors) {
  const YSteps ys({0.0, 10.0});
  const std::string tail = R"(, "xyz": [[0, 0], [0, 10], [0, 0]], "visibility": [1, 1]}]})";
  auto parse = [&](const std::string& lane) {
    return parse_predictions(R"({"frame_id": "a", "lanes": [{)" + lane + tail, ys);
  };
  EXPECT_NE(expect_parse_error([&] { parse(R"("category_probs": [0.5, 0.6])"); }).find("sum to 1"), std::string::npos);
  EXPECT_THROW(parse(R"("category_probs": [1.0])"), ParseError);
  EXPECT_THROW(parse(R"("category": 0, "score": 0.5)"), ParseError);
  EXPECT_THROW(parse(R"("category": 2, "score": 1.5)"), ParseError);
  EXPECT_THROW(parse(R"("category": 2)"), ParseError);
  const std::string msg = expect_parse_error([&] { parse_predictions("{\"frame_id\": \"a\", \"lanes\": []}\n{oops", ys); });
  EXPECT_NE(msg.find("line 2"), std::string::npos);
}

TEST(Predictions, SerializedGroundTruthScoresPerfectly) {
  SceneSpec s;
  s.trajectory.frame_count = 2;
  const auto frames = render_scene(s);
  const YSteps ys = s.ysteps();
  std::vector<FramePredictions> preds;
  std::vector<FrameLanes> eval_frames;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    preds.push_back({"f" + std::to_string(f), lanes_as_predictions(frames[f].gt_lanes)});
    const auto back = parse_predictions(serialize_predictions({preds.back()}, ys), ys);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].frame_id, preds.back().frame_id);
    eval_frames.push_back({frames[f].gt_lanes, back[0].lanes});
  }
  const auto r = compute_report(eval_frames, ys);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.category_accuracy, 1.0);
  EXPECT_EQ(r.x_near, 0.0);
  EXPECT_EQ(r.z_far, 0.0);
}

TEST(Observations, ParseAndRoundTrip) {
  const std::string text =
      "{\"segment_id\": \"s1\", \"r_z\": -0.05, \"f_x\": 500}\n"
      "{\"segment_id\": \"s2\", \"r_z\": 0.01, \"f_x\": 480, \"r_x\": -0.02, \"f_y\": 470}\n"
      "{\"segment_id\": \"s1\", \"r_z\": 0.1, \"f_x\": 510}\n";
  auto segs = parse_observations(text);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs["s1"].frames.size(), 2u);
  EXPECT_EQ(segs["s1"].frames[0].r_z, 0.05);
  EXPECT_EQ(segs["s1"].frames[1].f_x, 510.0);
  EXPECT_EQ(segs["s2"].frames[0].r_x, 0.02);
  EXPECT_EQ(segs["s2"].frames[0].f_y, 470.0);
  EXPECT_FALSE(segs["s1"].frames[0].r_x);

  const auto again = parse_observations(serialize_observations("s2", segs["s2"]));
  EXPECT_EQ(again.at("s2").frames[0].f_y, 470.0);
  EXPECT_THROW(parse_observations("{\"segment_id\": \"s\", \"r_z\": 0.1, \"f_x\": -3}"), ParseError);
  EXPECT_THROW(parse_observations("{\"segment_id\": \"s\", \"f_x\": 3}"), ParseError);
}

TEST(Observations, FitResultJson) {
  FitResult x{505.5, 1.25, 10, 3, {250, 1000}};
  const auto j = fit_result_json(x, std::nullopt);
  EXPECT_EQ(j["f_x"], 505.5);
  EXPECT_EQ(j["f_y"], 505.5);
  EXPECT_EQ(j["used_count"], 10);
  EXPECT_FALSE(j.contains("objective_y"));
  FitResult y{400, 0.5, 2, 0, {200, 800}};
  EXPECT_EQ(fit_result_json(x, y)["f_y"], 400.0);
  EXPECT_EQ(fit_result_json(x, y)["objective_y"], 0.5);
}

TEST(Report, JsonFieldOrderAndNulls) {
  EvalReport r;
  r.f1 = 0.5;
  r.tp = 1;
  r.x_near = 0.25;
  const auto j = report_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"f1", "precision", "recall", "category_accuracy", "x_near", "x_far",
                                            "z_near", "z_far", "tp", "fp", "fn", "frames"}));
  EXPECT_TRUE(j["category_accuracy"].is_null());
  EXPECT_EQ(j["x_near"], 0.25);
}

TEST(Anchors, DumpRoundTrips) {
  const auto anchors = generate_anchors(AnchorConfig{});
  const auto back = parse_anchors(serialize_anchors(anchors));
  ASSERT_EQ(back.size(), anchors.size());
  for (std::size_t i = 0; i < anchors.size(); i += 97) {
    EXPECT_EQ(back[i].origin_x, anchors[i].origin_x);
    EXPECT_NEAR(back[i].pitch, anchors[i].pitch, 1e-15);
    EXPECT_NEAR(back[i].yaw, anchors[i].yaw, 1e-15);
    EXPECT_EQ(back[i].x, anchors[i].x);
    EXPECT_EQ(back[i].z, anchors[i].z);
  }
  EXPECT_THROW(parse_anchors("{}"), ParseError);
  EXPECT_THROW(parse_anchors(R"([{"origin_x": 0, "pitch_deg": 0, "yaw_deg": 0, "x": [1], "z": []}])"), ParseError);
}

TEST(Configs, EvalSettings) {
  const auto d = parse_eval_settings("{}");
  EXPECT_EQ(d.eval.distance_threshold, 1.5);
  EXPECT_EQ(d.ysteps, YSteps::defaults());
  const auto s = parse_eval_settings(R"({"distance_threshold": 1.0, "ysteps": {"y_min": 5, "y_max": 50, "count": 10}})");
  EXPECT_EQ(s.eval.distance_threshold, 1.0);
  EXPECT_EQ(s.ysteps.size(), 10u);
  EXPECT_EQ(parse_eval_settings(R"({"ysteps": [1, 2, 3]})").ysteps.size(), 3u);
  EXPECT_NE(expect_parse_error([] { parse_eval_settings(R"({"distance_treshold": 1})"); }).find("distance_treshold"),
            std::string::npos);
  EXPECT_THROW(parse_eval_settings(R"({"ysteps": [3, 2]})"), ParseError);
  EXPECT_THROW(parse_eval_settings(R"({"ysteps": {"count": 1}})"), ParseError);
  EXPECT_THROW(parse_eval_settings(R"({"prob_threshold": -1})"), ParseError);
  EXPECT_THROW(parse_eval_settings(R"({"match_ratio": "high"})"), ParseError);
}

TEST(Configs, AnchorConfig) {
  const auto c = parse_anchor_config(R"({"lateral_starts": 5, "pitches_deg": [0], "yaws_deg": [-10, 10]})");
  EXPECT_EQ(generate_anchors(c).size(), 10u);
  EXPECT_THROW(parse_anchor_config(R"({"lateral_start": 5})"), ParseError);
  EXPECT_THROW(parse_anchor_config(R"({"yaws_deg": []})"), ParseError);
  EXPECT_THROW(parse_anchor_config(R"({"pitches_deg": [95]})"), ParseError);
  EXPECT_THROW(parse_anchor_config(R"({"roi": {"x_min": 1, "x_max": 0}})"), ParseError);
}

TEST(Configs, SceneSpecRoundTrip) {
  SceneSpec s;
  s.seed = 77;
  s.terrain = {0.1, 0.02, -3e-4};
  s.trajectory.frame_count = 7;
  s.lanes.pop_back();
  const auto back = parse_scene_spec(serialize_scene_spec(s));
  EXPECT_EQ(serialize_scene_spec(back), serialize_scene_spec(s));
  EXPECT_EQ(back.lanes.size(), 3u);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_THROW(parse_scene_spec(R"({"terrain": {"a3": 1}})"), ParseError);
  EXPECT_THROW(parse_scene_spec(R"({"seed": -1})"), ParseError);
  EXPECT_THROW(parse_scene_spec(R"({"trajectory": {"frame_count": 0}})"), ParseError);
  EXPECT_THROW(parse_scene_spec(R"({"depth_range": {"min": 5, "max": 1}})"), ParseError);
}

TEST(Configs, PoseAndIntrinsics) {
  const RigidPose p(Eigen::AngleAxisd(0.3, Vec3::UnitY()).toRotationMatrix(), Vec3(0.1, -0.2, 1.0));
  const auto back = parse_pose(serialize_pose(p));
  EXPECT_TRUE(back.rotation().isApprox(p.rotation(), 1e-15));
  EXPECT_EQ(back.translation(), p.translation());
  EXPECT_THROW(parse_pose(R"({"rotation": [[2,0,0],[0,1,0],[0,0,1]], "translation": [0,0,0]})"), ParseError);
  EXPECT_THROW(parse_pose(R"({"rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0,0]})"), ParseError);

  const Intrinsics k{516, 510, 240, 160};
  EXPECT_EQ(parse_intrinsics(serialize_intrinsics(k)), k);
  EXPECT_EQ(parse_intrinsics(R"({"intrinsic": [[516, 0, 240], [0, 510, 160], [0, 0, 1]]})"), k);
  EXPECT_THROW(parse_intrinsics(R"({"fx": 0, "fy": 1, "cx": 0, "cy": 0})"), ParseError);
}

TEST(Raster, PpmRoundTrip) {
  Image img(7, 5, 3);
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = static_cast<float>(i % 256) / 255.0f;
  const std::string bytes = encode_ppm(img);
  EXPECT_EQ(bytes.substr(0, 11), "P6\n7 5\n255\n");
  EXPECT_TRUE(decode_ppm(bytes) == img);
  std::string commented = "P6\n# made by hand\n7 5\n255\n" + bytes.substr(11);
  EXPECT_TRUE(decode_ppm(commented) == img);
  EXPECT_THROW(decode_ppm("P5\n1 1\n255\n."), ParseError);
  EXPECT_THROW(decode_ppm(bytes.substr(0, bytes.size() - 1)), ParseError);
  EXPECT_THROW(decode_ppm("P6\n1 1\n65535\n......"), ParseError);
}

TEST(Raster, DepthRoundTrip) {
  DepthMap d(4, 3, 0.0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) d.at(r, c) = 0.5 + r * 4 + c;
  d.at(0, 0) = std::numeric_limits<double>::infinity();
  d.at(2, 3) = 500.0;
  const auto back = decode_depth(encode_depth(d));
  EXPECT_EQ(back.width(), 4);
  EXPECT_EQ(back.at(0, 0), 0.0);
  EXPECT_EQ(back.at(2, 3), 0.0);
  EXPECT_EQ(back.at(1, 2), 6.5);
  EXPECT_FALSE(back.valid(0, 0));
  EXPECT_THROW(decode_depth("DPTX...."), ParseError);
  EXPECT_THROW(decode_depth(encode_depth(d) + "x"), ParseError);
}
