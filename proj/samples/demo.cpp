// End-to-end tour: render a hilly sequence, reconstruct one view from its
// neighbour, score noisy lane predictions and fit the focal length.

#include <cstdio>

#include "lane3d/lane3d.hpp"

using namespace lane3d;

int main() {
  SceneSpec scene;
  scene.seed = 1;
  scene.terrain = {0.0, 0.02, -3e-4};
  scene.trajectory.frame_count = 8;
  scene.trajectory.yaw_amplitude = 0.01;

  const auto frames = render_scene(scene, 4);
  std::printf("rendered %zu frames of %dx%d\n", frames.size(), scene.camera.width, scene.camera.image_height);

  const auto recon = synthesize_view(frames[0].image, frames[1].depth, frames[1].pose, frames[1].cam);
  std::printf("frame 1 from frame 0: photometric error %.4f over %zu pixels\n",
              photometric_error(frames[1].image, recon), recon.valid.count());

  const AnchorConfig anchor_cfg;
  const auto anchors = generate_anchors(anchor_cfg);
  const auto fields = make_feature_fields(scene, 8, 8);
  const auto feats = sample_anchor_features(anchors, anchor_cfg.ysteps(), frames[0].cam, anchor_cfg.roi, fields.fv,
                                            fields.bev, 4);
  std::printf("%zu anchors, %zu feature values per anchor\n", anchors.size(),
              feats.points * static_cast<std::size_t>(feats.fv_channels + feats.bev_channels));

  // Predictions: ground truth with Gaussian lateral noise and a dropped lane.
  Rng rng(7);
  std::vector<FrameLanes> eval_frames;
  for (const auto& f : frames) {
    auto preds = lanes_as_predictions(f.gt_lanes);
    for (auto& p : preds)
      for (double& x : p.x) x += rng.normal(0.0, 0.2);
    preds.pop_back();
    eval_frames.push_back({f.gt_lanes, preds});
  }
  const auto report = compute_report(eval_frames, scene.ysteps());
  std::printf("%s\n", report_json(report).dump().c_str());

  SceneSpec drive = scene;
  drive.trajectory.frame_count = 200;
  drive.trajectory.yaw_amplitude = 0.25;
  drive.trajectory.yaw_jitter = 0.01;
  const auto obs = simulate_learned_intrinsics(drive, scene.camera.intrinsics.fx, 3);
  for (double rz_min : {0.01, 0.02, 0.03}) {
    const auto fit = fit_segment_focal(obs, rz_min);
    std::printf("rz_min %.2f: focal %.1f from %zu frames (true %.0f)\n", rz_min, fit.focal, fit.used_count,
                scene.camera.intrinsics.fx);
  }
  return 0;
}
