#include <gtest/gtest.h>

#include <cmath>

#include "lane3d/synthetic.hpp"

using namespace lane3d;

namespace {

SceneSpec flat_scene(int frames = 2) {
  SceneSpec s;
  s.seed = 11;
  s.trajectory.frame_count = frames;
  return s;
}

SceneSpec hilly_scene(int frames = 2) {
  SceneSpec s = flat_scene(frames);
  s.terrain = {0.0, 0.02, -3e-4};
  return s;
}

// Largest per-pixel channel difference inside the 3x3 block around (row, col).
double local_difference(const Image& a, const Image& b, int row, int col) {
  double best = 0.0;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      const int r = row + dr, c = col + dc;
      if (r < 0 || c < 0 || r >= a.height() || c >= a.width()) continue;
      for (int ch = 0; ch < 3; ++ch) best = std::max(best, std::abs(double(a.at(r, c, ch)) - b.at(r, c, ch)));
    }
  return best;
}

}  // namespace

TEST(Terrain, IntersectionLandsOnSurface) {
  const TerrainSpec t{0.3, 0.02, -3e-4};
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Vec3 o(rng.uniform(-3, 3), rng.uniform(-5, 5), t.height(0) + rng.uniform(1, 3));
    const Vec3 d = Vec3(rng.uniform(-0.3, 0.3), 1.0, rng.uniform(-0.3, -0.02)).normalized();
    const auto hit = detail::intersect_terrain(t, o, d);
    if (!hit) continue;
    const Vec3 p = o + *hit * d;
    EXPECT_GT(*hit, 0.0);
    EXPECT_NEAR(p.z(), t.height(p.y()), 1e-8);
  }
  EXPECT_FALSE(detail::intersect_terrain(TerrainSpec{}, Vec3(0, 0, 1), Vec3(0, 1, 0.1).normalized()));
}

TEST(Synthetic, FlatSceneBackprojectsToGround) {
  const auto frames = render_scene(flat_scene(1));
  const auto cloud = build_point_cloud(frames[0].image, frames[0].depth, frames[0].cam);
  ASSERT_GT(cloud.size(), 1000u);
  for (const auto& p : cloud.rows) ASSERT_NEAR(p.z, 0.0, 1e-6);
}

TEST(Synthetic, DepthMatchesTerrainInEveryFrame) {
  const auto frames = render_scene(hilly_scene(4));
  const TerrainSpec terrain = hilly_scene().terrain;
  for (const auto& f : frames) {
    const auto cloud = build_point_cloud(f.image, f.depth, f.cam);
    ASSERT_GT(cloud.size(), 1000u);
    for (std::size_t i = 0; i < cloud.size(); i += 37) {
      const auto& p = cloud.rows[i];
      const Vec3 w = f.world_from_ego * Vec3(p.x, p.y, p.z);
      ASSERT_NEAR(w.z(), terrain.height(w.y()), 1e-6);
    }
  }
}

TEST(Synthetic, HillHeightsInGroundTruth) {
  SceneSpec s = flat_scene(1);
  s.terrain = {0.0, 0.0, 0.002};
  s.roi.y_min = 10;
  s.roi.y_max = 90;
  s.ystep_count = 5;
  const auto frames = render_scene(s);
  const auto& lanes = frames[0].gt_lanes;
  ASSERT_EQ(lanes.size(), 4u);
  for (const auto& lane : lanes) {
    ASSERT_EQ(lane.size(), 5u);
    EXPECT_NEAR(lane.z[2], 5.0, 1e-9);
    EXPECT_NEAR(lane.z[0], 0.2, 1e-9);
    EXPECT_NEAR(lane.z[4], 16.2, 1e-9);
  }
}

TEST(Synthetic, GroundTruthGeometryOnFlatStraightRoad) {
  SceneSpec s = flat_scene(1);
  for (auto& l : s.lanes) l.curvature = 0.0;
  const auto frames = render_scene(s);
  const YSteps ys = s.ysteps();
  for (std::size_t i = 0; i < s.lanes.size(); ++i) {
    const auto& lane = frames[0].gt_lanes[i];
    EXPECT_EQ(lane.category, s.lanes[i].category);
    for (std::size_t k = 0; k < ys.size(); ++k) {
      EXPECT_NEAR(lane.x[k], s.lanes[i].offset, 1e-9);
      EXPECT_NEAR(lane.z[k], 0.0, 1e-9);
    }
    // Near the car the ground is below the field of view.
    EXPECT_EQ(lane.visibility[0], 0.0);
    EXPECT_EQ(lane.visibility[10], 1.0);
  }
}

TEST(Synthetic, VisibleLanePointsProjectOntoPaint) {
  for (const SceneSpec& s : {flat_scene(3), hilly_scene(3)}) {
    SceneSpec bare = s;
    bare.lanes.clear();
    const auto painted = render_scene(s), plain = render_scene(bare);
    const YSteps ys = s.ysteps();
    const int w = s.camera.width, h = s.camera.image_height;
    int checked = 0, skipped = 0;
    for (std::size_t f = 0; f < painted.size(); ++f) {
      for (const auto& lane : painted[f].gt_lanes) {
        for (std::size_t k = 1; k + 1 < ys.size(); ++k) {
          if (lane.visibility[k] < 0.5) continue;
          const auto proj = project_to_image(Vec3(lane.x[k], ys[k], lane.z[k]), painted[f].cam);
          ASSERT_TRUE(proj && proj->inside_image());
          // Far away the lane runs almost along the image rows, so follow the
          // gt curve (densified between neighbouring y-steps) to where it
          // crosses the nearest pixel row and look for paint there.
          const double row_c = std::round(proj->v * h);
          double best_dv = 1e9, col_c = proj->u * w, depth = proj->depth;
          for (int side : {-1, 1}) {
            const std::size_t n = k + static_cast<std::size_t>(side + 1) / 2 - (side < 0 ? 1 : 0);
            const std::size_t a = side < 0 ? n : k, b = side < 0 ? k : n;
            for (int i = 0; i <= 400; ++i) {
              const double t = i / 400.0;
              const Vec3 p((1 - t) * lane.x[a] + t * lane.x[b], (1 - t) * ys[a] + t * ys[b],
                           (1 - t) * lane.z[a] + t * lane.z[b]);
              const auto q = project_to_image(p, painted[f].cam);
              if (!q) continue;
              const double dv = std::abs(q->v * h - row_c);
              if (dv < best_dv) {
                best_dv = dv;
                col_c = q->u * w;
                depth = q->depth;
              }
            }
          }
          const int row = std::clamp(static_cast<int>(row_c), 0, h - 1);
          const int col = std::clamp(static_cast<int>(std::lround(col_c)), 0, w - 1);
          // Points squeezed between rows that see sky or far ground are not
          // resolvable by any pixel.
          if (best_dv > 0.05 || !painted[f].depth.valid(row, col) ||
              std::abs(painted[f].depth.at(row, col) - depth) > 0.1 * depth) {
            ++skipped;
            continue;
          }
          EXPECT_GT(local_difference(painted[f].image, plain[f].image, row, col), 0.05)
              << "frame " << f << " y " << ys[k];
          ++checked;
        }
      }
    }
    EXPECT_GT(checked, 100);
    EXPECT_LT(skipped, checked / 5);
  }
}

TEST(Synthetic, CrestHidesFarLane) {
  SceneSpec s = flat_scene(1);
  s.terrain = {0.0, 0.1, -2e-3};  // peaks at y = 25
  const auto frames = render_scene(s);
  const YSteps ys = s.ysteps();
  bool hidden_beyond_crest = false;
  for (std::size_t k = 0; k < ys.size(); ++k)
    if (ys[k] > 40 && frames[0].gt_lanes[1].visibility[k] == 0.0) hidden_beyond_crest = true;
  EXPECT_TRUE(hidden_beyond_crest);
}

TEST(Synthetic, ConsecutiveFramesReconstructEachOther) {
  for (const SceneSpec& s : {flat_scene(2), hilly_scene(2)}) {
    const auto frames = render_scene(s);
    const auto recon = synthesize_view(frames[0].image, frames[1].depth, frames[1].pose, frames[1].cam);
    EXPECT_GT(recon.valid.count(), 10000u);
    EXPECT_LT(photometric_error(frames[1].image, recon), 0.02);
  }
}

TEST(Synthetic, RelativePoseOfStraightDrive) {
  SceneSpec s = flat_scene(3);
  s.trajectory.step = 1.5;
  const auto frames = render_scene(s);
  EXPECT_TRUE(frames[0].pose.rotation().isIdentity(1e-12));
  EXPECT_TRUE(frames[0].pose.translation().isZero(1e-12));
  for (int f = 1; f < 3; ++f) {
    EXPECT_TRUE(frames[f].pose.rotation().isIdentity(1e-9));
    EXPECT_NEAR(frames[f].pose.translation().norm(), 1.5, 1e-9);
    // Moving forward: the current camera sits ahead of the previous one.
    EXPECT_GT(frames[f].pose.translation().z(), 1.4);
  }
}

TEST(Synthetic, TurningTrajectoryHeading) {
  SceneSpec s = flat_scene(30);
  s.trajectory.yaw_amplitude = 0.02;
  const auto poses = trajectory_poses(s);
  double heading = 0.0;
  for (int k = 1; k < 30; ++k) {
    heading += s.trajectory.yaw_delta(k);
    const Mat3 r = poses[static_cast<std::size_t>(k)].linear();
    EXPECT_NEAR(std::atan2(r(1, 0), r(0, 0)), heading, 1e-12);
    const Vec3 d = poses[static_cast<std::size_t>(k)].translation() - poses[static_cast<std::size_t>(k - 1)].translation();
    EXPECT_NEAR(d.head<2>().norm(), 1.0, 1e-12);
  }
}

TEST(Synthetic, DeterministicAcrossRunsAndThreads) {
  const SceneSpec s = hilly_scene(4);
  const auto a = render_scene(s, 1);
  const auto b = render_scene(s, 1);
  const auto c = render_scene(s, 4);
  for (std::size_t f = 0; f < a.size(); ++f) {
    EXPECT_TRUE(a[f].image == b[f].image);
    EXPECT_TRUE(a[f].image == c[f].image);
    EXPECT_EQ(a[f].depth.values(), c[f].depth.values());
    EXPECT_EQ(a[f].gt_lanes, c[f].gt_lanes);
  }
  SceneSpec other = s;
  other.seed = 12;
  EXPECT_FALSE(render_scene(other)[0].image == a[0].image);
}

TEST(Synthetic, SkyHasNoDepth) {
  const auto frames = render_scene(flat_scene(1));
  EXPECT_FALSE(frames[0].depth.valid(0, 0));
  EXPECT_NEAR(frames[0].image.at(0, 0, 2), 0.90, 1e-6);
  EXPECT_TRUE(frames[0].depth.valid(319, 240));
}

TEST(Synthetic, InvalidSpecRejected) {
  SceneSpec s = flat_scene();
  s.trajectory.frame_count = 0;
  EXPECT_THROW(render_scene(s), InvalidArgument);
  s = flat_scene();
  s.camera.height = 0;
  EXPECT_THROW(render_scene(s), InvalidArgument);
  s = flat_scene();
  s.ystep_count = 1;
  EXPECT_THROW(render_scene(s), InvalidArgument);
}

TEST(FeatureFields, GridLookupReproducesField) {
  const auto fields = make_feature_fields(flat_scene(), 3, 2);
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    const auto fv = bilinear_sample(fields.fv, a, b);
    const auto bev = bilinear_sample(fields.bev, a, b);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(fv.values[c], fields.fv_fields[c](a, b), 1e-9);
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(bev.values[c], fields.bev_fields[c](a, b), 1e-9);
  }
  EXPECT_EQ(fields.fv.domain(), GridDomain::ImageNormalized);
  EXPECT_EQ(fields.bev.domain(), GridDomain::GroundNormalized);
  EXPECT_THROW(make_feature_fields(flat_scene(), 0, 2), InvalidArgument);
}

TEST(FeatureFields, SeedControlsCoefficients) {
  const auto a = make_feature_fields(flat_scene(), 2, 2);
  const auto b = make_feature_fields(flat_scene(), 2, 2);
  EXPECT_EQ(a.fv.data(), b.fv.data());
  SceneSpec other = flat_scene();
  other.seed = 99;
  EXPECT_NE(make_feature_fields(other, 2, 2).fv.data(), a.fv.data());
}
