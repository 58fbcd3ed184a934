// lane3d command-line tool: evaluate, fit-intrinsics, synth, warp, anchors.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "lane3d/lane3d.hpp"

namespace fs = std::filesystem;
using namespace lane3d;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kParse = 2, kEmptyOverlap = 3, kUninformative = 4 };

enum class Level { Quiet, Error, Warn, Info, Debug };

Level log_level() {
  static const Level level = [] {
    const char* env = std::getenv("LANE3D_LOG");
    const std::string v = env ? env : "warn";
    if (v == "quiet") return Level::Quiet;
    if (v == "error") return Level::Error;
    if (v == "info") return Level::Info;
    if (v == "debug") return Level::Debug;
    return Level::Warn;
  }();
  return level;
}

void log(Level level, const std::string& msg) {
  static const char* names[] = {"", "error", "warn", "info", "debug"};
  if (level <= log_level()) std::cerr << "lane3d: " << names[static_cast<int>(level)] << ": " << msg << '\n';
}

// Parse failures carry the file they came from.
[[noreturn]] void fail_parse(const std::string& file, const std::exception& e) {
  throw ParseError(file + ": " + e.what());
}

template <typename F>
auto parse_file(const std::string& path, F&& parse) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  try {
    return parse(text);
  } catch (const ParseError& e) {
    fail_parse(path, e);
  } catch (const InvalidArgument& e) {
    fail_parse(path, e);
  }
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string frame_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string gt_dir, pred_file, config_file, out;
  unsigned threads = 0;
  CLI::Option *distance = nullptr, *ratio = nullptr, *prob = nullptr, *penalty = nullptr, *boundary = nullptr;
  double distance_v = 1.5, ratio_v = 0.75, prob_v = 0.5, penalty_v = 1.5, boundary_v = 40.0;
};

int run_evaluate(const EvaluateArgs& a) {
  EvalSettings settings;
  if (!a.config_file.empty()) settings = parse_file(a.config_file, [](const std::string& t) { return parse_eval_settings(t); });
  if (a.distance->count()) settings.eval.distance_threshold = a.distance_v;
  if (a.ratio->count()) settings.eval.match_ratio = a.ratio_v;
  if (a.prob->count()) settings.eval.prob_threshold = a.prob_v;
  if (a.penalty->count()) settings.eval.visibility_penalty = a.penalty_v;
  if (a.boundary->count()) settings.eval.near_far_boundary = a.boundary_v;
  try {
    settings.eval.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("flags: ") + e.what());
  }

  if (!fs::is_directory(a.gt_dir)) throw ParseError(a.gt_dir + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.gt_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::map<std::string, std::vector<Lane3D>> gts;
  for (const auto& f : files) {
    auto ann = parse_file(f.string(), [&](const std::string& t) { return parse_annotation(t, settings.ysteps); });
    if (gts.count(ann.frame_id)) throw ParseError(f.string() + ": duplicate frame_id " + ann.frame_id);
    gts.emplace(ann.frame_id, std::move(ann.lanes));
  }
  log(Level::Info, "loaded " + std::to_string(gts.size()) + " annotated frames");

  const auto pred_frames = parse_file(a.pred_file, [&](const std::string& t) {
    return parse_predictions(t, settings.ysteps, settings.category_count);
  });
  std::map<std::string, const FramePredictions*> preds;
  for (const auto& p : pred_frames) {
    if (!preds.emplace(p.frame_id, &p).second)
      throw ParseError(a.pred_file + ": duplicate frame_id " + p.frame_id);
    if (!gts.count(p.frame_id)) log(Level::Warn, "prediction for unknown frame " + p.frame_id + " ignored");
  }

  std::vector<FrameLanes> frames;
  std::size_t overlap = 0;
  for (auto& [id, lanes] : gts) {
    FrameLanes fl{lanes, {}};
    if (auto it = preds.find(id); it != preds.end()) {
      fl.preds = it->second->lanes;
      ++overlap;
    } else {
      log(Level::Warn, "no predictions for frame " + id + "; its lanes count as misses");
    }
    frames.push_back(std::move(fl));
  }
  if (overlap == 0) {
    log(Level::Error, "no frame id appears in both " + a.gt_dir + " and " + a.pred_file);
    return kEmptyOverlap;
  }

  const EvalReport r = compute_report(frames, settings.ysteps, settings.eval, resolve_threads(a.threads));
  write_file(a.out, report_json(r).dump(2) + "\n");
  std::printf("f1=%.6f precision=%.6f recall=%.6f tp=%zu fp=%zu fn=%zu frames=%zu\n", r.f1, r.precision, r.recall,
              r.tp, r.fp, r.fn, r.frames);
  return kOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string obs, out;
  double rz_min = 0.03;
  double width = 480;
  double height = 0;
  CLI::Option *rx_min_opt = nullptr, *lo_opt = nullptr, *hi_opt = nullptr;
  double rx_min = 0.0, lo = 0.0, hi = 0.0;
  unsigned threads = 0;
};

int run_fit(const FitArgs& a) {
  auto segments = parse_file(a.obs, [](const std::string& t) { return parse_observations(t); });
  std::optional<SearchInterval> search;
  if (a.lo_opt->count() || a.hi_opt->count()) {
    if (!(a.lo_opt->count() && a.hi_opt->count())) throw ParseError("--search-lo and --search-hi go together");
    search = SearchInterval{a.lo, a.hi};
  }
  const double rx_min = a.rx_min_opt->count() ? a.rx_min : a.rz_min;

  std::vector<std::pair<std::string, SegmentObservations*>> order;
  for (auto& [id, obs] : segments) {
    obs.width = a.width;
    if (a.height > 0) obs.height = a.height;
    order.emplace_back(id, &obs);
  }

  struct Slot {
    std::optional<OrderedJson> json;
    std::string error;
    bool uninformative = false;
  };
  std::vector<Slot> slots(order.size());
  parallel_for(order.size(), resolve_threads(a.threads), [&](std::size_t i) {
    const auto& obs = *order[i].second;
    try {
      const auto x = fit_segment_focal(obs, a.rz_min, search);
      const auto y = fit_segment_focal_y(obs, rx_min, search);
      slots[i].json = fit_result_json(x, y);
    } catch (const UninformativeSegment& e) {
      slots[i].uninformative = true;
      slots[i].error = e.what();
    } catch (const InvalidArgument& e) {
      slots[i].error = e.what();
    }
  });

  OrderedJson out = OrderedJson::object();
  bool uninformative = false, invalid = false;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (slots[i].json) {
      out[order[i].first] = *slots[i].json;
      continue;
    }
    log(Level::Error, "segment " + order[i].first + ": " + slots[i].error);
    (slots[i].uninformative ? uninformative : invalid) = true;
  }
  write_file(a.out, out.dump(2) + "\n");
  log(Level::Info, "fitted " + std::to_string(out.size()) + " of " + std::to_string(order.size()) + " segments");
  if (invalid) return kParse;
  return uninformative ? kUninformative : kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
  CLI::Option* seed_opt = nullptr;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

int run_synth(const SynthArgs& a) {
  SceneSpec spec;
  if (!a.spec.empty()) spec = parse_file(a.spec, [](const std::string& t) { return parse_scene_spec(t); });
  if (a.seed_opt->count()) spec.seed = a.seed;

  const auto frames = render_scene(spec, resolve_threads(a.threads));
  const YSteps ys = spec.ysteps();
  const fs::path root(a.out);
  for (const char* sub : {"frames", "depth", "annotations", "poses"}) fs::create_directories(root / sub);

  write_file((root / "scene.json").string(), serialize_scene_spec(spec));
  write_file((root / "intrinsics.json").string(), serialize_intrinsics(spec.camera.intrinsics));
  const std::string prefix = "s" + std::to_string(spec.seed) + "_";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const std::string name = frame_name(i);
    write_file((root / "frames" / (name + ".ppm")).string(), encode_ppm(f.image));
    write_file((root / "depth" / (name + ".depth")).string(), encode_depth(f.depth));
    write_file((root / "poses" / (name + ".json")).string(), serialize_pose(f.pose));
    FrameAnnotation ann;
    ann.frame_id = prefix + name;
    ann.intrinsic = f.cam.K();
    ann.extrinsic = f.cam.ego_to_camera().matrix();
    ann.image_width = f.cam.width();
    ann.image_height = f.cam.height();
    ann.lanes = f.gt_lanes;
    write_file((root / "annotations" / (name + ".json")).string(), serialize_annotation(ann, ys));
  }
  const auto obs = simulate_learned_intrinsics(spec, spec.camera.intrinsics.fx, spec.seed);
  write_file((root / "observations.jsonl").string(), serialize_observations(prefix + "segment", obs));
  log(Level::Info, "wrote " + std::to_string(frames.size()) + " frames to " + a.out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct WarpArgs {
  std::string src, depth, pose, intrinsics, out;
  double depth_min = 0.1, depth_max = 80.0;
  std::string mask_out;
  unsigned threads = 0;
};

int run_warp(const WarpArgs& a) {
  const Image src = parse_file(a.src, [](const std::string& t) { return decode_ppm(t); });
  const DepthRange range{a.depth_min, a.depth_max};
  const DepthMap depth = parse_file(a.depth, [&](const std::string& t) { return decode_depth(t, range); });
  const RigidPose pose = parse_file(a.pose, [](const std::string& t) { return parse_pose(t); });
  const Intrinsics k = parse_file(a.intrinsics, [](const std::string& t) { return parse_intrinsics(t); });
  if (depth.width() != src.width() || depth.height() != src.height())
    throw ParseError(a.depth + ": size differs from " + a.src);
  // Only K matters for the warp; the mount transform is irrelevant.
  const CameraModel cam(k, src.width(), src.height(), make_extrinsics(1.0, 0.0));
  const auto result = synthesize_view(src, depth, pose, cam, resolve_threads(a.threads));
  write_file(a.out, encode_ppm(result.image));
  if (!a.mask_out.empty()) {
    Image m(src.width(), src.height(), 3);
    for (int r = 0; r < m.height(); ++r)
      for (int c = 0; c < m.width(); ++c)
        for (int ch = 0; ch < 3; ++ch) m.at(r, c, ch) = result.valid.at(r, c) ? 1.0f : 0.0f;
    write_file(a.mask_out, encode_ppm(m));
  }
  log(Level::Info, std::to_string(result.valid.count()) + " valid pixels");
  return kOk;
}

// ---------------------------------------------------------------------------

struct AnchorArgs {
  std::string config, out;
};

int run_anchors(const AnchorArgs& a) {
  AnchorConfig cfg;
  if (!a.config.empty()) cfg = parse_file(a.config, [](const std::string& t) { return parse_anchor_config(t); });
  const auto anchors = generate_anchors(cfg);
  write_file(a.out, serialize_anchors(anchors));
  std::printf("%zu anchors\n", anchors.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D lane detection toolkit: evaluation, focal fitting, synthetic scenes, view warping, anchors"};
  app.require_subcommand(1);
  app.footer("Environment: LANE3D_LOG=quiet|error|warn|info|debug (default warn); logs go to stderr.\n"
             "Exit codes: 0 ok, 1 other failure, 2 parse error, 3 no overlapping frame ids, 4 uninformative segment.");
  int code = kOk;

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted lanes against annotated frames");
  evaluate->add_option("--gt", ev.gt_dir, "Directory of annotation JSON files")->required();
  evaluate->add_option("--pred", ev.pred_file, "Predictions, JSON Lines, one frame per line")->required();
  evaluate->add_option("--config", ev.config_file, "Evaluation settings JSON (flags override it)");
  evaluate->add_option("--out", ev.out, "Report JSON path")->required();
  ev.distance = evaluate->add_option("--distance-threshold", ev.distance_v, "Per-point match distance, m")->capture_default_str();
  ev.ratio = evaluate->add_option("--match-ratio", ev.ratio_v, "Fraction of visible gt points that must match")->capture_default_str();
  ev.prob = evaluate->add_option("--prob-threshold", ev.prob_v, "Minimum lane confidence kept")->capture_default_str();
  ev.penalty = evaluate->add_option("--visibility-penalty", ev.penalty_v, "Per-point cost of a visibility mismatch, m")->capture_default_str();
  ev.boundary = evaluate->add_option("--near-far-boundary", ev.boundary_v, "y split of the error metrics, m")->capture_default_str();
  evaluate->add_option("--threads", ev.threads, "Worker threads, 0 = all cores")->capture_default_str();
  evaluate->callback([&] { code = run_evaluate(ev); });

  FitArgs fa;
  auto* fit = app.add_subcommand("fit-intrinsics", "Fit one focal length per segment from learned intrinsics");
  fit->add_option("--obs", fa.obs, "Observations, JSON Lines {segment_id, r_z, f_x, r_x?, f_y?}")->required();
  fit->add_option("--rz-min", fa.rz_min, "Drop frames whose |r_z| is below this, rad")->capture_default_str();
  fit->add_option("--width", fa.width, "Image width, px")->capture_default_str()->check(CLI::PositiveNumber);
  fit->add_option("--height", fa.height, "Image height, px (needed for f_y observations)")->check(CLI::PositiveNumber);
  fa.rx_min_opt = fit->add_option("--rx-min", fa.rx_min, "Threshold for the vertical path, rad (default: --rz-min)");
  fa.lo_opt = fit->add_option("--search-lo", fa.lo, "Search interval start, px (default 0.5 x median f_x)");
  fa.hi_opt = fit->add_option("--search-hi", fa.hi, "Search interval end, px (default 2 x median f_x)");
  fit->add_option("--out", fa.out, "Result JSON path")->required();
  fit->add_option("--threads", fa.threads, "Worker threads, 0 = all cores")->capture_default_str();
  fit->callback([&] { code = run_fit(fa); });

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Render a synthetic road sequence with exact ground truth");
  synth->add_option("--spec", sa.spec, "Scene spec JSON (built-in scene when omitted)");
  sa.seed_opt = synth->add_option("--seed", sa.seed, "Seed, overrides the scene file (default 0)");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--threads", sa.threads, "Worker threads, 0 = all cores")->capture_default_str();
  synth->callback([&] { code = run_synth(sa); });

  WarpArgs wa;
  auto* warp = app.add_subcommand("warp", "Reconstruct a target view from a source image, target depth and pose");
  warp->add_option("--src", wa.src, "Source image, PPM")->required();
  warp->add_option("--depth", wa.depth, "Target depth raster (DPTH)")->required();
  warp->add_option("--pose", wa.pose, "Target-to-source pose JSON {rotation, translation}")->required();
  warp->add_option("--intrinsics", wa.intrinsics, "Intrinsics JSON {fx, fy, cx, cy}")->required();
  warp->add_option("--out", wa.out, "Output image, PPM")->required();
  warp->add_option("--mask-out", wa.mask_out, "Optional validity mask, PPM");
  warp->add_option("--depth-min", wa.depth_min, "Smallest valid depth, m")->capture_default_str();
  warp->add_option("--depth-max", wa.depth_max, "Largest valid depth, m")->capture_default_str();
  warp->add_option("--threads", wa.threads, "Worker threads, 0 = all cores")->capture_default_str();
  warp->callback([&] { code = run_warp(wa); });

  AnchorArgs aa;
  auto* anchors = app.add_subcommand("anchors", "Dump the anchor set");
  anchors->add_option("--config", aa.config,
                      "Anchor config JSON (default: 45 starts, pitches 0,+-1,+-2 deg, "
                      "yaws 0,+-1,+-3,+-5,+-7,+-10,+-15,+-20 deg, ROI x [-20,20] y [0.1,80], 20 y-steps)");
  anchors->add_option("--out", aa.out, "Anchor dump JSON path")->required();
  anchors->callback([&] { code = run_anchors(aa); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kParse;
  } catch (const ParseError& e) {
    log(Level::Error, e.what());
    return kParse;
  } catch (const std::exception& e) {
    log(Level::Error, e.what());
    return kFailure;
  }
  return code;
}
