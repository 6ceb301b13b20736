#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

#include "rplift/error.hpp"
#include "rplift/io.hpp"
#include "rplift/refine.hpp"
#include "rplift/voting.hpp"
#include "rplift_cli/cli.hpp"

namespace rplift::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* format, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, a);
  return buf;
}

std::vector<std::string> frame_stems(const fs::path& dir, const std::string& ext) {
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

bool require_dir(const fs::path& dir, const char* flag, std::ostream& err) {
  if (fs::is_directory(dir)) return true;
  err << "error: " << flag << " directory '" << dir.string() << "' does not exist\n";
  return false;
}

// Runs body(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) body(i);
  };
  const int threads = std::clamp(jobs, 1, std::max(n, 1));
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
}

std::string describe(const std::exception& e, const fs::path& file) {
  return file.filename().string() + ": " + e.what();
}

std::vector<KittiLabel> read_labels(const fs::path& file) {
  try {
    return parse_kitti_label_file(read_text_file(file));
  } catch (const Error& e) {
    throw std::runtime_error(file.string() + ": " + e.what());
  }
}

std::string overlay_text(const std::string& id, const std::vector<LiftedInstance>& objects, const CameraModel& cam) {
  std::ostringstream os;
  os << "# frame " << id << "\n";
  for (const LiftedInstance& obj : objects) {
    std::array<Pixel, 8> px{};
    try {
      const auto corners = box_corners_3d(obj.box);
      for (int j = 0; j < 8; ++j) px[j] = cam.project(corners[j]);
    } catch (const Error&) {
      os << "# box " << obj.id << " not projectable\n";
      continue;
    }
    os << "box " << obj.id << " " << fmt("%.4f", obj.confidence) << "\n";
    for (int j = 0; j < 8; ++j) {
      for (int bit : {1, 2, 4}) {
        if (j & bit) continue;
        const Pixel& a = px[j];
        const Pixel& b = px[j | bit];
        os << "line " << fmt("%.2f", a.u) << " " << fmt("%.2f", a.v) << " " << fmt("%.2f", b.u) << " "
           << fmt("%.2f", b.v) << "\n";
      }
    }
  }
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string frame_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

CameraModel preset_camera(CameraPreset preset) {
  switch (preset) {
    case CameraPreset::Narrow:
      return pinhole_from_hfov(48.0 * kPi / 180.0, 1024, 512);
    case CameraPreset::Equirect:
      return CameraModel(EquirectangularCamera{1024, 512, kPi, kPi / 2.0, 0.0, 0.0});
    case CameraPreset::Kitti:
    default:
      return CameraModel(PinholeIntrinsics{721.5377, 721.5377, 609.5593, 172.854, 1242, 375});
  }
}

int cmd_lift(const LiftConfig& cfg, std::ostream&, std::ostream& err) {
  if (!require_dir(cfg.masks, "--masks", err) || !require_dir(cfg.maps, "--maps", err) ||
      !require_dir(cfg.calib, "--calib", err)) {
    return kConfigError;
  }
  const std::vector<std::string> frames = frame_stems(cfg.masks, ".png");
  fs::create_directories(cfg.out);
  if (frames.empty()) {
    err << "warning: no masks found in " << cfg.masks.string() << "\n";
    return kOk;
  }

  struct Outcome {
    std::vector<std::string> log;
    bool failed = false;
    std::size_t objects = 0;
  };
  std::vector<Outcome> outcomes(frames.size());

  parallel_for(static_cast<int>(frames.size()), cfg.jobs, [&](int i) {
    const std::string& id = frames[i];
    Outcome& o = outcomes[i];
    fs::path current = cfg.masks / (id + ".png");
    try {
      const InstanceMask mask = decode_mask_png(read_binary_file(current));
      current = cfg.maps / (id + ".blam");
      const AttributeMaps maps = decode_attribute_maps(read_binary_file(current));
      if (maps.width() != mask.width || maps.height() != mask.height) {
        throw Error(ErrorCode::SizeMismatch, "mask is " + std::to_string(mask.width) + "x" +
                                                 std::to_string(mask.height) + " but maps are " +
                                                 std::to_string(maps.width()) + "x" + std::to_string(maps.height()));
      }
      if (maps.layout() != cfg.layout) {
        throw Error(ErrorCode::InvalidArgument, "maps hold " + std::to_string(num_reference_points(maps.layout())) +
                                                    " reference points, --layout asks for " +
                                                    std::to_string(num_reference_points(cfg.layout)));
      }
      current = cfg.calib / (id + ".txt");
      const CameraModel cam = parse_camera(read_text_file(current), mask.width, mask.height);

      AggregateOptions agg;
      agg.trim_fraction = cfg.trim;
      LiftOptions lift;
      lift.refine = !cfg.no_lm;
      const LiftResult result = lift_instances(mask, maps, cam, agg, lift, 1);

      std::vector<KittiLabel> labels;
      for (const LiftedInstance& obj : result.objects) labels.push_back(detection_label(obj.box, obj.confidence, cam));
      current = cfg.out / (id + ".txt");
      write_file_atomic(current, write_kitti_label_file(labels));
      if (cfg.overlay) {
        current = cfg.out / (id + ".overlay");
        write_file_atomic(current, overlay_text(id, result.objects, cam));
      }
      o.objects = result.objects.size();
      for (const InstanceFailure& f : result.failures) {
        o.log.push_back("frame " + id + ": instance " + std::to_string(f.id) + " skipped: " + f.message);
        o.failed = true;
      }
    } catch (const std::exception& e) {
      o.log.push_back("frame " + id + ": " + describe(e, current));
      o.failed = true;
    }
  });

  std::size_t failed = 0, objects = 0;
  for (const Outcome& o : outcomes) {
    for (const std::string& line : o.log) err << "error: " << line << "\n";
    failed += o.failed ? 1 : 0;
    objects += o.objects;
  }
  err << "lifted " << objects << " objects in " << frames.size() << " frames, " << failed << " with errors\n";
  return failed > 0 ? kPartialFailure : kOk;
}

int cmd_eval(const EvalCommandConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!require_dir(cfg.gt, "--gt", err) || !require_dir(cfg.det, "--det", err)) return kConfigError;
  validate(cfg.eval);

  std::map<std::string, std::vector<GtObject>> gts;
  for (const std::string& id : frame_stems(cfg.gt, ".txt")) {
    auto& frame = gts[id];
    for (const KittiLabel& l : read_labels(cfg.gt / (id + ".txt"))) frame.push_back(to_gt_object(l));
  }
  std::map<std::string, std::vector<Detection>> dets;
  for (const std::string& id : frame_stems(cfg.det, ".txt")) {
    auto& frame = dets[id];
    for (const KittiLabel& l : read_labels(cfg.det / (id + ".txt"))) frame.push_back(to_detection(l));
  }
  const EvalReport report = evaluate(gts, dets, cfg.eval);
  const std::string json = eval_report_to_json(report);
  if (cfg.out) write_file_atomic(*cfg.out, json);

  if (cfg.json) {
    out << json;
  } else {
    const std::string metric = cfg.eval.metric == IouMetric::IoU3D ? "3D" : "BEV";
    out << "AP_" << metric << " " << to_string(cfg.eval.recall_points) << " " << cfg.eval.cls << " @ IoU "
        << fmt("%.2f", cfg.eval.iou_threshold) << "\n";
    char line[128];
    std::snprintf(line, sizeof(line), "%10s%10s%10s\n", "Easy", "Moderate", "Hard");
    out << line;
    std::snprintf(line, sizeof(line), "%10.2f%10.2f%10.2f\n", 100.0 * report.per_difficulty[0].ap,
                  100.0 * report.per_difficulty[1].ap, 100.0 * report.per_difficulty[2].ap);
    out << line;
  }
  err << "evaluated " << gts.size() << " frames\n";
  return kOk;
}

int cmd_synth(const SynthConfig& cfg, std::ostream&, std::ostream& err) {
  validate(cfg.noise);
  if (cfg.scenes < 0) throw Error(ErrorCode::InvalidArgument, "--scenes must be >= 0");
  if (!cfg.out) throw Error(ErrorCode::InvalidArgument, "--out is required");
  const CameraModel cam = preset_camera(cfg.camera);
  for (const char* sub : {"masks", "maps", "calib", "label"}) fs::create_directories(*cfg.out / sub);

  const std::string calib_text = write_camera(cam);
  std::vector<std::string> errors(cfg.scenes);
  parallel_for(cfg.scenes, cfg.jobs, [&](int i) {
    try {
      const std::string id = frame_id(i);
      const std::uint64_t scene_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
      Rng rng(scene_seed);
      const std::vector<Box3D> boxes = sample_boxes(cam, cfg.sampler, rng);
      RenderedScene scene = render_scene(SceneSpec{cam, boxes, scene_seed, cfg.layout, true});
      perturb_in_place(scene.mask, scene.maps, cfg.noise, scene_seed);
      const AttributeMaps& maps = scene.maps;
      std::vector<KittiLabel> labels;
      for (const RenderedObject& obj : scene.objects) labels.push_back(ground_truth_label(obj));
      write_file_atomic(*cfg.out / "masks" / (id + ".png"), encode_mask_png(scene.mask));
      write_file_atomic(*cfg.out / "maps" / (id + ".blam"), encode_attribute_maps(maps));
      write_file_atomic(*cfg.out / "calib" / (id + ".txt"), calib_text);
      write_file_atomic(*cfg.out / "label" / (id + ".txt"), write_kitti_label_file(labels));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (int i = 0; i < cfg.scenes; ++i) {
    if (!errors[i].empty()) throw Error(ErrorCode::InvalidArgument, "scene " + frame_id(i) + ": " + errors[i]);
  }
  err << "wrote " << cfg.scenes << " scenes to " << cfg.out->string() << "\n";
  return kOk;
}

int cmd_roundtrip(const SynthConfig& cfg, std::ostream& out, std::ostream& err) {
  validate(cfg.noise);
  if (cfg.scenes < 1) throw Error(ErrorCode::InvalidArgument, "--scenes must be >= 1");
  SceneSpec spec{preset_camera(cfg.camera), {}, cfg.seed, RPLayout::EightRP, true};
  RoundtripOptions opts;
  opts.sampler = cfg.sampler;
  opts.jobs = cfg.jobs;
  const RoundtripReport report = roundtrip_report(spec, cfg.noise, cfg.scenes, opts);
  const std::string json = roundtrip_report_to_json(report);

  std::optional<fs::path> path = cfg.report;
  if (!path && cfg.out) path = *cfg.out / "roundtrip.json";
  if (path) {
    if (path->has_parent_path()) fs::create_directories(path->parent_path());
    write_file_atomic(*path, json);
  }
  if (cfg.json) {
    out << json;
  } else {
    char line[160];
    std::snprintf(line, sizeof(line), "%-8s%14s%14s%14s%14s%10s\n", "layout", "center_med", "center_p95",
                  "depth_med", "yaw_med", "failures");
    out << line;
    auto row = [&](const char* name, const MethodStats& m) {
      std::snprintf(line, sizeof(line), "%-8s%14.3e%14.3e%14.3e%14.3e%10zu\n", name, m.center.median, m.center.p95,
                    m.depth.median, m.yaw.median, m.failures);
      out << line;
    };
    if (!cfg.layout_only || *cfg.layout_only == RPLayout::TwoRP) row("2rp", report.two_rp);
    if (!cfg.layout_only || *cfg.layout_only == RPLayout::EightRP) row("8rp", report.eight_rp);
  }
  err << "roundtrip over " << cfg.scenes << " trials, seed " << cfg.seed << "\n";
  return kOk;
}

int cmd_bench(const BenchConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.scenes < 0) throw Error(ErrorCode::InvalidArgument, "--scenes must be >= 0");
  const CameraModel cam = preset_camera(CameraPreset::Kitti);
  NoiseSpec noise;
  noise.sigma_rp = cfg.noise_rp;
  validate(noise);
  SceneSampler sampler;
  sampler.boxes_per_scene = cfg.boxes_per_scene;

  std::vector<double> t_aggregate, t_lift, t_lm;
  std::size_t failures = 0;
  for (int i = 0; i < cfg.scenes; ++i) {
    const std::uint64_t scene_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    Rng rng(scene_seed);
    const std::vector<Box3D> boxes = sample_boxes(cam, sampler, rng);
    RenderedScene scene = render_scene(SceneSpec{cam, boxes, scene_seed, cfg.layout, true});
    perturb_in_place(scene.mask, scene.maps, noise, scene_seed);
    const AttributeMaps& maps = scene.maps;
    for (InstanceId id : scene.mask.instance_ids()) {
      try {
        auto t0 = std::chrono::steady_clock::now();
        const AggregatedInstance agg = aggregate_instance(scene.mask, maps, id, cam);
        t_aggregate.push_back(seconds_since(t0));
        if (cfg.layout == RPLayout::TwoRP) {
          t0 = std::chrono::steady_clock::now();
          const LiftResult r = instances_to_boxes(std::span(&agg, 1), cam, RPLayout::TwoRP);
          t_lift.push_back(seconds_since(t0));
          failures += r.failures.size();
        } else {
          t0 = std::chrono::steady_clock::now();
          const Box3D init = initialize_from_corners(cam, agg.rps_abs, agg.dims, agg.ry);
          t_lift.push_back(seconds_since(t0));
          t0 = std::chrono::steady_clock::now();
          refine_box_lm(cam, init, agg.rps_abs);
          t_lm.push_back(seconds_since(t0));
        }
      } catch (const Error& e) {
        ++failures;
      }
    }
  }

  char line[128];
  std::snprintf(line, sizeof(line), "%-10s%8s%12s%12s%12s\n", "stage", "count", "mean_us", "median_us", "p95_us");
  out << line;
  auto row = [&](const char* name, const std::vector<double>& t) {
    if (t.empty()) return;
    const ErrorStats s = summarize(t);
    std::snprintf(line, sizeof(line), "%-10s%8zu%12.2f%12.2f%12.2f\n", name, s.count, 1e6 * s.mean, 1e6 * s.median,
                  1e6 * s.p95);
    out << line;
  };
  row("aggregate", t_aggregate);
  row("lift", t_lift);
  if (cfg.layout == RPLayout::EightRP) row("lm", t_lm);
  err << "bench: " << cfg.scenes << " scenes, " << t_aggregate.size() << " instances, " << failures
      << " failures\n";
  return kOk;
}

}  // namespace rplift::cli
