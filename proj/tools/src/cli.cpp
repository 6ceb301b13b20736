#include <algorithm>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "rplift/error.hpp"
#include "rplift/io.hpp"
#include "rplift_cli/cli.hpp"

namespace rplift::cli {

namespace {

const std::map<std::string, RPLayout> kLayouts{{"2rp", RPLayout::TwoRP}, {"8rp", RPLayout::EightRP}};
const std::map<std::string, CameraPreset> kCameras{
    {"kitti", CameraPreset::Kitti}, {"narrow", CameraPreset::Narrow}, {"equirect", CameraPreset::Equirect}};

int default_jobs() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Removes --config PATH and appends the JSON object's keys as flags that are
// not already on the command line.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw Error(ErrorCode::InvalidArgument, "--config needs a path");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;

  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(read_text_file(*path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "config " + *path + ": " + e.what());
  }
  if (!cfg.is_object()) throw Error(ErrorCode::InvalidArgument, "config " + *path + " must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (has_flag(args, flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_string()) {
      args.push_back(flag);
      args.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      args.push_back(flag);
      args.push_back(value.dump());
    } else {
      throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must be a scalar");
    }
  }
  return args;
}

CLI::Validator unit_interval(const std::string& name) {
  return CLI::Validator(
      [name](std::string& s) -> std::string {
        double v = 0.0;
        try {
          v = std::stod(s);
        } catch (const std::exception&) {
          return name + " must be a number, got '" + s + "'";
        }
        if (!(v > 0.0 && v <= 1.0)) return name + " must be in (0, 1], got " + s;
        return {};
      },
      "(0,1]");
}

void add_synth_options(CLI::App* sub, SynthConfig& cfg, std::string& layout, bool layout_both) {
  sub->add_option("--scenes", cfg.scenes, "Number of scenes")->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", cfg.seed, "Base seed");
  sub->add_option("--noise-rp", cfg.noise.sigma_rp, "Reference point noise sigma (px)")->check(CLI::NonNegativeNumber);
  sub->add_option("--noise-dims", cfg.noise.sigma_dims, "Dimension noise sigma (m)")->check(CLI::NonNegativeNumber);
  sub->add_option("--noise-angle", cfg.noise.sigma_angle, "Angle channel noise sigma")->check(CLI::NonNegativeNumber);
  sub->add_option("--occlusion", cfg.noise.occlusion_fraction, "Fraction of corrupted pixels per instance")
      ->check(CLI::Range(0.0, 1.0));
  if (layout_both) {
    sub->add_option("--layout", layout, "Rows to print: 2rp, 8rp or both")->check(CLI::IsMember({"2rp", "8rp", "both"}));
  } else {
    sub->add_option("--layout", layout, "Reference point layout")->check(CLI::IsMember({"2rp", "8rp"}));
  }
  sub->add_option("--camera", cfg.camera, "Camera preset")
      ->transform(CLI::CheckedTransformer(kCameras, CLI::ignore_case))
      ->option_text("kitti|narrow|equirect");
  sub->add_option("--boxes-per-scene", cfg.sampler.boxes_per_scene, "Boxes per scene")->check(CLI::PositiveNumber);
  sub->add_option("--z-min", cfg.sampler.z_min, "Nearest box depth (m)")->check(CLI::PositiveNumber);
  sub->add_option("--z-max", cfg.sampler.z_max, "Farthest box depth (m)")->check(CLI::PositiveNumber);
  sub->add_flag("--on-ground{false},--perpendicular{true}", cfg.sampler.perpendicular,
                "Place boxes on the ground plane instead of at camera height");
  sub->add_option("--jobs", cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometric 3D box lifting from reference point maps"};
  app.footer("Every subcommand also takes --config FILE: a JSON object of flag names to values.\nFlags given on the command line win.");
  app.name("rplift");
  app.require_subcommand(1);

  LiftConfig lift;
  lift.jobs = default_jobs();
  std::string lift_layout = "8rp";
  auto* lift_cmd = app.add_subcommand("lift", "Lift per-pixel votes to KITTI-format detections");
  lift_cmd->add_option("--masks", lift.masks, "Directory of instance mask PNGs")->required();
  lift_cmd->add_option("--maps", lift.maps, "Directory of attribute map files")->required();
  lift_cmd->add_option("--calib", lift.calib, "Directory of calibration files")->required();
  lift_cmd->add_option("--out", lift.out, "Output directory")->required();
  lift_cmd->add_option("--layout", lift_layout, "Reference point layout")->check(CLI::IsMember({"2rp", "8rp"}));
  lift_cmd->add_flag("--no-lm", lift.no_lm, "Skip Levenberg-Marquardt refinement");
  lift_cmd->add_flag("--overlay", lift.overlay, "Write projected wireframes next to each detection file");
  lift_cmd->add_option("--trim", lift.trim, "Fraction trimmed from each tail of the votes")->check(CLI::Range(0.0, 0.49));
  lift_cmd->add_option("--jobs", lift.jobs, "Worker threads")->check(CLI::PositiveNumber);

  EvalCommandConfig eval;
  std::string out_report;
  auto* eval_cmd = app.add_subcommand("eval", "KITTI-style AP of detections against ground truth");
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth label directory")->required();
  eval_cmd->add_option("--det", eval.det, "Detection label directory")->required();
  eval_cmd->add_option("--iou", eval.eval.iou_threshold, "IoU threshold")->check(unit_interval("--iou"));
  eval_cmd->add_option("--recall", eval.eval.recall_points, "Recall points: r11 or r40")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, RecallPoints>{{"r11", RecallPoints::R11}, {"r40", RecallPoints::R40}}, CLI::ignore_case))
      ->option_text("r11|r40");
  eval_cmd->add_option("--metric", eval.eval.metric, "Overlap: 3d or bev")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, IouMetric>{{"3d", IouMetric::IoU3D}, {"bev", IouMetric::IoUBEV}}, CLI::ignore_case))
      ->option_text("3d|bev");
  eval_cmd->add_option("--class", eval.eval.cls, "Evaluated class");
  eval_cmd->add_option("--out", out_report, "Report JSON path");
  eval_cmd->add_flag("--json", eval.json, "Print the JSON report instead of the table");

  SynthConfig synth;
  synth.jobs = default_jobs();
  std::string synth_layout = "8rp";
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset with exact or noisy attribute maps");
  add_synth_options(synth_cmd, synth, synth_layout, false);
  std::string synth_out;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  SynthConfig rt;
  rt.jobs = default_jobs();
  std::string rt_layout = "both";
  std::string rt_out, rt_report;
  auto* rt_cmd = app.add_subcommand("roundtrip", "Render, perturb and lift synthetic scenes with both layouts");
  add_synth_options(rt_cmd, rt, rt_layout, true);
  rt_cmd->add_option("--out", rt_out, "Output directory (report defaults to roundtrip.json inside)");
  rt_cmd->add_option("--report", rt_report, "Report JSON path");
  rt_cmd->add_flag("--json", rt.json, "Print the JSON report instead of the table");

  BenchConfig bench;
  std::string bench_layout = "8rp";
  auto* bench_cmd = app.add_subcommand("bench", "Per-stage timings of the geometric pipeline");
  bench_cmd->add_option("--scenes", bench.scenes, "Number of scenes")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--layout", bench_layout, "Reference point layout")->check(CLI::IsMember({"2rp", "8rp"}));
  bench_cmd->add_option("--seed", bench.seed, "Base seed");
  bench_cmd->add_option("--noise-rp", bench.noise_rp, "Reference point noise sigma (px)")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--boxes-per-scene", bench.boxes_per_scene, "Boxes per scene")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> args = merge_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (lift_cmd->parsed()) {
      lift.layout = kLayouts.at(lift_layout);
      return cmd_lift(lift, out, err);
    }
    if (eval_cmd->parsed()) {
      if (!out_report.empty()) eval.out = out_report;
      return cmd_eval(eval, out, err);
    }
    if (synth_cmd->parsed()) {
      synth.layout = kLayouts.at(synth_layout);
      synth.out = synth_out;
      return cmd_synth(synth, out, err);
    }
    if (rt_cmd->parsed()) {
      if (rt_layout != "both") rt.layout_only = kLayouts.at(rt_layout);
      if (!rt_out.empty()) rt.out = rt_out;
      if (!rt_report.empty()) rt.report = rt_report;
      return cmd_roundtrip(rt, out, err);
    }
    if (bench_cmd->parsed()) {
      bench.layout = kLayouts.at(bench_layout);
      return cmd_bench(bench, out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace rplift::cli
