#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rplift/camera.hpp"
#include "rplift/eval.hpp"
#include "rplift/geom.hpp"
#include "rplift/synth.hpp"

namespace rplift::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kPartialFailure = 2 };

// Parses `args` (without the program name) and runs the subcommand.
// Data goes to `out`, logs to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct LiftConfig {
  std::filesystem::path masks, maps, calib, out;
  RPLayout layout = RPLayout::EightRP;
  bool no_lm = false;
  bool overlay = false;
  double trim = 0.0;
  int jobs = 1;
};

struct EvalCommandConfig {
  std::filesystem::path gt, det;
  std::optional<std::filesystem::path> out;
  EvalConfig eval;
  bool json = false;
};

enum class CameraPreset { Kitti, Narrow, Equirect };

struct SynthConfig {
  int scenes = 10;
  std::uint64_t seed = 0;
  NoiseSpec noise;
  RPLayout layout = RPLayout::EightRP;
  CameraPreset camera = CameraPreset::Kitti;
  SceneSampler sampler;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> report;
  // Roundtrip always runs both layouts; this limits the printed rows.
  std::optional<RPLayout> layout_only;
  bool json = false;
  int jobs = 1;
};

struct BenchConfig {
  int scenes = 10;
  std::uint64_t seed = 0;
  RPLayout layout = RPLayout::EightRP;
  double noise_rp = 0.0;
  int boxes_per_scene = 1;
};

int cmd_lift(const LiftConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalCommandConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_roundtrip(const SynthConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchConfig& cfg, std::ostream& out, std::ostream& err);

CameraModel preset_camera(CameraPreset preset);

// "%06d"
std::string frame_id(int index);

}  // namespace rplift::cli
