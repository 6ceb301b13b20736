#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rplift/camera.hpp"
#include "rplift/eval.hpp"
#include "rplift/synth.hpp"
#include "rplift/voting.hpp"

namespace rplift {

// ---------------------------------------------------------------------------
// KITTI object labels: one object per line,
//   type truncated occluded alpha u1 v1 u2 v2 h w l x y z rotation_y [score]

struct KittiLabel {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  BBox2D bbox{};
  double h = 0.0, w = 0.0, l = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;
  double rotation_y = 0.0;
  std::optional<double> score;

  friend bool operator==(const KittiLabel&, const KittiLabel&) = default;
};

// All-or-nothing: the first bad line throws ParseError(MalformedLine) with
// its 1-based line and field. Blank lines are skipped.
std::vector<KittiLabel> parse_kitti_label_file(std::string_view text);

// Floats with 6 decimals, one label per line.
std::string write_kitti_label_file(std::span<const KittiLabel> labels);

GtObject to_gt_object(const KittiLabel& label);
// A missing score reads as 1.0 so ground-truth files can stand in for detections.
Detection to_detection(const KittiLabel& label);
// Detection line with truncated = occluded = -1, alpha from the location
// bearing and the 2D box of the projected corners clipped to the image.
KittiLabel detection_label(const Box3D& box, double score, const CameraModel& cam, const std::string& cls = "Car");
KittiLabel ground_truth_label(const RenderedObject& obj, const std::string& cls = "Car");

// ---------------------------------------------------------------------------
// KITTI calibration. Only P2 (3x4, row-major) is used.

struct KittiCalib {
  std::array<double, 12> p2{};
  PinholeIntrinsics intrinsics;

  // Translation terms of P2; monocular lifting ignores them.
  double baseline_tx() const { return p2[3]; }
  double baseline_ty() const { return p2[7]; }
};

// Image size is not part of the KITTI calib format; 0 falls back to
// max(1, ceil(2 c)) along each axis. Throws MissingKey or MalformedMatrix.
KittiCalib parse_calib(std::string_view text, int width = 0, int height = 0);

// Calibration text with optional extension lines for non-pinhole models:
//   IMAGE_SIZE: width height
//   FISHEYE: fx fy cx cy k1 k2 k3 k4 max_theta
//   EQUIRECT: hfov vfov yaw0 pitch0
// Without an extension the P2 pinhole is returned.
CameraModel parse_camera(std::string_view text, int width = 0, int height = 0);
std::string write_camera(const CameraModel& cam);

// ---------------------------------------------------------------------------
// Attribute map container, little-endian:
//   "BLAM" | u16 version | u8 layout (2|8) | u8 flags (bit0: angles)
//   | u32 width | u32 height | u16 channels | float32 rasters, channel-major

inline constexpr std::uint16_t kAttributeMapVersion = 1;
inline constexpr std::size_t kAttributeMapHeaderSize = 18;

std::vector<std::uint8_t> encode_attribute_maps(const AttributeMaps& maps);
// Throws BadMagic, UnsupportedVersion, UnsupportedFormat or SizeMismatch.
AttributeMaps decode_attribute_maps(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Instance masks: single-channel 16-bit PNG, value = instance id. 8-bit
// grayscale is accepted on read.

std::vector<std::uint8_t> encode_mask_png(const InstanceMask& mask);
InstanceMask decode_mask_png(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Reports

// {metric, recall_variant, iou_threshold,
//  per_difficulty: {easy|moderate|hard: {ap, pr: [[r, p], ...]}}}
std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(std::string_view text);

std::string roundtrip_report_to_json(const RoundtripReport& report);

// ---------------------------------------------------------------------------
// Files. Writers go through a temporary sibling and rename.

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace rplift
