#include "test_support.hpp"

#include <cmath>
#include <cstring>

#include "rplift/io.hpp"

namespace rplift::fixtures {

namespace {

const char* kValidLabel = "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59";

std::vector<std::uint8_t> small_map_bytes() {
  AttributeMaps maps(4, 4, RPLayout::TwoRP, false);
  return encode_attribute_maps(maps);
}

std::vector<std::uint8_t> small_mask_png() {
  InstanceMask mask(8, 6);
  for (int v = 1; v < 5; ++v) {
    for (int u = 2; u < 7; ++u) mask.at(u, v) = 3;
  }
  return encode_mask_png(mask);
}

template <typename T>
void poke_le(std::vector<std::uint8_t>& bytes, std::size_t offset, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[offset + i] = static_cast<std::uint8_t>(value >> (8 * i));
}

std::function<void()> labels(std::string text) {
  return [text] { parse_kitti_label_file(text); };
}

std::function<void()> calib(std::string text) {
  return [text] { parse_camera(text); };
}

std::function<void()> blam(std::vector<std::uint8_t> bytes) {
  return [bytes] { decode_attribute_maps(bytes); };
}

std::function<void()> png(std::vector<std::uint8_t> bytes) {
  return [bytes] { decode_mask_png(bytes); };
}

std::function<void()> report(std::string text) {
  return [text] { eval_report_from_json(text); };
}

std::vector<std::uint8_t> file_bytes(const std::string& rel) { return read_binary_file(data_path(rel)); }

// Inside test in the box's local frame (bottom center origin, yaw removed).
bool inside(const Box3D& box, const Vec3& p, bool bev_only) {
  const Vec3 local = yaw_rotation(box.ry).transpose() * (p - box.bottom_center());
  if (std::abs(local.x()) > 0.5 * box.dims.l || std::abs(local.z()) > 0.5 * box.dims.w) return false;
  return bev_only || (local.y() <= 0.0 && local.y() >= -box.dims.h);
}

double mc_iou(const Box3D& a, const Box3D& b, std::uint64_t samples, bool bev) {
  const Eigen::Matrix3d rot = yaw_rotation(a.ry);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 1; i <= samples; ++i) {
    const Vec3 local((halton(i, 2) - 0.5) * a.dims.l, bev ? 0.0 : -halton(i, 5) * a.dims.h,
                     (halton(i, 3) - 0.5) * a.dims.w);
    if (inside(b, a.bottom_center() + rot * local, bev)) ++hits;
  }
  const double va = a.dims.l * a.dims.w * (bev ? 1.0 : a.dims.h);
  const double vb = b.dims.l * b.dims.w * (bev ? 1.0 : b.dims.h);
  const double inter = va * static_cast<double>(hits) / static_cast<double>(samples);
  return inter / (va + vb - inter);
}

}  // namespace

std::filesystem::path data_path(const std::string& relative) {
  return std::filesystem::path(RPLIFT_TEST_DATA) / relative;
}

CameraModel kitti_camera() { return CameraModel(PinholeIntrinsics{721.5377, 721.5377, 609.5593, 172.854, 1242, 375}); }

std::vector<MalformedCase> malformed_corpus() {
  const std::string label(kValidLabel);
  std::vector<MalformedCase> c;
  c.push_back({"label with 14 fields", ErrorCode::MalformedLine,
               labels("Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70"), 1, 15});
  c.push_back({"label with 17 fields", ErrorCode::MalformedLine, labels(label + " 0.9 7"), 1, 17});
  c.push_back({"non-numeric alpha", ErrorCode::MalformedLine,
               labels("Car 0.00 0 abc 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59"), 1, 4});
  c.push_back({"nan height", ErrorCode::MalformedLine,
               labels("Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 nan 1.67 3.64 -0.65 1.71 46.70 -1.59"), 1, 9});
  c.push_back({"infinite depth", ErrorCode::MalformedLine,
               labels("Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 inf -1.59"), 1, 14});
  c.push_back({"fractional occlusion", ErrorCode::MalformedLine,
               labels("Car 0.00 0.5 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59"), 1,
               3});
  c.push_back({"trailing characters in number", ErrorCode::MalformedLine,
               labels("Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65x 1.67 3.64 -0.65 1.71 46.70 -1.59"), 1, 9});
  c.push_back({"overflowing exponent", ErrorCode::MalformedLine,
               labels("Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1e999 46.70 -1.59"), 1,
               13});
  c.push_back({"bad second line", ErrorCode::MalformedLine, labels(label + "\nCar 0.00 0\n"), 2, 4});
  c.push_back({"bad score", ErrorCode::MalformedLine, labels(label + " high"), 1, 16});
  c.push_back({"calib without P2", ErrorCode::MissingKey, calib("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n")});
  c.push_back({"P2 with 11 numbers", ErrorCode::MalformedMatrix, calib("P2: 1 0 0 0 0 1 0 0 0 0 1\n"), 1, 12});
  c.push_back({"P2 with text", ErrorCode::MalformedMatrix, calib("P2: 1 0 0 0 0 one 0 0 0 0 1 0\n"), 1, 6});
  c.push_back({"P2 with zero focal length", ErrorCode::MalformedMatrix, calib("P2: 0 0 0 0 0 1 0 0 0 0 1 0\n")});
  c.push_back({"fisheye line with 8 numbers", ErrorCode::MalformedMatrix,
               calib("FISHEYE: 300 300 320 240 0 0 0 0\nIMAGE_SIZE: 640 480\n")});
  c.push_back({"fisheye with non-monotonic distortion", ErrorCode::MalformedMatrix,
               calib("FISHEYE: 300 300 320 240 -1 0 0 0 1.5\nIMAGE_SIZE: 640 480\n")});
  c.push_back({"empty map file", ErrorCode::BadMagic, blam({})});
  {
    auto bytes = small_map_bytes();
    bytes[0] = 'X';
    c.push_back({"map with wrong magic", ErrorCode::BadMagic, blam(bytes)});
  }
  {
    auto bytes = small_map_bytes();
    bytes.resize(10);
    c.push_back({"map with truncated header", ErrorCode::SizeMismatch, blam(bytes)});
  }
  {
    auto bytes = small_map_bytes();
    poke_le<std::uint16_t>(bytes, 4, 2);
    c.push_back({"map version 2", ErrorCode::UnsupportedVersion, blam(bytes)});
  }
  {
    auto bytes = small_map_bytes();
    bytes[6] = 3;
    c.push_back({"map with layout 3", ErrorCode::UnsupportedFormat, blam(bytes)});
  }
  {
    auto bytes = small_map_bytes();
    bytes[7] = 0x80;
    c.push_back({"map with unknown flag", ErrorCode::UnsupportedFormat, blam(bytes)});
  }
  {
    auto bytes = small_map_bytes();
    poke_le<std::uint16_t>(bytes, 16, 11);
    c.push_back({"map channel count disagrees with flags", ErrorCode::SizeMismatch, blam(bytes)});
  }
  {
    auto bytes = small_map_bytes();
    bytes.pop_back();
    c.push_back({"map payload one byte short", ErrorCode::SizeMismatch, blam(bytes)});
  }
  {
    auto bytes = small_map_bytes();
    bytes.push_back(0);
    c.push_back({"map payload one byte long", ErrorCode::SizeMismatch, blam(bytes)});
  }
  {
    auto bytes = small_map_bytes();
    poke_le<std::uint32_t>(bytes, 8, 0);
    c.push_back({"map with zero width", ErrorCode::SizeMismatch, blam(bytes)});
  }
  {
    auto bytes = small_map_bytes();
    poke_le<std::uint32_t>(bytes, 8, 0xffffffffu);
    poke_le<std::uint32_t>(bytes, 12, 0xffffffffu);
    c.push_back({"map with overflowing size", ErrorCode::SizeMismatch, blam(bytes)});
  }
  c.push_back({"empty mask file", ErrorCode::BadMagic, png({})});
  {
    std::vector<std::uint8_t> bytes = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n', 1, 2, 3, 4, 5};
    c.push_back({"PNG signature then garbage", ErrorCode::UnsupportedFormat, png(bytes)});
  }
  {
    auto bytes = small_mask_png();
    bytes.resize(bytes.size() / 2);
    c.push_back({"truncated mask PNG", ErrorCode::UnsupportedFormat, png(bytes)});
  }
  {
    auto bytes = small_mask_png();
    bytes[bytes.size() - 20] ^= 0xff;
    c.push_back({"mask PNG with corrupted data", ErrorCode::UnsupportedFormat, png(bytes)});
  }
  c.push_back({"RGB mask", ErrorCode::UnsupportedFormat, [] { decode_mask_png(file_bytes("malformed/rgb_4x4.png")); }});
  c.push_back(
      {"1-bit mask", ErrorCode::UnsupportedFormat, [] { decode_mask_png(file_bytes("malformed/gray_1bit.png")); }});
  c.push_back({"report that is not JSON", ErrorCode::UnsupportedFormat, report("{\"metric\": ")});
  c.push_back({"report without per_difficulty", ErrorCode::MissingKey,
               report(R"({"metric": "3d", "recall_variant": "R40", "iou_threshold": 0.7})")});
  c.push_back({"report with unknown metric", ErrorCode::UnsupportedFormat,
               report(R"({"metric": "2d", "recall_variant": "R40", "iou_threshold": 0.7, "per_difficulty": {}})")});
  c.push_back({"report with string ap", ErrorCode::UnsupportedFormat,
               report(R"({"metric": "3d", "recall_variant": "R40", "iou_threshold": 0.7, "per_difficulty":
                  {"easy": {"ap": "high", "pr": []}, "moderate": {"ap": 0, "pr": []}, "hard": {"ap": 0, "pr": []}}})")});
  return c;
}

std::string check_malformed(const MalformedCase& c) {
  try {
    c.run();
  } catch (const ParseError& e) {
    if (e.code() != c.expected) return std::string("wrong code: ") + e.what();
    if (c.line >= 0 && e.line() != c.line) return "line " + std::to_string(e.line()) + ": " + e.what();
    if (c.field >= 0 && e.field() != c.field) return "field " + std::to_string(e.field()) + ": " + e.what();
    return {};
  } catch (const Error& e) {
    if (e.code() != c.expected) return std::string("wrong code: ") + e.what();
    if (c.line >= 0 || c.field >= 0) return std::string("no location: ") + e.what();
    return {};
  } catch (const std::exception& e) {
    return std::string("unstructured exception: ") + e.what();
  }
  return "accepted";
}

double halton(std::uint64_t i, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

double mc_bev_iou(const Box3D& a, const Box3D& b, std::uint64_t samples) { return mc_iou(a, b, samples, true); }
double mc_iou_3d(const Box3D& a, const Box3D& b, std::uint64_t samples) { return mc_iou(a, b, samples, false); }

}  // namespace rplift::fixtures
