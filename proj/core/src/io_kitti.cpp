#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>
#include <system_error>
#include <thread>

#include "rplift/error.hpp"
#include "rplift/io.hpp"

namespace rplift {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\v' || c == '\f' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t begin = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > begin) fields.push_back(line.substr(begin, i - begin));
  }
  return fields;
}

std::optional<double> to_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> to_int(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<double> parse_numbers(std::string_view rest, std::size_t expected, ErrorCode code, int line,
                                  const std::string& key) {
  const auto fields = split_fields(rest);
  if (fields.size() != expected) {
    throw ParseError(code, line, static_cast<int>(std::min(fields.size(), expected)) + 1,
                     key + " needs " + std::to_string(expected) + " numbers, got " + std::to_string(fields.size()));
  }
  std::vector<double> values;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto v = to_double(fields[i]);
    if (!v) throw ParseError(code, line, static_cast<int>(i) + 1, key + ": '" + std::string(fields[i]) + "' is not a finite number");
    values.push_back(*v);
  }
  return values;
}

// Finds "KEY:" at the start of a line; returns the remainder and its line.
std::optional<std::pair<std::string_view, int>> find_key(std::string_view text, std::string_view key) {
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.size() > key.size() && line.substr(0, key.size()) == key && line[key.size()] == ':') {
      return std::pair{line.substr(key.size() + 1), static_cast<int>(i) + 1};
    }
  }
  return std::nullopt;
}

std::ostringstream fixed_stream() {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(6);
  return os;
}

}  // namespace

std::vector<KittiLabel> parse_kitti_label_file(std::string_view text) {
  std::vector<KittiLabel> labels;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    const auto fields = split_fields(lines[i]);
    if (fields.empty()) continue;
    if (fields.size() < 15) {
      throw ParseError(ErrorCode::MalformedLine, line_no, static_cast<int>(fields.size()) + 1,
                       "expected 15 or 16 fields, got " + std::to_string(fields.size()));
    }
    if (fields.size() > 16) {
      throw ParseError(ErrorCode::MalformedLine, line_no, 17,
                       "expected 15 or 16 fields, got " + std::to_string(fields.size()));
    }
    auto number = [&](std::size_t k) {
      const auto v = to_double(fields[k]);
      if (!v) {
        throw ParseError(ErrorCode::MalformedLine, line_no, static_cast<int>(k) + 1,
                         "'" + std::string(fields[k]) + "' is not a finite number");
      }
      return *v;
    };
    KittiLabel label;
    label.type = std::string(fields[0]);
    label.truncated = number(1);
    const auto occluded = to_int(fields[2]);
    if (!occluded) {
      throw ParseError(ErrorCode::MalformedLine, line_no, 3, "'" + std::string(fields[2]) + "' is not an integer");
    }
    label.occluded = *occluded;
    label.alpha = number(3);
    for (int k = 0; k < 4; ++k) label.bbox[k] = number(4 + k);
    label.h = number(8);
    label.w = number(9);
    label.l = number(10);
    label.x = number(11);
    label.y = number(12);
    label.z = number(13);
    label.rotation_y = number(14);
    if (fields.size() == 16) label.score = number(15);
    labels.push_back(std::move(label));
  }
  return labels;
}

std::string write_kitti_label_file(std::span<const KittiLabel> labels) {
  std::ostringstream os = fixed_stream();
  for (const KittiLabel& l : labels) {
    os << l.type << ' ' << l.truncated << ' ' << l.occluded << ' ' << l.alpha;
    for (double b : l.bbox) os << ' ' << b;
    os << ' ' << l.h << ' ' << l.w << ' ' << l.l << ' ' << l.x << ' ' << l.y << ' ' << l.z << ' ' << l.rotation_y;
    if (l.score) os << ' ' << *l.score;
    os << '\n';
  }
  return os.str();
}

GtObject to_gt_object(const KittiLabel& label) {
  GtObject gt;
  gt.box = Box3D{label.x, label.y, label.z, {label.h, label.w, label.l}, label.rotation_y};
  gt.bbox2d = label.bbox;
  gt.truncated = label.truncated;
  gt.occluded = label.occluded;
  gt.cls = label.type;
  return gt;
}

Detection to_detection(const KittiLabel& label) {
  Detection det;
  det.box = Box3D{label.x, label.y, label.z, {label.h, label.w, label.l}, label.rotation_y};
  det.score = label.score.value_or(1.0);
  det.cls = label.type;
  det.bbox2d = label.bbox;
  return det;
}

KittiLabel detection_label(const Box3D& box, double score, const CameraModel& cam, const std::string& cls) {
  KittiLabel l;
  l.type = cls;
  l.truncated = -1.0;
  l.occluded = -1;
  l.alpha = yaw_to_alpha(box.ry, std::atan2(box.x, box.z));
  try {
    double u1 = 1e300, v1 = 1e300, u2 = -1e300, v2 = -1e300;
    for (const Vec3& c : box_corners_3d(box)) {
      const Pixel p = cam.project(c);
      u1 = std::min(u1, p.u);
      v1 = std::min(v1, p.v);
      u2 = std::max(u2, p.u);
      v2 = std::max(v2, p.v);
    }
    const double w = cam.width(), h = cam.height();
    l.bbox = {std::clamp(u1, 0.0, w), std::clamp(v1, 0.0, h), std::clamp(u2, 0.0, w), std::clamp(v2, 0.0, h)};
  } catch (const Error&) {
    l.bbox = {0.0, 0.0, 0.0, 0.0};
  }
  l.h = box.dims.h;
  l.w = box.dims.w;
  l.l = box.dims.l;
  l.x = box.x;
  l.y = box.y;
  l.z = box.z;
  l.rotation_y = normalize_angle(box.ry);
  l.score = score;
  return l;
}

KittiLabel ground_truth_label(const RenderedObject& obj, const std::string& cls) {
  KittiLabel l;
  l.type = cls;
  l.truncated = 0.0;
  l.occluded = 0;
  l.alpha = yaw_to_alpha(obj.box.ry, std::atan2(obj.box.x, obj.box.z));
  l.bbox = obj.bbox2d;
  l.h = obj.box.dims.h;
  l.w = obj.box.dims.w;
  l.l = obj.box.dims.l;
  l.x = obj.box.x;
  l.y = obj.box.y;
  l.z = obj.box.z;
  l.rotation_y = normalize_angle(obj.box.ry);
  return l;
}

KittiCalib parse_calib(std::string_view text, int width, int height) {
  const auto p2 = find_key(text, "P2");
  if (!p2) throw ParseError(ErrorCode::MissingKey, 0, 0, "no 'P2:' line");
  const auto values = parse_numbers(p2->first, 12, ErrorCode::MalformedMatrix, p2->second, "P2");
  KittiCalib calib;
  std::copy(values.begin(), values.end(), calib.p2.begin());
  PinholeIntrinsics& k = calib.intrinsics;
  k.fx = values[0];
  k.fy = values[5];
  k.cx = values[2];
  k.cy = values[6];
  k.width = width > 0 ? width : std::max(1, static_cast<int>(std::ceil(2.0 * k.cx)));
  k.height = height > 0 ? height : std::max(1, static_cast<int>(std::ceil(2.0 * k.cy)));
  if (!(k.fx > 0.0 && k.fy > 0.0)) {
    throw ParseError(ErrorCode::MalformedMatrix, p2->second, 0, "P2 focal lengths must be positive");
  }
  return calib;
}

CameraModel parse_camera(std::string_view text, int width, int height) {
  if (const auto size = find_key(text, "IMAGE_SIZE")) {
    const auto v = parse_numbers(size->first, 2, ErrorCode::MalformedMatrix, size->second, "IMAGE_SIZE");
    if (width <= 0) width = static_cast<int>(v[0]);
    if (height <= 0) height = static_cast<int>(v[1]);
  }
  try {
    if (const auto fish = find_key(text, "FISHEYE")) {
      const auto v = parse_numbers(fish->first, 9, ErrorCode::MalformedMatrix, fish->second, "FISHEYE");
      EquidistantFisheye f;
      f.fx = v[0];
      f.fy = v[1];
      f.cx = v[2];
      f.cy = v[3];
      f.k = {v[4], v[5], v[6], v[7]};
      f.max_theta = v[8];
      f.width = width > 0 ? width : std::max(1, static_cast<int>(std::ceil(2.0 * f.cx)));
      f.height = height > 0 ? height : std::max(1, static_cast<int>(std::ceil(2.0 * f.cy)));
      return CameraModel(f);
    }
    if (const auto eq = find_key(text, "EQUIRECT")) {
      const auto v = parse_numbers(eq->first, 4, ErrorCode::MalformedMatrix, eq->second, "EQUIRECT");
      if (width <= 0 || height <= 0) {
        throw ParseError(ErrorCode::MissingKey, eq->second, 0, "equirectangular camera needs an image size");
      }
      return CameraModel(EquirectangularCamera{width, height, v[0], v[1], v[2], v[3]});
    }
    return CameraModel(parse_calib(text, width, height).intrinsics);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(ErrorCode::MalformedMatrix, 0, 0, e.what());
  }
}

std::string write_camera(const CameraModel& cam) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17);
  const auto& m = cam.model();
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  if (const auto* p = std::get_if<PinholeIntrinsics>(&m)) {
    fx = p->fx, fy = p->fy, cx = p->cx, cy = p->cy;
  } else if (const auto* f = std::get_if<EquidistantFisheye>(&m)) {
    fx = f->fx, fy = f->fy, cx = f->cx, cy = f->cy;
  }
  os << "P2: " << fx << " 0 " << cx << " 0 0 " << fy << " " << cy << " 0 0 0 1 0\n";
  os << "IMAGE_SIZE: " << cam.width() << " " << cam.height() << "\n";
  if (const auto* f = std::get_if<EquidistantFisheye>(&m)) {
    os << "FISHEYE: " << f->fx << " " << f->fy << " " << f->cx << " " << f->cy << " " << f->k[0] << " " << f->k[1]
       << " " << f->k[2] << " " << f->k[3] << " " << f->max_theta << "\n";
  } else if (const auto* e = std::get_if<EquirectangularCamera>(&m)) {
    os << "EQUIRECT: " << e->hfov << " " << e->vfov << " " << e->yaw0 << " " << e->pitch0 << "\n";
  }
  return os.str();
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot rename into " + path.string());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace rplift
