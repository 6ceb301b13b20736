#include "rplift/eval.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "rplift/error.hpp"

namespace rplift {

namespace {

using Point2 = Eigen::Vector2d;

double cross(const Point2& a, const Point2& b, const Point2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

Point2 line_intersection(const Point2& p, const Point2& q, const Point2& a, const Point2& b) {
  const double cp = cross(a, b, p);
  const double cq = cross(a, b, q);
  const double t = cp / (cp - cq);
  return p + t * (q - p);
}

double signed_area(const std::vector<Point2>& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % poly.size()];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * s;
}

auto box_key(const Box3D& b) { return std::make_tuple(b.x, b.y, b.z, b.ry, b.dims.h, b.dims.w, b.dims.l); }

bool same_footprint(const Box3D& a, const Box3D& b) {
  return a.x == b.x && a.z == b.z && a.dims.l == b.dims.l && a.dims.w == b.dims.w &&
         normalize_angle(a.ry) == normalize_angle(b.ry);
}

double box_height_overlap(const Box3D& a, const Box3D& b) {
  const double top = std::max(a.y - a.dims.h, b.y - b.dims.h);
  const double bottom = std::min(a.y, b.y);
  return std::max(0.0, bottom - top);
}

}  // namespace

void validate(const EvalConfig& cfg) {
  if (!(cfg.iou_threshold > 0.0 && cfg.iou_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "IoU threshold must lie in (0, 1]");
  }
}

double polygon_area(const std::vector<Point2>& poly) { return std::abs(signed_area(poly)); }

std::vector<Point2> clip_convex_polygon(const std::vector<Point2>& subject, const std::vector<Point2>& clip) {
  std::vector<Point2> output = subject;
  for (std::size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const Point2& a = clip[i];
    const Point2& b = clip[(i + 1) % clip.size()];
    const std::vector<Point2> input = std::move(output);
    output.clear();
    for (std::size_t k = 0; k < input.size(); ++k) {
      const Point2& cur = input[k];
      const Point2& prev = input[(k + input.size() - 1) % input.size()];
      const bool cur_in = cross(a, b, cur) >= 0.0;
      const bool prev_in = cross(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) output.push_back(line_intersection(prev, cur, a, b));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(line_intersection(prev, cur, a, b));
      }
    }
  }
  return output;
}

std::vector<Point2> bev_footprint(const Box3D& box) {
  const double c = std::cos(box.ry), s = std::sin(box.ry);
  const double hl = 0.5 * box.dims.l, hw = 0.5 * box.dims.w;
  // Object (x, z) offsets, then the yaw rotation (x, z) -> (c x + s z, -s x + c z).
  const std::array<Point2, 4> local{Point2(-hl, -hw), Point2(hl, -hw), Point2(hl, hw), Point2(-hl, hw)};
  std::vector<Point2> poly;
  for (const Point2& p : local) poly.emplace_back(box.x + c * p.x() + s * p.y(), box.z - s * p.x() + c * p.y());
  if (signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  if (same_footprint(a, b)) return a.dims.l * a.dims.w;
  const Box3D& first = box_key(a) <= box_key(b) ? a : b;
  const Box3D& second = &first == &a ? b : a;
  const auto inter = clip_convex_polygon(bev_footprint(first), bev_footprint(second));
  if (inter.size() < 3) return 0.0;
  return std::min({polygon_area(inter), a.dims.l * a.dims.w, b.dims.l * b.dims.w});
}

double bev_iou(const Box3D& a, const Box3D& b) {
  if (same_footprint(a, b)) return 1.0;
  const double inter = bev_intersection_area(a, b);
  const double uni = a.dims.l * a.dims.w + b.dims.l * b.dims.w - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (same_footprint(a, b) && a.y == b.y && a.dims.h == b.dims.h) return 1.0;
  const double inter = bev_intersection_area(a, b) * box_height_overlap(a, b);
  const double vol_a = a.dims.l * a.dims.w * a.dims.h;
  const double vol_b = b.dims.l * b.dims.w * b.dims.h;
  const double uni = vol_a + vol_b - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou_2d(const BBox2D& a, const BBox2D& b) {
  const double iw = std::min(a[2], b[2]) - std::max(a[0], b[0]);
  const double ih = std::min(a[3], b[3]) - std::max(a[1], b[1]);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Difficulty assign_difficulty(const GtObject& gt) {
  const double height = gt.bbox2d[3] - gt.bbox2d[1];
  if (height >= 40.0 && gt.occluded <= 0 && gt.truncated <= 0.15) return Difficulty::Easy;
  if (height >= 25.0 && gt.occluded <= 1 && gt.truncated <= 0.30) return Difficulty::Moderate;
  if (height >= 25.0 && gt.occluded <= 2 && gt.truncated <= 0.50) return Difficulty::Hard;
  return Difficulty::Ignored;
}

FrameMatches match_frame(const std::vector<GtObject>& gts, const std::vector<Detection>& dets,
                         const EvalConfig& cfg, Difficulty difficulty) {
  validate(cfg);
  enum class Role { Care, Ignore, DontCare, Skip };
  std::vector<Role> roles;
  FrameMatches out;
  for (const GtObject& gt : gts) {
    if (gt.cls == cfg.cls) {
      const bool care = assign_difficulty(gt) <= difficulty;
      roles.push_back(care ? Role::Care : Role::Ignore);
      if (care) ++out.num_gt;
    } else if (gt.cls == "DontCare") {
      roles.push_back(Role::DontCare);
    } else {
      roles.push_back(Role::Skip);
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].cls == cfg.cls) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  auto iou = [&](const Box3D& a, const Box3D& b) {
    return cfg.metric == IouMetric::IoU3D ? iou_3d(a, b) : bev_iou(a, b);
  };
  std::vector<bool> used(gts.size(), false);
  auto best_match = [&](const Detection& det, Role role) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (roles[g] != role || used[g]) continue;
      const double o = iou(det.box, gts[g].box);
      if (o >= cfg.iou_threshold && o > best_iou) {
        best = g;
        best_iou = o;
      }
    }
    return best;
  };

  for (std::size_t i : order) {
    const Detection& det = dets[i];
    if (auto g = best_match(det, Role::Care)) {
      used[*g] = true;
      out.scored.emplace_back(det.score, true);
      continue;
    }
    if (auto g = best_match(det, Role::Ignore)) {
      used[*g] = true;
      continue;
    }
    bool in_dontcare = false;
    if (det.bbox2d) {
      for (std::size_t g = 0; g < gts.size() && !in_dontcare; ++g) {
        in_dontcare = roles[g] == Role::DontCare && iou_2d(*det.bbox2d, gts[g].bbox2d) >= cfg.dontcare_iou;
      }
    }
    if (!in_dontcare) out.scored.emplace_back(det.score, false);
  }
  return out;
}

PrCurve pr_curve(std::vector<std::pair<double, bool>> scored, int num_gt, RecallPoints points) {
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<double> recall, precision;
  int tp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].second) ++tp;
    recall.push_back(num_gt > 0 ? static_cast<double>(tp) / num_gt : 0.0);
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  // Suffix maximum: best precision at any recall >= recall[i].
  std::vector<double> best(precision.size());
  double running = 0.0;
  for (std::size_t i = precision.size(); i-- > 0;) {
    running = std::max(running, precision[i]);
    best[i] = running;
  }

  PrCurve curve;
  const int first = points == RecallPoints::R40 ? 1 : 0;
  const int last = points == RecallPoints::R40 ? 40 : 10;
  double sum = 0.0;
  for (int k = first; k <= last; ++k) {
    const double r = static_cast<double>(k) / last;
    double p = 0.0;
    if (num_gt > 0) {
      // Recall is non-decreasing, so the first index reaching r has the
      // largest suffix maximum among qualifying entries.
      const auto it = std::lower_bound(recall.begin(), recall.end(), r);
      if (it != recall.end()) p = best[static_cast<std::size_t>(it - recall.begin())];
    }
    curve.points.emplace_back(r, p);
    sum += p;
  }
  curve.ap = sum / static_cast<double>(last - first + 1);
  return curve;
}

PrCurve ap_from_matches(const std::vector<GtObject>& gts, const std::vector<Detection>& dets,
                        const EvalConfig& cfg, Difficulty difficulty) {
  FrameMatches m = match_frame(gts, dets, cfg, difficulty);
  return pr_curve(std::move(m.scored), m.num_gt, cfg.recall_points);
}

EvalReport evaluate(const std::map<std::string, std::vector<GtObject>>& gts,
                    const std::map<std::string, std::vector<Detection>>& dets, const EvalConfig& cfg) {
  validate(cfg);
  for (const auto& [frame, _] : dets) {
    if (!gts.contains(frame)) throw Error(ErrorCode::FrameMismatch, "detections for unknown frame '" + frame + "'");
  }
  EvalReport report;
  report.config = cfg;
  static const std::vector<Detection> kNone;
  for (int d = 0; d < 3; ++d) {
    std::vector<std::pair<double, bool>> scored;
    int num_gt = 0;
    for (const auto& [frame, frame_gts] : gts) {
      const auto it = dets.find(frame);
      FrameMatches m = match_frame(frame_gts, it == dets.end() ? kNone : it->second, cfg, static_cast<Difficulty>(d));
      scored.insert(scored.end(), m.scored.begin(), m.scored.end());
      num_gt += m.num_gt;
    }
    report.per_difficulty[d] = pr_curve(std::move(scored), num_gt, cfg.recall_points);
    report.num_gt[d] = num_gt;
  }
  return report;
}

std::string to_string(RecallPoints points) { return points == RecallPoints::R40 ? "R40" : "R11"; }

std::string to_string(IouMetric metric) { return metric == IouMetric::IoU3D ? "3d" : "bev"; }

std::string to_string(Difficulty difficulty) {
  switch (difficulty) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Moderate: return "moderate";
    case Difficulty::Hard: return "hard";
    case Difficulty::Ignored: return "ignored";
  }
  return "unknown";
}

}  // namespace rplift
