#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rplift/geom.hpp"

namespace rplift {

using BBox2D = std::array<double, 4>;  // u1, v1, u2, v2

struct GtObject {
  Box3D box;
  BBox2D bbox2d{};
  double truncated = 0.0;
  int occluded = 0;
  std::string cls = "Car";
};

struct Detection {
  Box3D box;
  double score = 0.0;
  std::string cls = "Car";
  // Used only against DontCare regions.
  std::optional<BBox2D> bbox2d;
};

enum class RecallPoints { R11, R40 };
enum class IouMetric { IoU3D, IoUBEV };
enum class Difficulty { Easy = 0, Moderate = 1, Hard = 2, Ignored = 3 };

struct EvalConfig {
  double iou_threshold = 0.7;
  RecallPoints recall_points = RecallPoints::R40;
  IouMetric metric = IouMetric::IoU3D;
  std::string cls = "Car";
  // Detections whose 2D box overlaps a DontCare box at least this much are
  // ignored.
  double dontcare_iou = 0.5;
};

// Throws InvalidArgument unless 0 < iou_threshold <= 1.
void validate(const EvalConfig& cfg);

struct PrCurve {
  // (recall point, interpolated precision) pairs.
  std::vector<std::pair<double, double>> points;
  double ap = 0.0;
};

struct EvalReport {
  EvalConfig config;
  std::array<PrCurve, 3> per_difficulty;  // Easy, Moderate, Hard
  std::array<int, 3> num_gt{};
};

// Signed-area-positive polygon area (shoelace).
double polygon_area(const std::vector<Eigen::Vector2d>& poly);

// Sutherland-Hodgman clipping of `subject` by the convex `clip`; both
// counter-clockwise.
std::vector<Eigen::Vector2d> clip_convex_polygon(const std::vector<Eigen::Vector2d>& subject,
                                                 const std::vector<Eigen::Vector2d>& clip);

// Footprint rectangle in the (x, z) plane, counter-clockwise.
std::vector<Eigen::Vector2d> bev_footprint(const Box3D& box);

double bev_intersection_area(const Box3D& a, const Box3D& b);
double bev_iou(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);
double iou_2d(const BBox2D& a, const BBox2D& b);

Difficulty assign_difficulty(const GtObject& gt);

// Per-frame matching result for one difficulty.
struct FrameMatches {
  std::vector<std::pair<double, bool>> scored;  // (score, true positive) of counted detections
  int num_gt = 0;
};

// Greedy, score-descending matching in one frame. GTs of the class whose
// difficulty is at most `difficulty` must be found; harder ones and
// DontCare boxes absorb detections without counting.
FrameMatches match_frame(const std::vector<GtObject>& gts, const std::vector<Detection>& dets,
                         const EvalConfig& cfg, Difficulty difficulty);

// Interpolated precision at the recall points and their mean.
PrCurve pr_curve(std::vector<std::pair<double, bool>> scored, int num_gt, RecallPoints points);

// Single-frame convenience over match_frame and pr_curve.
PrCurve ap_from_matches(const std::vector<GtObject>& gts, const std::vector<Detection>& dets,
                        const EvalConfig& cfg, Difficulty difficulty);

// Frames keyed by id; a detection frame missing from `gts` throws
// FrameMismatch. Frames are reduced in id order; score ties keep input order.
EvalReport evaluate(const std::map<std::string, std::vector<GtObject>>& gts,
                    const std::map<std::string, std::vector<Detection>>& dets, const EvalConfig& cfg);

std::string to_string(RecallPoints points);
std::string to_string(IouMetric metric);
std::string to_string(Difficulty difficulty);

}  // namespace rplift
