#include <cmath>

#include <gtest/gtest.h>

#include "rplift/angles.hpp"
#include "rplift/error.hpp"
#include "rplift/eval.hpp"
#include "rplift/io.hpp"
#include "rplift/random.hpp"
#include "test_support.hpp"

using namespace rplift;

namespace {

GtObject easy_gt(const Box3D& box) {
  GtObject g;
  g.box = box;
  g.bbox2d = {100, 100, 150, 160};
  return g;
}

Detection det(const Box3D& box, double score) {
  Detection d;
  d.box = box;
  d.score = score;
  d.bbox2d = BBox2D{100, 100, 150, 160};
  return d;
}

Box3D car(double x, double z, double ry = 0) { return Box3D{x, 1.65, z, {1.5, 1.6, 4.0}, ry}; }

std::vector<GtObject> load_gt(const std::string& rel) {
  std::vector<GtObject> out;
  for (const auto& l : parse_kitti_label_file(read_text_file(fixtures::data_path(rel)))) out.push_back(to_gt_object(l));
  return out;
}

std::vector<Detection> load_det(const std::string& rel) {
  std::vector<Detection> out;
  for (const auto& l : parse_kitti_label_file(read_text_file(fixtures::data_path(rel)))) out.push_back(to_detection(l));
  return out;
}

}  // namespace

TEST(Polygon, AreaAndClipping) {
  const std::vector<Eigen::Vector2d> sq{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  const std::vector<Eigen::Vector2d> shifted{{1, 1}, {3, 1}, {3, 3}, {1, 3}};
  EXPECT_EQ(polygon_area(sq), 4.0);
  EXPECT_NEAR(polygon_area(clip_convex_polygon(sq, shifted)), 1.0, 1e-15);
  const std::vector<Eigen::Vector2d> far{{5, 5}, {6, 5}, {6, 6}, {5, 6}};
  EXPECT_EQ(polygon_area(clip_convex_polygon(sq, far)), 0.0);
}

TEST(BevIou, Identical) {
  const Box3D b{1, 1.6, 20, {1.5, 1.6, 4.0}, 0.7};
  EXPECT_EQ(bev_iou(b, b), 1.0);
  EXPECT_EQ(iou_3d(b, b), 1.0);
}

TEST(BevIou, ShiftAlongLength) {
  const Box3D a{0, 0, 10, {1, 2, 4}, 0};
  const Box3D b{2, 0, 10, {1, 2, 4}, 0};
  EXPECT_NEAR(bev_intersection_area(a, b), 4.0, 1e-12);
  EXPECT_NEAR(bev_iou(a, b), 1.0 / 3.0, 1e-12);
}

TEST(BevIou, SymmetricAndBounded) {
  Rng rng(51);
  for (int i = 0; i < 1000; ++i) {
    const Box3D a{rng.uniform(-1, 1), 1, rng.uniform(9, 11), {1.5, rng.uniform(1, 2), rng.uniform(2, 5)}, rng.uniform(-kPi, kPi)};
    const Box3D b{rng.uniform(-1, 1), 1, rng.uniform(9, 11), {1.5, rng.uniform(1, 2), rng.uniform(2, 5)}, rng.uniform(-kPi, kPi)};
    const double ab = bev_iou(a, b);
    EXPECT_EQ(ab, bev_iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(BevIou, MatchesSamplingOracle) {
  Rng rng(52);
  for (int i = 0; i < 10; ++i) {
    const Box3D a{0, 1, 10, {1.5, rng.uniform(1, 2), rng.uniform(2, 5)}, rng.uniform(-kPi, kPi)};
    const Box3D b{rng.uniform(-1.5, 1.5), rng.uniform(0.5, 1.5), 10 + rng.uniform(-1.5, 1.5),
                  {rng.uniform(1, 2), rng.uniform(1, 2), rng.uniform(2, 5)}, rng.uniform(-kPi, kPi)};
    EXPECT_NEAR(bev_iou(a, b), fixtures::mc_bev_iou(a, b, 200000), 1e-3);
    EXPECT_NEAR(iou_3d(a, b), fixtures::mc_iou_3d(a, b, 200000), 1e-3);
  }
}

TEST(Iou3d, RaisedByHalfHeight) {
  const Box3D a{0, 2, 10, {2, 2, 4}, 0.4};
  Box3D b = a;
  b.y -= 1.0;
  EXPECT_NEAR(iou_3d(a, b), 1.0 / 3.0, 1e-12);
}

TEST(Iou2d, Boxes) {
  EXPECT_EQ(iou_2d({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
  EXPECT_NEAR(iou_2d({0, 0, 10, 10}, {5, 0, 15, 10}), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(iou_2d({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
}

TEST(Difficulty, KittiBins) {
  GtObject g;
  g.bbox2d = {0, 0, 10, 50};
  EXPECT_EQ(assign_difficulty(g), Difficulty::Easy);
  g.bbox2d = {0, 0, 10, 30};
  g.occluded = 1;
  g.truncated = 0.2;
  EXPECT_EQ(assign_difficulty(g), Difficulty::Moderate);
  g.occluded = 2;
  g.truncated = 0.4;
  EXPECT_EQ(assign_difficulty(g), Difficulty::Hard);
  g.bbox2d = {0, 0, 10, 20};
  EXPECT_EQ(assign_difficulty(g), Difficulty::Ignored);
}

TEST(AP, PerfectDetections) {
  std::vector<GtObject> gts;
  std::vector<Detection> dets;
  for (int i = 0; i < 6; ++i) {
    gts.push_back(easy_gt(car(-12.0 + 5 * i, 20 + i)));
    dets.push_back(det(car(-12.0 + 5 * i, 20 + i), 0.1 + 0.13 * i));
  }
  EvalConfig cfg;
  for (RecallPoints rp : {RecallPoints::R11, RecallPoints::R40}) {
    cfg.recall_points = rp;
    EXPECT_EQ(ap_from_matches(gts, dets, cfg, Difficulty::Easy).ap, 1.0);
  }
}

TEST(AP, NoDetections) {
  const std::vector<GtObject> gts{easy_gt(car(0, 20))};
  EvalConfig cfg;
  EXPECT_EQ(ap_from_matches(gts, {}, cfg, Difficulty::Easy).ap, 0.0);
  cfg.recall_points = RecallPoints::R11;
  EXPECT_EQ(ap_from_matches(gts, {}, cfg, Difficulty::Easy).ap, 0.0);
}

TEST(AP, HandBuiltFixtureMatchesBruteForceOracle) {
  const auto gts = load_gt("ap_fixture/gt/000000.txt");
  const auto dets = load_det("ap_fixture/det/000000.txt");
  ASSERT_EQ(gts.size(), 5u);
  ASSERT_EQ(dets.size(), 7u);
  EvalConfig cfg;
  EXPECT_NEAR(ap_from_matches(gts, dets, cfg, Difficulty::Easy).ap, 11.0 / 14.0, 1e-12);
  cfg.recall_points = RecallPoints::R11;
  EXPECT_NEAR(ap_from_matches(gts, dets, cfg, Difficulty::Easy).ap, 62.0 / 77.0, 1e-12);
  cfg.metric = IouMetric::IoUBEV;
  EXPECT_NEAR(ap_from_matches(gts, dets, cfg, Difficulty::Easy).ap, 62.0 / 77.0, 1e-12);
}

TEST(AP, DontCareAbsorbsDetections) {
  std::vector<GtObject> gts{easy_gt(car(0, 20))};
  GtObject dc;
  dc.cls = "DontCare";
  dc.bbox2d = {400, 100, 500, 160};
  gts.push_back(dc);
  std::vector<Detection> dets{det(car(0, 20), 0.5)};
  Detection in_dc = det(car(8, 30), 0.9);
  in_dc.bbox2d = BBox2D{410, 105, 495, 158};
  dets.push_back(in_dc);
  EXPECT_EQ(ap_from_matches(gts, dets, EvalConfig{}, Difficulty::Easy).ap, 1.0);
  gts.pop_back();
  EXPECT_LT(ap_from_matches(gts, dets, EvalConfig{}, Difficulty::Easy).ap, 1.0);
}

TEST(AP, HarderObjectsAreIgnoredNotMissed) {
  GtObject hard = easy_gt(car(5, 30));
  hard.occluded = 2;
  hard.truncated = 0.4;
  const std::vector<GtObject> gts{easy_gt(car(0, 20)), hard};
  const std::vector<Detection> dets{det(car(0, 20), 0.5), det(car(5, 30), 0.9)};
  EXPECT_EQ(ap_from_matches(gts, dets, EvalConfig{}, Difficulty::Easy).ap, 1.0);
  EXPECT_EQ(ap_from_matches(gts, dets, EvalConfig{}, Difficulty::Hard).ap, 1.0);
}

TEST(Evaluate, FramesAndConfig) {
  std::map<std::string, std::vector<GtObject>> gts{{"000000", {easy_gt(car(0, 20))}},
                                                    {"000001", {easy_gt(car(3, 25))}}};
  std::map<std::string, std::vector<Detection>> dets{{"000000", {det(car(0, 20), 1.0)}},
                                                     {"000001", {det(car(3, 25), 1.0)}}};
  const EvalReport r = evaluate(gts, dets, EvalConfig{});
  for (int d = 0; d < 3; ++d) EXPECT_EQ(r.per_difficulty[d].ap, 1.0);
  EXPECT_EQ(r.num_gt[0], 2);
  EXPECT_EQ(r.per_difficulty[0].points.size(), 40u);

  const EvalReport empty = evaluate(gts, {}, EvalConfig{});
  for (int d = 0; d < 3; ++d) EXPECT_EQ(empty.per_difficulty[d].ap, 0.0);

  dets["000009"] = {};
  try {
    evaluate(gts, dets, EvalConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FrameMismatch);
    EXPECT_NE(std::string(e.what()).find("000009"), std::string::npos);
  }
  EvalConfig bad;
  bad.iou_threshold = 1.5;
  EXPECT_THROW(validate(bad), Error);
}
