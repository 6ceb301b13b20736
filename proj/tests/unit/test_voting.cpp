#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "rplift/angles.hpp"
#include "rplift/error.hpp"
#include "rplift/random.hpp"
#include "rplift/synth.hpp"
#include "rplift/voting.hpp"
#include "test_support.hpp"

using namespace rplift;

namespace {

CameraModel small_camera() { return CameraModel(PinholeIntrinsics{400, 400, 320, 120, 640, 240}); }

Box3D centered_box() { return Box3D{0.3, 0.8, 12, {1.6, 1.7, 4.2}, 0.4}; }

RenderedScene one_box(RPLayout layout, const Box3D& box = centered_box()) {
  return render_scene(SceneSpec{small_camera(), {box}, 1, layout, true});
}

}  // namespace

TEST(Offsets, RelToAbs) {
  const Pixel a = rel_to_abs(0, 0, 100, 50);
  EXPECT_EQ(a.u, 100);
  EXPECT_EQ(a.v, 50);
  const Pixel b = rel_to_abs(-120, 30, 100, 50);
  EXPECT_EQ(b.u, -20);
  EXPECT_EQ(b.v, 80);
}

TEST(Offsets, DyadicPointsRoundTripExactly) {
  Rng rng(31);
  for (int i = 0; i < 10000; ++i) {
    const Pixel p{std::ldexp(std::floor(rng.uniform(-4e5, 2e6)), -10), std::ldexp(std::floor(rng.uniform(-4e5, 1e6)), -10)};
    const int u = static_cast<int>(rng.index(1242)), v = static_cast<int>(rng.index(375));
    const Pixel q = rel_to_abs(p.u - u, p.v - v, u, v);
    EXPECT_EQ(q.u, p.u);
    EXPECT_EQ(q.v, p.v);
  }
}

TEST(Offsets, EveryPixelRecoversTheSameReferencePoint) {
  const RenderedScene scene = one_box(RPLayout::EightRP);
  const RenderedObject& obj = scene.objects[0];
  for (int v = 0; v < scene.mask.height; ++v) {
    for (int u = 0; u < scene.mask.width; ++u) {
      if (scene.mask.at(u, v) != obj.id) continue;
      for (int j = 0; j < 8; ++j) {
        const Pixel p = rel_to_abs(scene.maps.at(AttributeMaps::offset_u_channel(j), u, v),
                                   scene.maps.at(AttributeMaps::offset_v_channel(j), u, v), u, v);
        ASSERT_NEAR(p.u, obj.rps[j].u, 1e-9);
        ASSERT_NEAR(p.v, obj.rps[j].v, 1e-9);
      }
    }
  }
}

TEST(Mask, InstanceIds) {
  InstanceMask mask(4, 3);
  mask.at(0, 0) = 7;
  mask.at(3, 2) = 2;
  mask.at(1, 1) = 7;
  EXPECT_EQ(mask.instance_ids(), (std::vector<InstanceId>{2, 7}));
}

TEST(Aggregate, ConstantVotes) {
  InstanceMask mask(5, 5);
  AttributeMaps maps(5, 5, RPLayout::TwoRP, true);
  const AngleEncoding enc = encode_viewing_angle(0.25, true);
  for (int v = 1; v < 4; ++v) {
    for (int u = 1; u < 4; ++u) {
      mask.at(u, v) = 1;
      maps.at(0, u, v) = 1.55;
      maps.at(1, u, v) = 1.7;
      maps.at(2, u, v) = 4.1;
      for (int j = 0; j < 2; ++j) {
        maps.at(AttributeMaps::offset_u_channel(j), u, v) = 2.0 - u;
        maps.at(AttributeMaps::offset_v_channel(j), u, v) = (j == 0 ? -3.0 : 7.0) - v;
      }
      maps.at(maps.angle_channel(0), u, v) = enc.c2;
      maps.at(maps.angle_channel(1), u, v) = enc.s2;
      maps.at(maps.angle_channel(2), u, v) = enc.c1;
      maps.at(maps.angle_channel(3), u, v) = enc.s1;
    }
  }
  // With a very long focal length every pixel bearing is ~1e-9 rad, so the
  // per-pixel yaws agree to that level; dims and points are exactly constant.
  const CameraModel cam(PinholeIntrinsics{1e9, 1e9, 2, 2, 5, 5});
  const AggregatedInstance a = aggregate_instance(mask, maps, 1, cam);
  EXPECT_EQ(a.pixel_count, 9);
  EXPECT_FALSE(a.low_support);
  EXPECT_EQ(a.dims.h, 1.55);
  EXPECT_EQ(a.dims.w, 1.7);
  EXPECT_EQ(a.dims.l, 4.1);
  for (const auto& d : a.dims_votes) EXPECT_EQ(d.std, 0.0);
  EXPECT_EQ(a.rps_abs[0].u, 2.0);
  EXPECT_EQ(a.rps_abs[0].v, -3.0);
  EXPECT_EQ(a.rps_abs[1].v, 7.0);
  for (const auto& p : a.rp_votes) {
    EXPECT_EQ(p[0].std, 0.0);
    EXPECT_EQ(p[1].std, 0.0);
  }
  ASSERT_TRUE(a.ry.has_value());
  EXPECT_NEAR(*a.ry, 0.25, 1e-8);
  EXPECT_NEAR(a.confidence, 1.0, 1e-7);
}

TEST(Aggregate, TwoPixelStatistics) {
  InstanceMask mask(2, 1);
  AttributeMaps maps(2, 1, RPLayout::EightRP, false);
  mask.at(0, 0) = mask.at(1, 0) = 4;
  maps.at(0, 0, 0) = 1.4;
  maps.at(0, 1, 0) = 1.6;
  for (int u = 0; u < 2; ++u) maps.at(1, u, 0) = maps.at(2, u, 0) = 2.0;
  const AggregatedInstance a = aggregate_instance(mask, maps, 4, small_camera());
  EXPECT_NEAR(a.dims.h, 1.5, 1e-15);
  EXPECT_NEAR(a.dims_votes[0].std, 0.1, 1e-15);
  EXPECT_EQ(a.dims_votes[0].count, 2);
  EXPECT_TRUE(a.low_support);
  EXPECT_FALSE(a.ry.has_value());
}

TEST(Aggregate, PerfectMapsMatchGroundTruth) {
  const CameraModel cam = small_camera();
  std::vector<Box3D> boxes;
  for (int i = 0; i < 5; ++i) {
    boxes.push_back(Box3D{-6.0 + 3.0 * i, 0.8, 14.0 + 4.0 * i, {1.5 + 0.05 * i, 1.6, 3.8 + 0.1 * i}, -1.0 + 0.5 * i});
  }
  const RenderedScene scene = render_scene(SceneSpec{cam, boxes, 2, RPLayout::EightRP, true});
  const auto aggs = aggregate_all(scene.mask, scene.maps, cam);
  ASSERT_EQ(aggs.size(), 5u);
  for (const AggregatedInstance& a : aggs) {
    const RenderedObject& obj = scene.objects[a.id - 1];
    EXPECT_NEAR(a.dims.h, obj.box.dims.h, 1e-9);
    EXPECT_NEAR(a.dims.w, obj.box.dims.w, 1e-9);
    EXPECT_NEAR(a.dims.l, obj.box.dims.l, 1e-9);
    for (int j = 0; j < 8; ++j) {
      EXPECT_NEAR(a.rps_abs[j].u, obj.rps[j].u, 1e-9);
      EXPECT_NEAR(a.rps_abs[j].v, obj.rps[j].v, 1e-9);
    }
    ASSERT_TRUE(a.ry.has_value());
    EXPECT_LT(angle_distance(*a.ry, obj.box.ry), 1e-9);
    EXPECT_EQ(a.pixel_count, obj.pixel_count);
  }
}

TEST(Aggregate, PixelOrderDoesNotMatter) {
  Rng rng(32);
  std::vector<double> votes(40);
  for (double& v : votes) v = rng.uniform(1.0, 2.0);
  auto build = [&](const std::vector<int>& placement) {
    InstanceMask mask(8, 5);
    AttributeMaps maps(8, 5, RPLayout::EightRP, false);
    for (int i = 0; i < 40; ++i) {
      const int u = placement[i] % 8, v = placement[i] / 8;
      mask.at(u, v) = 1;
      maps.at(0, u, v) = votes[i];
      maps.at(1, u, v) = maps.at(2, u, v) = 1.0;
    }
    return aggregate_instance(mask, maps, 1, small_camera());
  };
  std::vector<int> order(40);
  std::iota(order.begin(), order.end(), 0);
  const AggregatedInstance a = build(order);
  for (int t = 0; t < 20; ++t) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    const AggregatedInstance b = build(order);
    EXPECT_EQ(a.dims.h, b.dims.h);
    EXPECT_EQ(a.dims_votes[0].std, b.dims_votes[0].std);
  }
}

TEST(Aggregate, Errors) {
  const RenderedScene scene = one_box(RPLayout::TwoRP);
  const CameraModel cam = small_camera();
  try {
    aggregate_instance(scene.mask, scene.maps, 9, cam);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownInstance);
  }
  AttributeMaps wrong(10, 10, RPLayout::TwoRP, true);
  try {
    aggregate_instance(scene.mask, wrong, 1, cam);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SizeMismatch);
  }
  const RenderedScene bare = render_scene(SceneSpec{cam, {centered_box()}, 1, RPLayout::TwoRP, false});
  try {
    lift_instances(bare.mask, bare.maps, cam);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingAngles);
  }
}

TEST(Aggregate, ThreadCountDoesNotChangeResults) {
  const CameraModel cam = small_camera();
  std::vector<Box3D> boxes;
  for (int i = 0; i < 6; ++i) boxes.push_back(Box3D{-7.0 + 2.8 * i, 0.8, 15.0 + 3 * i, {1.5, 1.6, 4.0}, 0.3 * i});
  const RenderedScene scene = render_scene(SceneSpec{cam, boxes, 3, RPLayout::EightRP, true});
  const AttributeMaps noisy = perturb(scene.mask, scene.maps, NoiseSpec{0.05, 1.0, 0.05, 0.1}, 3);
  const auto one = aggregate_all(scene.mask, noisy, cam, {}, 1);
  const auto four = aggregate_all(scene.mask, noisy, cam, {}, 4);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].dims.h, four[i].dims.h);
    EXPECT_EQ(one[i].rps_abs[3].u, four[i].rps_abs[3].u);
    EXPECT_EQ(*one[i].ry, *four[i].ry);
    EXPECT_EQ(one[i].confidence, four[i].confidence);
  }
}

TEST(Lift, EmptyInput) {
  const LiftResult r = instances_to_boxes({}, small_camera(), RPLayout::EightRP);
  EXPECT_TRUE(r.objects.empty());
  EXPECT_TRUE(r.failures.empty());
}

TEST(Lift, PerfectTwoPointInstance) {
  const Box3D gt{0.3, 0.8, 12, {1.6, 1.7, 4.2}, 0.4};
  const RenderedScene scene = one_box(RPLayout::TwoRP, gt);
  const LiftResult r = lift_instances(scene.mask, scene.maps, small_camera());
  ASSERT_EQ(r.objects.size(), 1u);
  EXPECT_LT((r.objects[0].box.bottom_center() - gt.bottom_center()).norm(), 1e-6);
  EXPECT_LT(angle_distance(r.objects[0].box.ry, gt.ry), 1e-6);
  EXPECT_FALSE(r.objects[0].lm.has_value());
}

TEST(Lift, PerfectEightPointInstanceWithoutAngles) {
  const Box3D gt{-1.0, 1.65, 18, {1.5, 1.6, 3.9}, -2.0};
  const RenderedScene scene = render_scene(SceneSpec{small_camera(), {gt}, 1, RPLayout::EightRP, false});
  const LiftResult r = lift_instances(scene.mask, scene.maps, small_camera());
  ASSERT_EQ(r.objects.size(), 1u);
  EXPECT_LT((r.objects[0].box.bottom_center() - gt.bottom_center()).norm(), 1e-6);
  EXPECT_LT(angle_distance(r.objects[0].box.ry, gt.ry), 1e-6);
  ASSERT_TRUE(r.objects[0].lm.has_value());
}

TEST(Lift, VotingBeatsSinglePixelsUnderCornerOcclusion) {
  const CameraModel cam = small_camera();
  const Box3D gt{0.5, 0.8, 15, {1.6, 1.7, 4.2}, 0.6};
  const RenderedScene scene = one_box(RPLayout::EightRP, gt);
  AttributeMaps maps = scene.maps;
  std::vector<std::pair<int, int>> pixels;
  for (int v = 0; v < scene.mask.height; ++v) {
    for (int u = 0; u < scene.mask.width; ++u) {
      if (scene.mask.at(u, v) == 1) pixels.emplace_back(u, v);
    }
  }
  Rng rng(33);
  for (std::size_t i = pixels.size(); i > 1; --i) std::swap(pixels[i - 1], pixels[rng.index(i)]);
  const std::size_t corrupted = pixels.size() * 3 / 10;
  for (std::size_t i = 0; i < corrupted; ++i) {
    const auto [u, v] = pixels[i];
    maps.at(AttributeMaps::offset_u_channel(0), u, v) += rng.uniform(15, 40);
    maps.at(AttributeMaps::offset_v_channel(0), u, v) -= rng.uniform(15, 40);
  }
  const LiftResult voted = lift_instances(scene.mask, maps, cam);
  ASSERT_EQ(voted.objects.size(), 1u);
  const double voted_err = (voted.objects[0].box.center() - gt.center()).norm();

  int worse = 0, checked = 0;
  for (std::size_t i = 0; i < std::min<std::size_t>(corrupted, 50); ++i) {
    InstanceMask single(scene.mask.width, scene.mask.height);
    single.at(pixels[i].first, pixels[i].second) = 1;
    const LiftResult r = lift_instances(single, maps, cam);
    if (r.objects.empty()) continue;
    ++checked;
    worse += (r.objects[0].box.center() - gt.center()).norm() > voted_err;
  }
  EXPECT_GT(checked, 0);
  EXPECT_EQ(worse, checked);
}
