#include <cmath>

#include <gtest/gtest.h>

#include "rplift/angles.hpp"
#include "rplift/camera.hpp"
#include "rplift/error.hpp"
#include "rplift/random.hpp"

using namespace rplift;

namespace {

CameraModel pinhole_1000() { return CameraModel(PinholeIntrinsics{1000, 1000, 600, 300, 1200, 600}); }

CameraModel fisheye() {
  EquidistantFisheye f;
  f.fx = 300;
  f.fy = 310;
  f.cx = 320;
  f.cy = 240;
  f.k = {0.05, -0.01, 0.002, -0.0005};
  f.width = 640;
  f.height = 480;
  f.max_theta = 1.4;
  return CameraModel(f);
}

CameraModel equirect() { return CameraModel(EquirectangularCamera{2000, 1000, kTwoPi, kPi, 0.0, 0.0}); }

void expect_ray(const Ray& r, const Vec3& expected) {
  const Vec3 e = expected.normalized();
  EXPECT_NEAR(r.dx, e.x(), 1e-15);
  EXPECT_NEAR(r.dy, e.y(), 1e-15);
  EXPECT_NEAR(r.dz, e.z(), 1e-15);
}

}  // namespace

TEST(Pinhole, PrincipalPointIsOpticalAxis) { expect_ray(pinhole_1000().pixel_to_ray({600, 300}), {0, 0, 1}); }

TEST(Pinhole, FortyFiveDegreesDown) { expect_ray(pinhole_1000().pixel_to_ray({600, 1300}), {0, 1, 1}); }

TEST(Pinhole, ProjectsOnAxisAndOffAxisPoints) {
  const Pixel a = project_point(pinhole_1000(), {0, 0, 10});
  EXPECT_EQ(a.u, 600.0);
  EXPECT_EQ(a.v, 300.0);
  const Pixel b = project_point(pinhole_1000(), {1, 0, 10});
  EXPECT_EQ(b.u, 700.0);
  EXPECT_EQ(b.v, 300.0);
}

TEST(Pinhole, RejectsPointsBehindTheCamera) {
  try {
    pinhole_1000().project({0, 0, -1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BehindCamera);
  }
}

TEST(Pinhole, ValidatesIntrinsics) {
  EXPECT_THROW(CameraModel(PinholeIntrinsics{0, 1000, 600, 300, 1200, 600}), Error);
  EXPECT_THROW(CameraModel(PinholeIntrinsics{1000, 1000, 600, 300, 0, 600}), Error);
  EXPECT_THROW(CameraModel(PinholeIntrinsics{NAN, 1000, 600, 300, 1200, 600}), Error);
}

TEST(Pinhole, WarnsWhenPrincipalPointLeavesImage) {
  EXPECT_FALSE(pinhole_1000().warning().has_value());
  EXPECT_TRUE(CameraModel(PinholeIntrinsics{1000, 1000, 1500, 300, 1200, 600}).warning().has_value());
}

TEST(Pinhole, FromHorizontalFov) {
  const CameraModel cam = pinhole_from_hfov(kPi / 2, 800, 400);
  const auto& p = std::get<PinholeIntrinsics>(cam.model());
  EXPECT_NEAR(p.fx, 400.0, 1e-12);
  EXPECT_NEAR(p.fy, 400.0, 1e-12);
  EXPECT_EQ(p.cx, 400.0);
  EXPECT_EQ(p.cy, 200.0);
  EXPECT_THROW(pinhole_from_hfov(kPi, 800, 400), Error);
}

TEST(Fisheye, PixelRayRoundTrip) {
  const CameraModel cam = fisheye();
  for (int v = 0; v <= 480; v += 40) {
    for (int u = 0; u <= 640; u += 40) {
      Ray r;
      try {
        r = cam.pixel_to_ray({double(u), double(v)});
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfDomain);
        continue;
      }
      const Pixel p = cam.project(5.0 * r.vec());
      EXPECT_NEAR(p.u, u, 1e-6);
      EXPECT_NEAR(p.v, v, 1e-6);
    }
  }
}

TEST(Fisheye, CenterPixelIsOpticalAxis) { expect_ray(fisheye().pixel_to_ray({320, 240}), {0, 0, 1}); }

TEST(Fisheye, OutsideFieldOfViewIsOutOfDomain) {
  try {
    fisheye().project({1, 0, 0.01});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfDomain);
  }
}

TEST(Fisheye, RejectsNonMonotonicDistortion) {
  EquidistantFisheye f;
  f.fx = f.fy = 300;
  f.cx = 320;
  f.cy = 240;
  f.width = 640;
  f.height = 480;
  f.k = {-1.0, 0, 0, 0};
  f.max_theta = 1.5;
  EXPECT_THROW(CameraModel{f}, Error);
}

TEST(Equirect, ForwardMapsToImageCenter) {
  const Pixel p = project_point(equirect(), {0, 0, 10});
  EXPECT_EQ(p.u, 1000.0);
  EXPECT_EQ(p.v, 500.0);
}

TEST(Equirect, PixelRayRoundTrip) {
  const CameraModel cam = CameraModel(EquirectangularCamera{1024, 512, kPi, kPi / 2, 0.1, -0.05});
  for (int v = 10; v < 512; v += 50) {
    for (int u = 10; u < 1024; u += 50) {
      const Pixel p = cam.project(7.0 * cam.pixel_to_ray({double(u), double(v)}).vec());
      EXPECT_NEAR(p.u, u, 1e-9);
      EXPECT_NEAR(p.v, v, 1e-9);
    }
  }
}

TEST(Rays, AngleBetween) {
  EXPECT_EQ(angle_between_rays({0, 0, 1}, {0, 0, 1}), 0.0);
  const double s = std::sqrt(0.5);
  EXPECT_NEAR(angle_between_rays({0, -s, s}, {0, s, s}), kPi / 2, 1e-15);
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Ray a = Ray::from_direction({rng.normal(), rng.normal(), rng.normal()});
    const Ray b = Ray::from_direction({rng.normal(), rng.normal(), rng.normal()});
    const double dot = a.dx * b.dx + a.dy * b.dy + a.dz * b.dz;
    EXPECT_NEAR(angle_between_rays(a, b), std::acos(std::clamp(dot, -1.0, 1.0)), 1e-12);
  }
}

TEST(Rays, YawOffset) {
  EXPECT_EQ(ray_yaw_offset({0, 0, 1}), 0.0);
  const double s = std::sqrt(0.5);
  EXPECT_NEAR(ray_yaw_offset({s, 0, s}), kPi / 4, 1e-15);
  const CameraModel cam = pinhole_1000();
  for (int u = 0; u <= 1200; u += 100) {
    for (int v = 0; v <= 600; v += 150) {
      EXPECT_NEAR(ray_yaw_offset(cam.pixel_to_ray({double(u), double(v)})), std::atan2((u - 600.0) / 1000.0, 1.0),
                  1e-12);
    }
  }
  EXPECT_THROW(ray_yaw_offset({0, 1, 0}), Error);
}

TEST(Rays, FromDirectionRejectsZero) { EXPECT_THROW(Ray::from_direction({0, 0, 0}), Error); }

class JacobianTest : public ::testing::TestWithParam<int> {};

TEST_P(JacobianTest, MatchesCentralDifferences) {
  const CameraModel cams[] = {pinhole_1000(), fisheye(), CameraModel(EquirectangularCamera{1024, 512, kPi, kPi / 2, 0.1, -0.05})};
  const CameraModel& cam = cams[GetParam()];
  Rng rng(5 + GetParam());
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(rng.uniform(-3, 3), rng.uniform(-2, 2), rng.uniform(4, 30));
    const Eigen::Matrix<double, 2, 3> j = cam.project_jacobian(p);
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(p[k]));
      Vec3 hi = p, lo = p;
      hi[k] += h;
      lo[k] -= h;
      const Pixel a = cam.project(hi), b = cam.project(lo);
      const double du = (a.u - b.u) / (2 * h), dv = (a.v - b.v) / (2 * h);
      EXPECT_NEAR(j(0, k), du, 1e-4 * std::max(1.0, std::abs(du)));
      EXPECT_NEAR(j(1, k), dv, 1e-4 * std::max(1.0, std::abs(dv)));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllModels, JacobianTest, ::testing::Values(0, 1, 2));
