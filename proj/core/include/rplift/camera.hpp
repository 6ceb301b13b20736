#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Core>

namespace rplift {

using Vec3 = Eigen::Vector3d;

// Camera frame: x right, y down, z forward.

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct Ray {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 1.0;

  Vec3 vec() const { return {dx, dy, dz}; }

  // Normalizes `direction`; throws Degenerate for a zero vector.
  static Ray from_direction(const Vec3& direction);
};

struct PinholeIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
};

// Equidistant fisheye: theta_d = theta (1 + k1 theta^2 + k2 theta^4 + k3 theta^6 + k4 theta^8),
// pixel = (fx, fy) * theta_d * (x, y) / r + (cx, cy) with r = hypot(x, y).
struct EquidistantFisheye {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  std::array<double, 4> k{0.0, 0.0, 0.0, 0.0};
  int width = 1;
  int height = 1;
  // Half field of view in radians; the distortion polynomial must be
  // increasing on [0, max_theta].
  double max_theta = 1.5707963267948966;
};

// Azimuth and elevation are linear in u and v respectively.
struct EquirectangularCamera {
  int width = 1;
  int height = 1;
  double hfov = 6.283185307179586;
  double vfov = 3.141592653589793;
  double yaw0 = 0.0;
  double pitch0 = 0.0;
};

// A validated camera. All intrinsics in the pipeline live here; everything
// downstream only sees rays and projections.
class CameraModel {
 public:
  using Model = std::variant<PinholeIntrinsics, EquidistantFisheye, EquirectangularCamera>;

  // Each constructor validates its model and throws InvalidArgument on a
  // violated invariant.
  CameraModel(const PinholeIntrinsics& pinhole);
  CameraModel(const EquidistantFisheye& fisheye);
  CameraModel(const EquirectangularCamera& equirect);

  const Model& model() const noexcept { return model_; }
  int width() const noexcept;
  int height() const noexcept;
  bool is_pinhole() const noexcept { return std::holds_alternative<PinholeIntrinsics>(model_); }

  Ray pixel_to_ray(const Pixel& px) const;
  Pixel project(const Vec3& p) const;
  // d(u, v) / d(x, y, z) at p.
  Eigen::Matrix<double, 2, 3> project_jacobian(const Vec3& p) const;

  // Set when the principal point lies outside the image (legal after crops).
  const std::optional<std::string>& warning() const noexcept { return warning_; }

 private:
  Model model_;
  std::optional<std::string> warning_;
};

// Pinhole camera with square pixels and a centered principal point.
CameraModel pinhole_from_hfov(double hfov, int width, int height);

Ray pixel_to_ray(const CameraModel& cam, double u, double v);
Pixel project_point(const CameraModel& cam, const Vec3& p);

// Angle in [0, pi] between two unit rays.
double angle_between_rays(const Ray& a, const Ray& b);

// Horizontal bearing atan2(dx, dz), positive to the right.
double ray_yaw_offset(const Ray& r);

}  // namespace rplift
