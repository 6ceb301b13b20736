#include "rplift/geom.hpp"

#include <cmath>
#include <string>

#include "rplift/error.hpp"

namespace rplift {

void validate(const Dimensions& dims) {
  auto ok = [](double v) { return v > 0.0 && v < 100.0; };
  if (!ok(dims.h) || !ok(dims.w) || !ok(dims.l)) {
    throw Error(ErrorCode::InvalidArgument, "dimensions must lie in (0, 100) m");
  }
}

Eigen::Matrix3d yaw_rotation(double ry) {
  const double c = std::cos(ry), s = std::sin(ry);
  Eigen::Matrix3d r;
  r << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return r;
}

std::array<Vec3, 8> box_corners_3d(const Box3D& box) {
  const Eigen::Matrix3d rot = yaw_rotation(box.ry);
  const Vec3 t = box.bottom_center();
  std::array<Vec3, 8> corners;
  for (int j = 0; j < 8; ++j) {
    const double sx = (j & 4) ? 1.0 : -1.0;
    const double sy = (j & 2) ? 1.0 : 0.0;
    const double sz = (j & 1) ? 1.0 : -1.0;
    const Vec3 local(sx * 0.5 * box.dims.l, -sy * box.dims.h, sz * 0.5 * box.dims.w);
    corners[j] = rot * local + t;
  }
  return corners;
}

std::vector<Vec3> box_reference_points_3d(const Box3D& box, RPLayout layout) {
  if (layout == RPLayout::TwoRP) {
    return {Vec3(box.x, box.y - box.dims.h, box.z), Vec3(box.x, box.y, box.z)};
  }
  const auto corners = box_corners_3d(box);
  return {corners.begin(), corners.end()};
}

RefPoints2D project_reference_points(const CameraModel& cam, const Box3D& box, RPLayout layout) {
  RefPoints2D out;
  for (const Vec3& p : box_reference_points_3d(box, layout)) out.push_back(cam.project(p));
  return out;
}

AngleEncoding encode_viewing_angle(double alpha, bool with_heading) {
  AngleEncoding enc;
  enc.c2 = std::cos(2.0 * alpha);
  enc.s2 = std::sin(2.0 * alpha);
  enc.has_heading = with_heading;
  if (with_heading) {
    enc.c1 = std::cos(alpha);
    enc.s1 = std::sin(alpha);
  }
  return enc;
}

double decode_viewing_angle(const AngleEncoding& enc) {
  if (std::hypot(enc.c2, enc.s2) < 1e-6) {
    throw Error(ErrorCode::DegenerateEncoding, "(cos 2a, sin 2a) has norm below 1e-6");
  }
  // atan2 lies in (-pi, pi], so base lies in (-pi/2, pi/2].
  const double base = 0.5 * std::atan2(enc.s2, enc.c2);
  if (!enc.has_heading) return base;
  // The two candidates are antipodal, so comparing against base alone decides.
  const double dot = std::cos(base) * enc.c1 + std::sin(base) * enc.s1;
  return dot >= 0.0 ? normalize_angle(base) : normalize_angle(base + kPi);
}

double alpha_to_yaw(double alpha, double theta_ray) { return normalize_angle(alpha + theta_ray); }

double yaw_to_alpha(double ry, double theta_ray) { return normalize_angle(ry - theta_ray); }

Box3D lift_two_point(const CameraModel& cam, const Pixel& top, const Pixel& bottom, const Dimensions& dims,
                     double ry) {
  validate(dims);
  const Ray a = cam.pixel_to_ray(top);
  const Ray b = cam.pixel_to_ray(bottom);
  const double beta = angle_between_rays(a, b);
  if (beta < 1e-9) throw Error(ErrorCode::DegenerateGeometry, "top and bottom rays coincide");
  const double d = dims.h / (2.0 * std::tan(0.5 * beta));
  const Vec3 bisector = (a.vec() + b.vec()).normalized();
  const Vec3 center = d * bisector;
  Box3D box;
  box.x = center.x();
  box.y = center.y() + 0.5 * dims.h;
  box.z = center.z();
  box.dims = dims;
  box.ry = normalize_angle(ry);
  return box;
}

Eigen::VectorXd reprojection_residual(const CameraModel& cam, const Box3D& box, std::span<const Pixel> predicted) {
  if (predicted.size() != 8) {
    throw Error(ErrorCode::InvalidArgument,
                "reprojection residual needs 8 predicted points, got " + std::to_string(predicted.size()));
  }
  const auto corners = box_corners_3d(box);
  Eigen::VectorXd r(16);
  for (int j = 0; j < 8; ++j) {
    const Pixel p = cam.project(corners[j]);
    r[2 * j] = p.u - predicted[j].u;
    r[2 * j + 1] = p.v - predicted[j].v;
  }
  return r;
}

}  // namespace rplift
