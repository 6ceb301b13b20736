#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rplift/angles.hpp"
#include "rplift/camera.hpp"

namespace rplift {

// Object extent in meters.
struct Dimensions {
  double h = 1.0;
  double w = 1.0;
  double l = 1.0;
};

// Throws InvalidArgument unless 0 < h, w, l < 100.
void validate(const Dimensions& dims);

// Upright box. (x, y, z) is the bottom-face center in the camera frame and
// ry is the yaw about the camera y-axis.
struct Box3D {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;
  Dimensions dims;
  double ry = 0.0;

  Vec3 bottom_center() const { return {x, y, z}; }
  Vec3 center() const { return {x, y - 0.5 * dims.h, z}; }
};

enum class RPLayout { TwoRP = 2, EightRP = 8 };

constexpr int num_reference_points(RPLayout layout) { return static_cast<int>(layout); }

using RefPoints2D = std::vector<Pixel>;

// (c2, s2) = (cos 2a, sin 2a); (c1, s1) = (cos a, sin a) when has_heading.
struct AngleEncoding {
  double c2 = 1.0;
  double s2 = 0.0;
  bool has_heading = false;
  double c1 = 1.0;
  double s1 = 0.0;
};

// Corner order shared by every consumer (residuals, file formats, voting).
// In the object frame, with the bottom center at the origin and before yaw,
// corner j = 4*ix + 2*iy + iz has coordinates
//   (sx * l/2, -sy * h, sz * w/2),  sx = ix ? +1 : -1,  sy = iy,  sz = iz ? +1 : -1
//
//   j  | sx  sy  sz | face
//   0  | -1   0  -1 | bottom
//   1  | -1   0  +1 | bottom
//   2  | -1   1  -1 | top
//   3  | -1   1  +1 | top
//   4  | +1   0  -1 | bottom
//   5  | +1   0  +1 | bottom
//   6  | +1   1  -1 | top
//   7  | +1   1  +1 | top
//
// The object x-axis (length) maps to (cos ry, 0, -sin ry) in the camera frame.
inline constexpr std::array<int, 4> kBottomCorners{0, 1, 4, 5};
inline constexpr std::array<int, 4> kTopCorners{2, 3, 6, 7};

// Object-to-camera rotation about +y.
Eigen::Matrix3d yaw_rotation(double ry);

std::array<Vec3, 8> box_corners_3d(const Box3D& box);

// TwoRP: [top center, bottom center]; EightRP: box_corners_3d order.
std::vector<Vec3> box_reference_points_3d(const Box3D& box, RPLayout layout);

RefPoints2D project_reference_points(const CameraModel& cam, const Box3D& box, RPLayout layout);

AngleEncoding encode_viewing_angle(double alpha, bool with_heading);

// Returns alpha in (-pi, pi]. Without heading channels the result is only
// defined modulo pi and lies in (-pi/2, pi/2]. Throws DegenerateEncoding if
// |(c2, s2)| < 1e-6.
double decode_viewing_angle(const AngleEncoding& enc);

// ry = alpha + theta_ray, normalized.
double alpha_to_yaw(double alpha, double theta_ray);
double yaw_to_alpha(double ry, double theta_ray);

// Places the segment center at d = h / (2 tan(beta/2)) along the bisector of
// the two pixel rays, with gravity along camera +y. Exact when the top-bottom
// segment is perpendicular to the bisector and centered on it.
Box3D lift_two_point(const CameraModel& cam, const Pixel& top, const Pixel& bottom, const Dimensions& dims,
                     double ry);

// 16 residuals: residual[2j], residual[2j+1] = project(corner j) - predicted[j].
Eigen::VectorXd reprojection_residual(const CameraModel& cam, const Box3D& box, std::span<const Pixel> predicted);

}  // namespace rplift
