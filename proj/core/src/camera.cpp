#include "rplift/camera.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rplift/angles.hpp"
#include "rplift/error.hpp"

namespace rplift {

namespace {

constexpr double kMinDepth = 1e-6;
constexpr double kFisheyeTol = 1e-10;
constexpr int kFisheyeMaxIter = 50;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

double distort(const EquidistantFisheye& c, double theta) {
  const double t2 = theta * theta;
  return theta * (1.0 + t2 * (c.k[0] + t2 * (c.k[1] + t2 * (c.k[2] + t2 * c.k[3]))));
}

double distort_derivative(const EquidistantFisheye& c, double theta) {
  const double t2 = theta * theta;
  return 1.0 + t2 * (3.0 * c.k[0] + t2 * (5.0 * c.k[1] + t2 * (7.0 * c.k[2] + t2 * 9.0 * c.k[3])));
}

std::optional<std::string> principal_point_warning(double cx, double cy, int width, int height) {
  if (cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height) return std::nullopt;
  std::ostringstream os;
  os << "principal point (" << cx << ", " << cy << ") outside image " << width << "x" << height;
  return os.str();
}

// --- pinhole ---------------------------------------------------------------

Ray to_ray(const PinholeIntrinsics& c, const Pixel& px) {
  return Ray::from_direction({(px.u - c.cx) / c.fx, (px.v - c.cy) / c.fy, 1.0});
}

Pixel project_model(const PinholeIntrinsics& c, const Vec3& p) {
  if (!(p.z() > kMinDepth)) throw Error(ErrorCode::BehindCamera, "point has z <= 1e-6");
  return {c.fx * p.x() / p.z() + c.cx, c.fy * p.y() / p.z() + c.cy};
}

Eigen::Matrix<double, 2, 3> jacobian_model(const PinholeIntrinsics& c, const Vec3& p) {
  if (!(p.z() > kMinDepth)) throw Error(ErrorCode::BehindCamera, "point has z <= 1e-6");
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> j;
  j << c.fx * iz, 0.0, -c.fx * p.x() * iz * iz,
       0.0, c.fy * iz, -c.fy * p.y() * iz * iz;
  return j;
}

// --- equidistant fisheye ---------------------------------------------------

Ray to_ray(const EquidistantFisheye& c, const Pixel& px) {
  const double mx = (px.u - c.cx) / c.fx;
  const double my = (px.v - c.cy) / c.fy;
  const double theta_d = std::hypot(mx, my);
  if (theta_d < 1e-15) return Ray{0.0, 0.0, 1.0};

  double theta = std::min(theta_d, c.max_theta);
  bool converged = false;
  for (int i = 0; i < kFisheyeMaxIter; ++i) {
    const double step = (distort(c, theta) - theta_d) / distort_derivative(c, theta);
    theta -= step;
    if (std::abs(step) < kFisheyeTol) {
      converged = true;
      break;
    }
  }
  if (!converged || !std::isfinite(theta) || theta < 0.0 || theta > c.max_theta + kFisheyeTol) {
    throw Error(ErrorCode::OutOfDomain, "fisheye inverse distortion did not converge");
  }
  const double s = std::sin(theta) / theta_d;
  return Ray::from_direction({s * mx, s * my, std::cos(theta)});
}

Pixel project_model(const EquidistantFisheye& c, const Vec3& p) {
  const double r = std::hypot(p.x(), p.y());
  if (r < 1e-15 * std::abs(p.z())) {
    if (!(p.z() > 0.0)) throw Error(ErrorCode::BehindCamera, "point on the negative optical axis");
    return {c.cx, c.cy};
  }
  const double theta = std::atan2(r, p.z());
  if (theta > c.max_theta) throw Error(ErrorCode::OutOfDomain, "point outside fisheye field of view");
  const double m = distort(c, theta) / r;
  return {c.fx * m * p.x() + c.cx, c.fy * m * p.y() + c.cy};
}

Eigen::Matrix<double, 2, 3> jacobian_model(const EquidistantFisheye& c, const Vec3& p) {
  const double x = p.x(), y = p.y(), z = p.z();
  const double r = std::hypot(x, y);
  Eigen::Matrix<double, 2, 3> j;
  if (r < 1e-9 * std::abs(z)) {
    // m -> 1/z with vanishing lateral slope on the optical axis.
    if (!(z > 0.0)) throw Error(ErrorCode::BehindCamera, "point on the negative optical axis");
    j << c.fx / z, 0.0, -c.fx * x / (z * z),
         0.0, c.fy / z, -c.fy * y / (z * z);
    return j;
  }
  const double rho2 = r * r + z * z;
  const double theta = std::atan2(r, z);
  if (theta > c.max_theta) throw Error(ErrorCode::OutOfDomain, "point outside fisheye field of view");
  const double td = distort(c, theta);
  const double tdp = distort_derivative(c, theta);
  const double m = td / r;
  const Eigen::Vector3d dtheta(z * x / (r * rho2), z * y / (r * rho2), -r / rho2);
  const Eigen::Vector3d dr(x / r, y / r, 0.0);
  const Eigen::Vector3d dm = (tdp / r) * dtheta - (td / (r * r)) * dr;
  j.row(0) = c.fx * x * dm.transpose();
  j.row(1) = c.fy * y * dm.transpose();
  j(0, 0) += c.fx * m;
  j(1, 1) += c.fy * m;
  return j;
}

// --- equirectangular ------------------------------------------------------

Ray to_ray(const EquirectangularCamera& c, const Pixel& px) {
  if (!(px.u >= 0.0 && px.u <= c.width && px.v >= 0.0 && px.v <= c.height)) {
    throw Error(ErrorCode::OutOfDomain, "pixel outside equirectangular image");
  }
  const double az = (px.u / c.width - 0.5) * c.hfov + c.yaw0;
  const double el = (px.v / c.height - 0.5) * c.vfov + c.pitch0;
  return Ray::from_direction({std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)});
}

Pixel project_model(const EquirectangularCamera& c, const Vec3& p) {
  const double q = std::hypot(p.x(), p.z());
  if (q < 1e-12 && std::abs(p.y()) < 1e-12) throw Error(ErrorCode::BehindCamera, "point at camera center");
  const double az = normalize_angle(std::atan2(p.x(), p.z()) - c.yaw0);
  const double el = std::atan2(p.y(), q) - c.pitch0;
  return {(az / c.hfov + 0.5) * c.width, (el / c.vfov + 0.5) * c.height};
}

Eigen::Matrix<double, 2, 3> jacobian_model(const EquirectangularCamera& c, const Vec3& p) {
  const double x = p.x(), y = p.y(), z = p.z();
  const double q2 = x * x + z * z;
  const double q = std::sqrt(q2);
  if (q < 1e-12) throw Error(ErrorCode::Degenerate, "azimuth undefined on the vertical axis");
  const double rho2 = q2 + y * y;
  const double su = c.width / c.hfov;
  const double sv = c.height / c.vfov;
  Eigen::Matrix<double, 2, 3> j;
  j << su * z / q2, 0.0, -su * x / q2,
       -sv * y * x / (q * rho2), sv * q / rho2, -sv * y * z / (q * rho2);
  return j;
}

void validate(const PinholeIntrinsics& c) {
  require(c.fx > 0.0 && c.fy > 0.0, "pinhole focal lengths must be positive");
  require(c.width > 0 && c.height > 0, "pinhole image size must be positive");
  require(std::isfinite(c.cx) && std::isfinite(c.cy), "pinhole principal point must be finite");
}

void validate(const EquidistantFisheye& c) {
  require(c.fx > 0.0 && c.fy > 0.0, "fisheye focal lengths must be positive");
  require(c.width > 0 && c.height > 0, "fisheye image size must be positive");
  require(c.max_theta > 0.0 && c.max_theta < kPi, "fisheye max_theta must lie in (0, pi)");
  constexpr int kSamples = 1000;
  for (int i = 0; i <= kSamples; ++i) {
    const double theta = c.max_theta * i / kSamples;
    require(distort_derivative(c, theta) > 0.0,
            "fisheye distortion polynomial is not monotonic on [0, max_theta]");
  }
}

void validate(const EquirectangularCamera& c) {
  require(c.width > 0 && c.height > 0, "equirectangular image size must be positive");
  require(c.hfov > 0.0 && c.hfov <= kTwoPi, "hfov must lie in (0, 2pi]");
  require(c.vfov > 0.0 && c.vfov <= kPi, "vfov must lie in (0, pi]");
}

}  // namespace

Ray Ray::from_direction(const Vec3& direction) {
  const double n = direction.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::Degenerate, "zero or non-finite ray direction");
  return {direction.x() / n, direction.y() / n, direction.z() / n};
}

CameraModel::CameraModel(const PinholeIntrinsics& pinhole) : model_(pinhole) {
  validate(pinhole);
  warning_ = principal_point_warning(pinhole.cx, pinhole.cy, pinhole.width, pinhole.height);
}

CameraModel::CameraModel(const EquidistantFisheye& fisheye) : model_(fisheye) {
  validate(fisheye);
  warning_ = principal_point_warning(fisheye.cx, fisheye.cy, fisheye.width, fisheye.height);
}

CameraModel::CameraModel(const EquirectangularCamera& equirect) : model_(equirect) { validate(equirect); }

int CameraModel::width() const noexcept {
  return std::visit([](const auto& c) { return c.width; }, model_);
}

int CameraModel::height() const noexcept {
  return std::visit([](const auto& c) { return c.height; }, model_);
}

Ray CameraModel::pixel_to_ray(const Pixel& px) const {
  if (!std::isfinite(px.u) || !std::isfinite(px.v)) throw Error(ErrorCode::InvalidArgument, "non-finite pixel");
  return std::visit([&](const auto& c) { return to_ray(c, px); }, model_);
}

Pixel CameraModel::project(const Vec3& p) const {
  return std::visit([&](const auto& c) { return project_model(c, p); }, model_);
}

Eigen::Matrix<double, 2, 3> CameraModel::project_jacobian(const Vec3& p) const {
  return std::visit([&](const auto& c) { return jacobian_model(c, p); }, model_);
}

CameraModel pinhole_from_hfov(double hfov, int width, int height) {
  if (!(hfov > 0.0 && hfov < kPi)) throw Error(ErrorCode::InvalidArgument, "pinhole hfov must lie in (0, pi)");
  const double f = 0.5 * width / std::tan(0.5 * hfov);
  return CameraModel(PinholeIntrinsics{f, f, 0.5 * width, 0.5 * height, width, height});
}

Ray pixel_to_ray(const CameraModel& cam, double u, double v) { return cam.pixel_to_ray({u, v}); }

Pixel project_point(const CameraModel& cam, const Vec3& p) { return cam.project(p); }

double angle_between_rays(const Ray& a, const Ray& b) {
  const double dot = a.dx * b.dx + a.dy * b.dy + a.dz * b.dz;
  return std::acos(std::clamp(dot, -1.0, 1.0));
}

double ray_yaw_offset(const Ray& r) {
  if (r.dx == 0.0 && r.dz == 0.0) throw Error(ErrorCode::Degenerate, "vertical ray has no bearing");
  return std::atan2(r.dx, r.dz);
}

}  // namespace rplift
