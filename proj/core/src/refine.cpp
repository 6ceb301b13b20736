#include "rplift/refine.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "rplift/error.hpp"

namespace rplift {

namespace {

Eigen::VectorXd to_params(const Box3D& box, bool optimize_dims) {
  Eigen::VectorXd p(num_lm_parameters(optimize_dims));
  p.head<4>() << box.x, box.y, box.z, box.ry;
  if (optimize_dims) p.tail<3>() << box.dims.h, box.dims.w, box.dims.l;
  return p;
}

Box3D from_params(const Eigen::VectorXd& p, const Box3D& base) {
  Box3D box = base;
  box.x = p[0];
  box.y = p[1];
  box.z = p[2];
  box.ry = p[3];
  if (p.size() == 7) box.dims = {p[4], p[5], p[6]};
  return box;
}

// Infinite for boxes that cannot be evaluated (corners behind the camera or
// outside a fisheye's field of view, non-positive trial dimensions).
double try_cost(const CameraModel& cam, const Box3D& box, std::span<const Pixel> predicted) {
  if (!(box.dims.h > 0.0 && box.dims.w > 0.0 && box.dims.l > 0.0)) return std::numeric_limits<double>::infinity();
  try {
    const double c = reprojection_residual(cam, box, predicted).squaredNorm();
    return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::optional<double> bearing_from_plane(const CameraModel& cam, std::span<const Pixel> predicted,
                                         const std::array<int, 4>& face, double plane_y) {
  std::array<Vec3, 4> pts;
  for (int k = 0; k < 4; ++k) {
    const Ray r = cam.pixel_to_ray(predicted[face[k]]);
    if (std::abs(r.dy) < 1e-9) return std::nullopt;
    const double t = plane_y / r.dy;
    if (!(t > 0.0)) return std::nullopt;
    pts[k] = t * r.vec();
  }
  // face order is (-x,-z), (-x,+z), (+x,-z), (+x,+z) in the object frame.
  double sum_c = 0.0, sum_s = 0.0;
  auto add = [&](double a) {
    sum_c += std::cos(a);
    sum_s += std::sin(a);
  };
  for (const auto& [from, to] : {std::pair{0, 2}, std::pair{1, 3}}) {
    const Vec3 e = pts[to] - pts[from];
    add(std::atan2(-e.z(), e.x()));
  }
  for (const auto& [from, to] : {std::pair{0, 1}, std::pair{2, 3}}) {
    const Vec3 e = pts[to] - pts[from];
    add(std::atan2(e.x(), e.z()));
  }
  if (std::hypot(sum_c, sum_s) < 1e-12) return std::nullopt;
  return std::atan2(sum_s, sum_c);
}

}  // namespace

Eigen::MatrixXd reprojection_jacobian(const CameraModel& cam, const Box3D& box, bool optimize_dims) {
  const int n = num_lm_parameters(optimize_dims);
  Eigen::MatrixXd jac(16, n);
  const double c = std::cos(box.ry), s = std::sin(box.ry);
  const Eigen::Matrix3d rot = yaw_rotation(box.ry);
  Eigen::Matrix3d drot;
  drot << -s, 0.0, c,
          0.0, 0.0, 0.0,
          -c, 0.0, -s;
  const auto corners = box_corners_3d(box);
  for (int j = 0; j < 8; ++j) {
    const double sx = (j & 4) ? 1.0 : -1.0;
    const double sy = (j & 2) ? 1.0 : 0.0;
    const double sz = (j & 1) ? 1.0 : -1.0;
    const Vec3 local(sx * 0.5 * box.dims.l, -sy * box.dims.h, sz * 0.5 * box.dims.w);

    Eigen::Matrix<double, 3, Eigen::Dynamic> dpoint(3, n);
    dpoint.leftCols<3>().setIdentity();
    dpoint.col(3) = drot * local;
    if (optimize_dims) {
      dpoint.col(4) = rot * Vec3(0.0, -sy, 0.0);
      dpoint.col(5) = rot * Vec3(0.0, 0.0, 0.5 * sz);
      dpoint.col(6) = rot * Vec3(0.5 * sx, 0.0, 0.0);
    }
    jac.middleRows<2>(2 * j) = cam.project_jacobian(corners[j]) * dpoint;
  }
  return jac;
}

RefineResult refine_box_lm(const CameraModel& cam, const Box3D& init, std::span<const Pixel> predicted,
                           const LMOptions& opts) {
  if (predicted.size() != 8) throw Error(ErrorCode::InvalidArgument, "LM refinement needs 8 predicted corners");
  if (!(init.z > 0.0)) throw Error(ErrorCode::InvalidArgument, "initial box must lie in front of the camera");

  const bool dims = opts.optimize_dims;
  const int n = num_lm_parameters(dims);
  Eigen::VectorXd params = to_params(init, dims);
  Box3D box = init;
  Eigen::VectorXd residual = reprojection_residual(cam, box, predicted);
  double cost = residual.squaredNorm();

  RefineResult out;
  LMDiagnostics& diag = out.diagnostics;
  diag.initial_cost = cost;
  diag.cost_history.push_back(cost);

  double lambda = opts.initial_lambda;
  bool done = false;
  while (!done) {
    if (cost <= opts.cost_floor) {
      diag.converged = true;
      diag.stop_reason = "cost below floor";
      break;
    }
    if (diag.iterations >= opts.max_iterations) {
      diag.stop_reason = "iteration limit";
      break;
    }
    ++diag.iterations;

    const Eigen::MatrixXd jac = reprojection_jacobian(cam, box, dims);
    const Eigen::VectorXd grad = jac.transpose() * residual;
    const Eigen::MatrixXd normal = jac.transpose() * jac;

    while (true) {
      const Eigen::MatrixXd damped = normal + lambda * Eigen::MatrixXd::Identity(n, n);
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      const Eigen::VectorXd step = ldlt.solve(-grad);
      const bool solved = ldlt.info() == Eigen::Success && ldlt.isPositive() && step.allFinite();
      if (!solved) {
        if (lambda >= opts.max_lambda) {
          throw Error(ErrorCode::SingularNormalEquations, "damped normal equations singular at max lambda");
        }
        lambda *= opts.lambda_increase;
        continue;
      }
      if (step.norm() < opts.min_step_norm) {
        diag.converged = true;
        diag.stop_reason = "step below tolerance";
        done = true;
        break;
      }
      const Eigen::VectorXd trial_params = params + step;
      const Box3D trial = from_params(trial_params, box);
      const double trial_cost = try_cost(cam, trial, predicted);
      if (trial_cost < cost) {
        const double relative = (cost - trial_cost) / cost;
        params = trial_params;
        box = trial;
        cost = trial_cost;
        residual = reprojection_residual(cam, box, predicted);
        lambda = std::max(lambda / opts.lambda_decrease, 1e-300);
        ++diag.accepted_steps;
        diag.cost_history.push_back(cost);
        if (relative < opts.min_relative_decrease) {
          diag.converged = true;
          diag.stop_reason = "relative decrease below tolerance";
          done = true;
        }
        break;
      }
      lambda *= opts.lambda_increase;
      if (lambda > opts.max_lambda) {
        // No descent direction left at machine precision.
        diag.converged = grad.lpNorm<Eigen::Infinity>() < 1e-9;
        diag.stop_reason = "damping limit";
        done = true;
        break;
      }
    }
  }

  box.ry = normalize_angle(box.ry);
  out.box = box;
  diag.final_cost = cost;
  return out;
}

Box3D initialize_from_corners(const CameraModel& cam, std::span<const Pixel> predicted, const Dimensions& dims,
                              std::optional<double> ry) {
  if (predicted.size() != 8) throw Error(ErrorCode::InvalidArgument, "initialization needs 8 predicted corners");
  Pixel top{0.0, 0.0}, bottom{0.0, 0.0};
  for (int k = 0; k < 4; ++k) {
    top.u += 0.25 * predicted[kTopCorners[k]].u;
    top.v += 0.25 * predicted[kTopCorners[k]].v;
    bottom.u += 0.25 * predicted[kBottomCorners[k]].u;
    bottom.v += 0.25 * predicted[kBottomCorners[k]].v;
  }
  Box3D box = lift_two_point(cam, top, bottom, dims, ry.value_or(0.0));
  if (ry) return box;

  std::optional<double> bearing = bearing_from_plane(cam, predicted, kBottomCorners, box.y);
  if (!bearing) bearing = bearing_from_plane(cam, predicted, kTopCorners, box.y - dims.h);
  box.ry = normalize_angle(bearing.value_or(0.0));
  return box;
}

}  // namespace rplift
