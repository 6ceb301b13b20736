#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rplift/camera.hpp"
#include "rplift/geom.hpp"

namespace rplift {

struct LMOptions {
  double initial_lambda = 1e-3;
  double lambda_increase = 10.0;
  double lambda_decrease = 10.0;
  double max_lambda = 1e16;
  int max_iterations = 100;
  double min_relative_decrease = 1e-10;
  double min_step_norm = 1e-10;
  // Squared-pixel cost below which the fit is treated as exact.
  double cost_floor = 1e-20;
  // Also refine (h, w, l). Off by default: size and distance trade off
  // exactly (a box scaled about the camera center projects identically), so
  // only the damping keeps the step bounded.
  bool optimize_dims = false;
};

struct LMDiagnostics {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  std::string stop_reason;
  // Cost after initialization and after every accepted step.
  std::vector<double> cost_history;
};

struct RefineResult {
  Box3D box;
  LMDiagnostics diagnostics;
};

// Number of refined parameters: (x, y, z, ry) or (x, y, z, ry, h, w, l).
inline int num_lm_parameters(bool optimize_dims) { return optimize_dims ? 7 : 4; }

// Analytic 16 x {4, 7} Jacobian of reprojection_residual.
Eigen::MatrixXd reprojection_jacobian(const CameraModel& cam, const Box3D& box, bool optimize_dims);

// Minimizes the squared reprojection error of the 8 box corners against
// `predicted`. The returned box never has a higher cost than `init`; a
// NotConverged outcome is reported through diagnostics.converged = false.
// Throws SingularNormalEquations if the damped normal equations cannot be
// solved even at max_lambda.
RefineResult refine_box_lm(const CameraModel& cam, const Box3D& init, std::span<const Pixel> predicted,
                           const LMOptions& opts = {});

// Initial box for refinement from 8 predicted corners: the means of the four
// top and four bottom corners are lifted with lift_two_point. Without a yaw,
// the bottom corner rays are intersected with the lifted ground plane and
// the edge bearings are averaged.
Box3D initialize_from_corners(const CameraModel& cam, std::span<const Pixel> predicted, const Dimensions& dims,
                              std::optional<double> ry);

}  // namespace rplift
