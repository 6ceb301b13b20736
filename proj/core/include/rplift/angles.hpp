#pragma once

#include <cmath>
#include <numbers>

namespace rplift {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wraps to (-pi, pi]; -pi maps to +pi.
inline double normalize_angle(double a) {
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

// Smallest absolute difference between two angles, in [0, pi].
inline double angle_distance(double a, double b) { return std::abs(normalize_angle(a - b)); }

}  // namespace rplift
