#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rplift/camera.hpp"
#include "rplift/geom.hpp"
#include "rplift/random.hpp"
#include "rplift/refine.hpp"
#include "rplift/voting.hpp"

namespace rplift {

// Synthetic scenes with exact ("perfect network") attribute maps.

struct SceneSpec {
  CameraModel cam;
  std::vector<Box3D> boxes;
  std::uint64_t seed = 0;
  RPLayout layout = RPLayout::EightRP;
  bool with_angles = true;
};

struct NoiseSpec {
  double sigma_dims = 0.0;   // m
  double sigma_rp = 0.0;     // px
  double sigma_angle = 0.0;  // added to each angle channel
  double occlusion_fraction = 0.0;

  bool is_zero() const {
    return sigma_dims == 0.0 && sigma_rp == 0.0 && sigma_angle == 0.0 && occlusion_fraction == 0.0;
  }
};

void validate(const NoiseSpec& noise);

struct RenderedObject {
  InstanceId id = 0;  // index in SceneSpec::boxes + 1
  Box3D box;
  RefPoints2D rps;                 // projected reference points of the layout
  std::array<double, 4> bbox2d{};  // u1, v1, u2, v2 of the projected corners, clipped to the image
  int pixel_count = 0;             // visible pixels after occlusion
};

struct RenderedScene {
  InstanceMask mask;
  AttributeMaps maps;
  std::vector<RenderedObject> objects;  // SceneSpec::boxes order
};

// Silhouettes are convex hulls of the projected corners, painted near to far
// so nearer boxes own shared pixels. Every instance pixel (u, v) carries the
// box dims, offsets P_j - (u, v) and the encoding of ry - theta_ray(u, v).
// Throws EmptyScene when no box covers a pixel, InvalidArgument when a box
// cannot be projected.
RenderedScene render_scene(const SceneSpec& spec);

// Gaussian noise on every instance pixel, then occlusion-style corruption
// of occlusion_fraction of each instance's pixels (votes copied from another
// instance, or uniform junk when there is none). Each channel role draws from
// its own stream derived from `seed`, so two layouts perturbed with the same
// seed share their dims and angle noise.
AttributeMaps perturb(const InstanceMask& mask, const AttributeMaps& maps, const NoiseSpec& noise,
                      std::uint64_t seed);
void perturb_in_place(const InstanceMask& mask, AttributeMaps& maps, const NoiseSpec& noise, std::uint64_t seed);

struct SceneSampler {
  int boxes_per_scene = 1;
  double z_min = 10.0;
  double z_max = 40.0;
  // Box center at camera height: the top-bottom segment is perpendicular to
  // the center ray and two-point lifting is exact.
  bool perpendicular = true;
  // Bottom-face y when not perpendicular (camera mounted this high).
  double ground_y = 1.65;
  // Largest horizontal bearing of a box center; 0 derives it from the camera.
  double max_bearing = 0.0;
};

// Boxes fully inside the image, with car-like dimensions and uniform yaw.
std::vector<Box3D> sample_boxes(const CameraModel& cam, const SceneSampler& sampler, Rng& rng);

struct ErrorStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  std::size_t count = 0;
};

ErrorStats summarize(std::vector<double> values);

struct MethodStats {
  ErrorStats center;  // |c - c_gt| of the geometric centers, m
  ErrorStats depth;   // ||c| - |c_gt||, m
  ErrorStats dims;    // max |dim - dim_gt|, m
  ErrorStats yaw;     // rad
  std::size_t failures = 0;
};

struct RoundtripReport {
  std::uint64_t seed = 0;
  int trials = 0;
  NoiseSpec noise;
  MethodStats two_rp;    // trigonometric two-point lift
  MethodStats eight_rp;  // eight-corner initialization + LM
};

struct RoundtripOptions {
  SceneSampler sampler;
  LMOptions lm;
  int jobs = 1;
};

// Per trial t: scene seed derive_seed(spec.seed, t); boxes are spec.boxes or,
// when empty, sampled. Both layouts are rendered from the same boxes and
// perturbed with the same seed, then aggregated and lifted. Deterministic
// for any `jobs`.
RoundtripReport roundtrip_report(const SceneSpec& spec, const NoiseSpec& noise, int trials,
                                 const RoundtripOptions& opts = {});

}  // namespace rplift
