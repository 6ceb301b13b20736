#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rplift/camera.hpp"
#include "rplift/error.hpp"
#include "rplift/geom.hpp"
#include "rplift/refine.hpp"

namespace rplift {

using InstanceId = std::uint16_t;

// Row-major instance-id raster; 0 is background.
struct InstanceMask {
  int width = 0;
  int height = 0;
  std::vector<InstanceId> labels;

  InstanceMask() = default;
  InstanceMask(int width, int height);

  InstanceId at(int u, int v) const { return labels[static_cast<std::size_t>(v) * width + u]; }
  InstanceId& at(int u, int v) { return labels[static_cast<std::size_t>(v) * width + u]; }

  // Sorted ids of all non-background instances.
  std::vector<InstanceId> instance_ids() const;
};

// Storage for large rasters: memory comes from calloc and elements are not
// value-initialized, so untouched pages of a fresh raster are never written.
template <typename T>
struct ZeroedAllocator {
  using value_type = T;

  ZeroedAllocator() = default;
  template <typename U>
  ZeroedAllocator(const ZeroedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (void* p = std::calloc(n, sizeof(T))) return static_cast<T*>(p);
    throw std::bad_alloc();
  }
  void deallocate(T* p, std::size_t) noexcept { std::free(p); }

  template <typename U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }

  friend bool operator==(const ZeroedAllocator&, const ZeroedAllocator&) noexcept { return true; }
};

using RasterStorage = std::vector<double, ZeroedAllocator<double>>;

// Per-pixel attribute rasters, channel-major:
//   [0, 3)            h, w, l
//   [3, 3 + 2N)       du_0, dv_0, du_1, dv_1, ... (offsets to reference point j)
//   [3 + 2N, 7 + 2N)  cos 2a, sin 2a, cos a, sin a   (only with angles)
class AttributeMaps {
 public:
  AttributeMaps() = default;
  AttributeMaps(int width, int height, RPLayout layout, bool has_angles);

  static int channel_count(RPLayout layout, bool has_angles) {
    return 3 + 2 * num_reference_points(layout) + (has_angles ? 4 : 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  RPLayout layout() const noexcept { return layout_; }
  bool has_angles() const noexcept { return has_angles_; }
  int num_channels() const noexcept { return channel_count(layout_, has_angles_); }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  static constexpr int dim_channel(int k) { return k; }
  static constexpr int offset_u_channel(int j) { return 3 + 2 * j; }
  static constexpr int offset_v_channel(int j) { return 4 + 2 * j; }
  int angle_channel(int k) const { return 3 + 2 * num_reference_points(layout_) + k; }

  std::span<double> channel(int c);
  std::span<const double> channel(int c) const;

  double at(int c, int u, int v) const { return data_[index(c, u, v)]; }
  double& at(int c, int u, int v) { return data_[index(c, u, v)]; }

  RasterStorage& data() noexcept { return data_; }
  const RasterStorage& data() const noexcept { return data_; }

  friend bool operator==(const AttributeMaps&, const AttributeMaps&) = default;

 private:
  std::size_t index(int c, int u, int v) const {
    return (static_cast<std::size_t>(c) * height_ + v) * width_ + u;
  }

  int width_ = 0;
  int height_ = 0;
  RPLayout layout_ = RPLayout::TwoRP;
  bool has_angles_ = false;
  RasterStorage data_;
};

struct VoteDistribution {
  double mean = 0.0;
  double std = 0.0;
  int count = 0;
};

// Normalization scales of the confidence score exp(-mean(std_k / scale_k)).
struct ConfidenceScales {
  double dims = 0.2;    // m
  double rp = 5.0;      // px
  double yaw = 0.2;     // rad
};

struct AggregateOptions {
  // Fraction dropped from each tail of every linear attribute before
  // averaging; 0 is the plain mean.
  double trim_fraction = 0.0;
  // Throw MissingAngles when the maps carry no angle channels.
  bool require_yaw = false;
  ConfidenceScales scales;
};

struct AggregatedInstance {
  InstanceId id = 0;
  int pixel_count = 0;
  // Fewer than 3 voting pixels. Spreads are population statistics (0 for a
  // single pixel) and carry little information.
  bool low_support = false;

  Dimensions dims;
  std::array<VoteDistribution, 3> dims_votes{};  // h, w, l

  RefPoints2D rps_abs;
  std::vector<std::array<VoteDistribution, 2>> rp_votes;  // (u, v) per point

  std::optional<double> ry;
  std::optional<VoteDistribution> ry_votes;  // circular mean and circular std

  double confidence = 0.0;
};

// Absolute reference point from the offset predicted at pixel (u, v).
inline Pixel rel_to_abs(double du, double dv, int u, int v) { return {du + u, dv + v}; }

// Aggregates every vote of instance `id`. Yaw is decoded per pixel,
// compensated by that pixel's ray bearing and averaged on the circle.
// Throws UnknownInstance, SizeMismatch, or MissingAngles.
AggregatedInstance aggregate_instance(const InstanceMask& mask, const AttributeMaps& maps, InstanceId id,
                                      const CameraModel& cam, const AggregateOptions& opts = {});

// All instances in ascending id order, using up to `jobs` threads.
std::vector<AggregatedInstance> aggregate_all(const InstanceMask& mask, const AttributeMaps& maps,
                                              const CameraModel& cam, const AggregateOptions& opts = {},
                                              int jobs = 1);

struct LiftOptions {
  LMOptions lm;
  // EightRP only: skip LM and return the initialization.
  bool refine = true;
};

struct LiftedInstance {
  InstanceId id = 0;
  Box3D box;
  double confidence = 0.0;
  std::optional<LMDiagnostics> lm;
};

struct InstanceFailure {
  InstanceId id = 0;
  ErrorCode code = ErrorCode::Degenerate;
  std::string message;
};

struct LiftResult {
  std::vector<LiftedInstance> objects;  // input order, failures removed
  std::vector<InstanceFailure> failures;
};

// Turns aggregated votes into boxes. No instance is merged or suppressed;
// failing instances are skipped and reported.
LiftResult instances_to_boxes(std::span<const AggregatedInstance> aggs, const CameraModel& cam, RPLayout layout,
                              const LiftOptions& opts = {});

// aggregate_all followed by instances_to_boxes. TwoRP requires angle channels.
LiftResult lift_instances(const InstanceMask& mask, const AttributeMaps& maps, const CameraModel& cam,
                          const AggregateOptions& aggregate_opts = {}, const LiftOptions& lift_opts = {},
                          int jobs = 1);

}  // namespace rplift
