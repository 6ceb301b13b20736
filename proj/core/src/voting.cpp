#include "rplift/voting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace rplift {

namespace {

// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Values are sorted first so the result does not depend on pixel order.
VoteDistribution linear_stats(std::vector<double> values, double trim_fraction) {
  std::sort(values.begin(), values.end());
  std::size_t lo = 0, hi = values.size();
  if (trim_fraction > 0.0) {
    const auto drop = static_cast<std::size_t>(std::floor(trim_fraction * values.size()));
    if (2 * drop < values.size()) {
      lo = drop;
      hi = values.size() - drop;
    }
  }
  if (values[lo] == values[hi - 1]) return {values[lo], 0.0, static_cast<int>(values.size())};
  const auto n = static_cast<double>(hi - lo);
  CompensatedSum sum;
  for (std::size_t i = lo; i < hi; ++i) sum.add(values[i]);
  const double mean = sum.value() / n;
  CompensatedSum sq;
  for (std::size_t i = lo; i < hi; ++i) sq.add((values[i] - mean) * (values[i] - mean));
  return {mean, std::sqrt(sq.value() / n), static_cast<int>(values.size())};
}

VoteDistribution circular_stats(std::vector<double> angles) {
  std::sort(angles.begin(), angles.end());
  CompensatedSum sum_c, sum_s;
  for (double a : angles) {
    sum_c.add(std::cos(a));
    sum_s.add(std::sin(a));
  }
  const auto n = static_cast<double>(angles.size());
  const double resultant = std::min(std::hypot(sum_c.value(), sum_s.value()) / n, 1.0);
  const double std_dev = resultant > 0.0 ? std::sqrt(-2.0 * std::log(resultant))
                                         : std::numeric_limits<double>::infinity();
  return {normalize_angle(std::atan2(sum_s.value(), sum_c.value())), std_dev, static_cast<int>(angles.size())};
}

void check_pairing(const InstanceMask& mask, const AttributeMaps& maps) {
  if (mask.width != maps.width() || mask.height != maps.height()) {
    throw Error(ErrorCode::SizeMismatch, "mask is " + std::to_string(mask.width) + "x" +
                                             std::to_string(mask.height) + " but maps are " +
                                             std::to_string(maps.width()) + "x" + std::to_string(maps.height()));
  }
}

}  // namespace

InstanceMask::InstanceMask(int w, int h)
    : width(w), height(h), labels(static_cast<std::size_t>(w) * h, InstanceId{0}) {}

std::vector<InstanceId> InstanceMask::instance_ids() const {
  std::vector<bool> seen(65536, false);
  for (InstanceId id : labels) seen[id] = true;
  std::vector<InstanceId> ids;
  for (int id = 1; id < 65536; ++id) {
    if (seen[id]) ids.push_back(static_cast<InstanceId>(id));
  }
  return ids;
}

AttributeMaps::AttributeMaps(int width, int height, RPLayout layout, bool has_angles)
    : width_(width), height_(height), layout_(layout), has_angles_(has_angles) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative map size");
  data_.resize(static_cast<std::size_t>(num_channels()) * pixels());
}

std::span<double> AttributeMaps::channel(int c) {
  return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * pixels(), pixels());
}

std::span<const double> AttributeMaps::channel(int c) const {
  return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * pixels(), pixels());
}

AggregatedInstance aggregate_instance(const InstanceMask& mask, const AttributeMaps& maps, InstanceId id,
                                      const CameraModel& cam, const AggregateOptions& opts) {
  check_pairing(mask, maps);
  if (opts.require_yaw && !maps.has_angles()) {
    throw Error(ErrorCode::MissingAngles, "yaw requested but maps carry no angle channels");
  }

  std::vector<std::pair<int, int>> pixels;
  if (id != 0) {
    for (int v = 0; v < mask.height; ++v) {
      for (int u = 0; u < mask.width; ++u) {
        if (mask.at(u, v) == id) pixels.emplace_back(u, v);
      }
    }
  }
  if (pixels.empty()) throw Error(ErrorCode::UnknownInstance, "instance " + std::to_string(id) + " not in mask");

  AggregatedInstance out;
  out.id = id;
  out.pixel_count = static_cast<int>(pixels.size());
  out.low_support = pixels.size() < 3;

  std::vector<double> normalized_spreads;
  std::vector<double> values(pixels.size());
  auto gather = [&](auto&& fn) {
    for (std::size_t i = 0; i < pixels.size(); ++i) values[i] = fn(pixels[i].first, pixels[i].second);
    return linear_stats(values, opts.trim_fraction);
  };

  for (int k = 0; k < 3; ++k) {
    const int c = AttributeMaps::dim_channel(k);
    out.dims_votes[k] = gather([&](int u, int v) { return maps.at(c, u, v); });
    normalized_spreads.push_back(out.dims_votes[k].std / opts.scales.dims);
  }
  out.dims = {out.dims_votes[0].mean, out.dims_votes[1].mean, out.dims_votes[2].mean};

  const int n_points = num_reference_points(maps.layout());
  for (int j = 0; j < n_points; ++j) {
    const int cu = AttributeMaps::offset_u_channel(j);
    const int cv = AttributeMaps::offset_v_channel(j);
    const VoteDistribution du = gather([&](int u, int v) { return rel_to_abs(maps.at(cu, u, v), 0.0, u, v).u; });
    const VoteDistribution dv = gather([&](int u, int v) { return rel_to_abs(0.0, maps.at(cv, u, v), u, v).v; });
    out.rps_abs.push_back({du.mean, dv.mean});
    out.rp_votes.push_back({du, dv});
    normalized_spreads.push_back(du.std / opts.scales.rp);
    normalized_spreads.push_back(dv.std / opts.scales.rp);
  }

  if (maps.has_angles()) {
    std::vector<double> yaws;
    yaws.reserve(pixels.size());
    for (const auto& [u, v] : pixels) {
      AngleEncoding enc;
      enc.c2 = maps.at(maps.angle_channel(0), u, v);
      enc.s2 = maps.at(maps.angle_channel(1), u, v);
      enc.has_heading = true;
      enc.c1 = maps.at(maps.angle_channel(2), u, v);
      enc.s1 = maps.at(maps.angle_channel(3), u, v);
      if (std::hypot(enc.c2, enc.s2) < 1e-6) continue;  // abstaining pixel
      const double theta_ray = ray_yaw_offset(cam.pixel_to_ray({static_cast<double>(u), static_cast<double>(v)}));
      yaws.push_back(alpha_to_yaw(decode_viewing_angle(enc), theta_ray));
    }
    if (!yaws.empty()) {
      VoteDistribution yaw = circular_stats(std::move(yaws));
      out.ry = yaw.mean;
      out.ry_votes = yaw;
      normalized_spreads.push_back(yaw.std / opts.scales.yaw);
    } else if (opts.require_yaw) {
      throw Error(ErrorCode::MissingAngles, "every angle vote of instance " + std::to_string(id) + " is degenerate");
    }
  }

  CompensatedSum spread;
  for (double s : normalized_spreads) spread.add(s);
  out.confidence = std::exp(-spread.value() / static_cast<double>(normalized_spreads.size()));
  return out;
}

std::vector<AggregatedInstance> aggregate_all(const InstanceMask& mask, const AttributeMaps& maps,
                                              const CameraModel& cam, const AggregateOptions& opts, int jobs) {
  check_pairing(mask, maps);
  const std::vector<InstanceId> ids = mask.instance_ids();
  std::vector<AggregatedInstance> out(ids.size());
  std::vector<std::exception_ptr> errors(ids.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) {
      try {
        out[i] = aggregate_instance(mask, maps, ids[i], cam, opts);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(ids.size(), 1)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

LiftResult instances_to_boxes(std::span<const AggregatedInstance> aggs, const CameraModel& cam, RPLayout layout,
                              const LiftOptions& opts) {
  LiftResult result;
  const auto expected_points = static_cast<std::size_t>(num_reference_points(layout));
  for (const AggregatedInstance& agg : aggs) {
    try {
      if (agg.rps_abs.size() != expected_points) {
        throw Error(ErrorCode::InvalidArgument, "aggregate has " + std::to_string(agg.rps_abs.size()) +
                                                    " reference points, layout needs " +
                                                    std::to_string(expected_points));
      }
      LiftedInstance lifted;
      lifted.id = agg.id;
      lifted.confidence = agg.confidence;
      if (layout == RPLayout::TwoRP) {
        if (!agg.ry) throw Error(ErrorCode::MissingAngles, "two-point lifting needs a yaw estimate");
        lifted.box = lift_two_point(cam, agg.rps_abs[0], agg.rps_abs[1], agg.dims, *agg.ry);
      } else {
        const Box3D init = initialize_from_corners(cam, agg.rps_abs, agg.dims, agg.ry);
        if (opts.refine) {
          RefineResult refined = refine_box_lm(cam, init, agg.rps_abs, opts.lm);
          lifted.box = refined.box;
          lifted.lm = std::move(refined.diagnostics);
        } else {
          lifted.box = init;
        }
      }
      result.objects.push_back(std::move(lifted));
    } catch (const Error& e) {
      result.failures.push_back({agg.id, e.code(), e.what()});
    }
  }
  return result;
}

LiftResult lift_instances(const InstanceMask& mask, const AttributeMaps& maps, const CameraModel& cam,
                          const AggregateOptions& aggregate_opts, const LiftOptions& lift_opts, int jobs) {
  AggregateOptions opts = aggregate_opts;
  if (maps.layout() == RPLayout::TwoRP) opts.require_yaw = true;
  const std::vector<AggregatedInstance> aggs = aggregate_all(mask, maps, cam, opts, jobs);
  return instances_to_boxes(aggs, cam, maps.layout(), lift_opts);
}

}  // namespace rplift
