#include "rplift/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "rplift/error.hpp"

namespace rplift {

namespace {

using Point2 = Eigen::Vector2d;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain; counter-clockwise in (u, v) coordinates.
std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const Point2& a, const Point2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  return hull;
}

bool inside_hull(const std::vector<Point2>& hull, const Point2& p) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    if (cross(hull[i], hull[(i + 1) % hull.size()], p) < 0.0) return false;
  }
  return true;
}

// Channel-role stream ids for perturb().
constexpr std::uint64_t kDimsStream = 0;
constexpr std::uint64_t kOffsetStream = 100;
constexpr std::uint64_t kAngleStream = 200;
constexpr std::uint64_t kOcclusionStream = 1000;

double default_max_bearing(const CameraModel& cam) {
  const auto& m = cam.model();
  if (const auto* p = std::get_if<PinholeIntrinsics>(&m)) {
    const double left = std::atan(p->cx / p->fx);
    const double right = std::atan((p->width - p->cx) / p->fx);
    return 0.5 * std::min(left, right);
  }
  if (const auto* f = std::get_if<EquidistantFisheye>(&m)) return 0.5 * f->max_theta;
  const auto& e = std::get<EquirectangularCamera>(m);
  return std::min(0.25 * e.hfov, 1.0);
}

bool fully_visible(const CameraModel& cam, const Box3D& box) {
  try {
    for (const Vec3& c : box_corners_3d(box)) {
      if (c.norm() < 0.5) return false;
      const Pixel p = cam.project(c);
      if (!(p.u >= 0.0 && p.u <= cam.width() && p.v >= 0.0 && p.v <= cam.height())) return false;
    }
  } catch (const Error&) {
    return false;
  }
  return true;
}

}  // namespace

void validate(const NoiseSpec& noise) {
  if (!(noise.sigma_dims >= 0.0 && noise.sigma_rp >= 0.0 && noise.sigma_angle >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "noise sigmas must be non-negative");
  }
  if (!(noise.occlusion_fraction >= 0.0 && noise.occlusion_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "occlusion fraction must lie in [0, 1]");
  }
}

RenderedScene render_scene(const SceneSpec& spec) {
  const CameraModel& cam = spec.cam;
  const int width = cam.width(), height = cam.height();
  if (spec.boxes.size() > 65535) throw Error(ErrorCode::InvalidArgument, "at most 65535 boxes per scene");

  RenderedScene scene;
  scene.mask = InstanceMask(width, height);
  scene.maps = AttributeMaps(width, height, spec.layout, spec.with_angles);
  const int n_points = num_reference_points(spec.layout);

  std::vector<std::vector<Point2>> hulls(spec.boxes.size());
  for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
    const Box3D& box = spec.boxes[i];
    validate(box.dims);
    RenderedObject obj;
    obj.id = static_cast<InstanceId>(i + 1);
    obj.box = box;
    std::vector<Point2> projected;
    try {
      for (const Vec3& c : box_corners_3d(box)) {
        const Pixel p = cam.project(c);
        projected.emplace_back(p.u, p.v);
      }
      obj.rps = project_reference_points(cam, box, spec.layout);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidArgument, "box " + std::to_string(i) + " cannot be projected: " + e.what());
    }
    double u1 = projected[0].x(), u2 = u1, v1 = projected[0].y(), v2 = v1;
    for (const Point2& p : projected) {
      u1 = std::min(u1, p.x());
      u2 = std::max(u2, p.x());
      v1 = std::min(v1, p.y());
      v2 = std::max(v2, p.y());
    }
    obj.bbox2d = {std::clamp(u1, 0.0, double(width)), std::clamp(v1, 0.0, double(height)),
                  std::clamp(u2, 0.0, double(width)), std::clamp(v2, 0.0, double(height))};
    hulls[i] = convex_hull(std::move(projected));
    scene.objects.push_back(std::move(obj));
  }

  // Painter's order, nearest first; a pixel keeps the first id painted.
  std::vector<std::size_t> order(spec.boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return spec.boxes[a].center().norm() < spec.boxes[b].center().norm();
  });

  AttributeMaps& maps = scene.maps;
  for (std::size_t i : order) {
    RenderedObject& obj = scene.objects[i];
    const std::vector<Point2>& hull = hulls[i];
    if (hull.size() < 3) continue;
    double u_lo = hull[0].x(), u_hi = u_lo, v_lo = hull[0].y(), v_hi = v_lo;
    for (const Point2& p : hull) {
      u_lo = std::min(u_lo, p.x());
      u_hi = std::max(u_hi, p.x());
      v_lo = std::min(v_lo, p.y());
      v_hi = std::max(v_hi, p.y());
    }
    const int u_begin = std::max(0, static_cast<int>(std::ceil(u_lo)));
    const int u_end = std::min(width - 1, static_cast<int>(std::floor(u_hi)));
    const int v_begin = std::max(0, static_cast<int>(std::ceil(v_lo)));
    const int v_end = std::min(height - 1, static_cast<int>(std::floor(v_hi)));
    for (int v = v_begin; v <= v_end; ++v) {
      for (int u = u_begin; u <= u_end; ++u) {
        if (scene.mask.at(u, v) != 0 || !inside_hull(hull, Point2(u, v))) continue;
        scene.mask.at(u, v) = obj.id;
        ++obj.pixel_count;
        maps.at(AttributeMaps::dim_channel(0), u, v) = obj.box.dims.h;
        maps.at(AttributeMaps::dim_channel(1), u, v) = obj.box.dims.w;
        maps.at(AttributeMaps::dim_channel(2), u, v) = obj.box.dims.l;
        for (int j = 0; j < n_points; ++j) {
          maps.at(AttributeMaps::offset_u_channel(j), u, v) = obj.rps[j].u - u;
          maps.at(AttributeMaps::offset_v_channel(j), u, v) = obj.rps[j].v - v;
        }
        if (spec.with_angles) {
          const double theta_ray = ray_yaw_offset(cam.pixel_to_ray({double(u), double(v)}));
          const AngleEncoding enc = encode_viewing_angle(yaw_to_alpha(obj.box.ry, theta_ray), true);
          maps.at(maps.angle_channel(0), u, v) = enc.c2;
          maps.at(maps.angle_channel(1), u, v) = enc.s2;
          maps.at(maps.angle_channel(2), u, v) = enc.c1;
          maps.at(maps.angle_channel(3), u, v) = enc.s1;
        }
      }
    }
  }

  const bool any = std::any_of(scene.objects.begin(), scene.objects.end(),
                               [](const RenderedObject& o) { return o.pixel_count > 0; });
  if (!any) throw Error(ErrorCode::EmptyScene, "no box covers a pixel");
  return scene;
}

AttributeMaps perturb(const InstanceMask& mask, const AttributeMaps& maps, const NoiseSpec& noise,
                      std::uint64_t seed) {
  AttributeMaps out = maps;
  perturb_in_place(mask, out, noise, seed);
  return out;
}

void perturb_in_place(const InstanceMask& mask, AttributeMaps& out, const NoiseSpec& noise, std::uint64_t seed) {
  validate(noise);
  if (mask.width != out.width() || mask.height != out.height()) {
    throw Error(ErrorCode::SizeMismatch, "mask and maps differ in size");
  }
  if (noise.is_zero()) return;
  const AttributeMaps& maps = out;

  const std::size_t n_pixels = maps.pixels();
  std::vector<std::size_t> instance_pixels;
  for (std::size_t i = 0; i < n_pixels; ++i) {
    if (mask.labels[i] != 0) instance_pixels.push_back(i);
  }
  auto add_noise = [&](int channel, double sigma, std::uint64_t stream) {
    if (sigma == 0.0) return;
    Rng rng(derive_seed(seed, stream));
    std::span<double> data = out.channel(channel);
    for (std::size_t i : instance_pixels) data[i] += rng.normal(0.0, sigma);
  };
  for (int k = 0; k < 3; ++k) add_noise(AttributeMaps::dim_channel(k), noise.sigma_dims, kDimsStream + k);
  for (int j = 0; j < 2 * num_reference_points(maps.layout()); ++j) {
    add_noise(AttributeMaps::offset_u_channel(0) + j, noise.sigma_rp, kOffsetStream + j);
  }
  if (maps.has_angles()) {
    for (int k = 0; k < 4; ++k) add_noise(maps.angle_channel(k), noise.sigma_angle, kAngleStream + k);
  }

  if (noise.occlusion_fraction > 0.0) {
    const std::vector<InstanceId> ids = mask.instance_ids();
    std::vector<std::vector<std::size_t>> members(ids.size());
    for (std::size_t i = 0; i < n_pixels; ++i) {
      if (mask.labels[i] == 0) continue;
      const auto it = std::lower_bound(ids.begin(), ids.end(), mask.labels[i]);
      members[static_cast<std::size_t>(it - ids.begin())].push_back(i);
    }
    const int n_channels = maps.num_channels();
    // Votes are copied from the noisy but not yet corrupted state.
    std::vector<std::size_t> first(ids.size() + 1, 0);
    for (std::size_t k = 0; k < ids.size(); ++k) first[k + 1] = first[k] + members[k].size();
    std::vector<double> source(first.back() * static_cast<std::size_t>(n_channels));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      for (std::size_t m = 0; m < members[k].size(); ++m) {
        for (int ch = 0; ch < n_channels; ++ch) {
          source[(first[k] + m) * n_channels + ch] = out.channel(ch)[members[k][m]];
        }
      }
    }
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Rng rng(derive_seed(seed, kOcclusionStream + ids[k]));
      std::vector<std::size_t> pix = members[k];
      const auto n_corrupt = static_cast<std::size_t>(std::llround(noise.occlusion_fraction * pix.size()));
      for (std::size_t c = 0; c < n_corrupt; ++c) {
        std::swap(pix[c], pix[c + rng.index(pix.size() - c)]);
        const std::size_t target = pix[c];
        if (ids.size() > 1) {
          std::size_t other = rng.index(ids.size() - 1);
          if (other >= k) ++other;
          const std::size_t src = first[other] + rng.index(members[other].size());
          for (int ch = 0; ch < n_channels; ++ch) out.channel(ch)[target] = source[src * n_channels + ch];
        } else {
          for (int d = 0; d < 3; ++d) out.channel(AttributeMaps::dim_channel(d))[target] = rng.uniform(0.5, 5.0);
          for (int j = 0; j < 2 * num_reference_points(maps.layout()); ++j) {
            out.channel(AttributeMaps::offset_u_channel(0) + j)[target] = rng.uniform(-200.0, 200.0);
          }
          if (maps.has_angles()) {
            const AngleEncoding enc = encode_viewing_angle(rng.uniform(-kPi, kPi), true);
            out.channel(maps.angle_channel(0))[target] = enc.c2;
            out.channel(maps.angle_channel(1))[target] = enc.s2;
            out.channel(maps.angle_channel(2))[target] = enc.c1;
            out.channel(maps.angle_channel(3))[target] = enc.s1;
          }
        }
      }
    }
  }
}

std::vector<Box3D> sample_boxes(const CameraModel& cam, const SceneSampler& sampler, Rng& rng) {
  if (sampler.boxes_per_scene < 0 || !(sampler.z_min > 0.0) || sampler.z_max < sampler.z_min) {
    throw Error(ErrorCode::InvalidArgument, "invalid scene sampler");
  }
  const double max_bearing = sampler.max_bearing > 0.0 ? sampler.max_bearing : default_max_bearing(cam);
  std::vector<Box3D> boxes;
  constexpr int kMaxAttempts = 1000;
  for (int b = 0; b < sampler.boxes_per_scene; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      Box3D box;
      box.dims = {rng.uniform(1.4, 1.8), rng.uniform(1.5, 2.0), rng.uniform(3.5, 4.8)};
      box.ry = normalize_angle(rng.uniform(-kPi, kPi));
      const double bearing = rng.uniform(-max_bearing, max_bearing);
      const double range = rng.uniform(sampler.z_min, sampler.z_max);
      box.x = range * std::sin(bearing);
      box.z = range * std::cos(bearing);
      box.y = sampler.perpendicular ? 0.5 * box.dims.h : sampler.ground_y;
      if (fully_visible(cam, box)) {
        boxes.push_back(box);
        placed = true;
      }
    }
    if (!placed) throw Error(ErrorCode::InvalidArgument, "could not place a fully visible box");
  }
  return boxes;
}

ErrorStats summarize(std::vector<double> values) {
  ErrorStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95 = values[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

namespace {

struct TrialErrors {
  std::vector<double> center, depth, dims, yaw;
  std::size_t failures = 0;
};

void score(const LiftResult& lifted, const RenderedScene& scene, TrialErrors& acc) {
  acc.failures += lifted.failures.size();
  for (const LiftedInstance& obj : lifted.objects) {
    const Box3D& gt = scene.objects[obj.id - 1].box;
    acc.center.push_back((obj.box.center() - gt.center()).norm());
    acc.depth.push_back(std::abs(obj.box.center().norm() - gt.center().norm()));
    acc.dims.push_back(std::max({std::abs(obj.box.dims.h - gt.dims.h), std::abs(obj.box.dims.w - gt.dims.w),
                                 std::abs(obj.box.dims.l - gt.dims.l)}));
    acc.yaw.push_back(angle_distance(obj.box.ry, gt.ry));
  }
}

MethodStats merge(const std::vector<TrialErrors>& trials) {
  std::vector<double> center, depth, dims, yaw;
  MethodStats m;
  for (const TrialErrors& t : trials) {
    center.insert(center.end(), t.center.begin(), t.center.end());
    depth.insert(depth.end(), t.depth.begin(), t.depth.end());
    dims.insert(dims.end(), t.dims.begin(), t.dims.end());
    yaw.insert(yaw.end(), t.yaw.begin(), t.yaw.end());
    m.failures += t.failures;
  }
  m.center = summarize(std::move(center));
  m.depth = summarize(std::move(depth));
  m.dims = summarize(std::move(dims));
  m.yaw = summarize(std::move(yaw));
  return m;
}

}  // namespace

RoundtripReport roundtrip_report(const SceneSpec& spec, const NoiseSpec& noise, int trials,
                                 const RoundtripOptions& opts) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  validate(noise);

  std::vector<TrialErrors> two(trials), eight(trials);
  std::vector<std::exception_ptr> errors(trials);
  std::atomic<int> next{0};
  LiftOptions lift_opts;
  lift_opts.lm = opts.lm;

  auto run_trial = [&](int t) {
    const std::uint64_t trial_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(t));
    Rng rng(trial_seed);
    const std::vector<Box3D> boxes = spec.boxes.empty() ? sample_boxes(spec.cam, opts.sampler, rng) : spec.boxes;
    for (RPLayout layout : {RPLayout::TwoRP, RPLayout::EightRP}) {
      RenderedScene scene = render_scene(SceneSpec{spec.cam, boxes, trial_seed, layout, true});
      perturb_in_place(scene.mask, scene.maps, noise, trial_seed);
      const LiftResult lifted = lift_instances(scene.mask, scene.maps, spec.cam, {}, lift_opts);
      score(lifted, scene, layout == RPLayout::TwoRP ? two[t] : eight[t]);
    }
  };
  auto worker = [&] {
    for (int t = next++; t < trials; t = next++) {
      try {
        run_trial(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(opts.jobs, 1, trials);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  RoundtripReport report;
  report.seed = spec.seed;
  report.trials = trials;
  report.noise = noise;
  report.two_rp = merge(two);
  report.eight_rp = merge(eight);
  return report;
}

}  // namespace rplift
