#include <benchmark/benchmark.h>

#include "rplift/eval.hpp"
#include "rplift/random.hpp"
#include "rplift/refine.hpp"
#include "rplift/synth.hpp"
#include "rplift/voting.hpp"

using namespace rplift;

namespace {

CameraModel kitti() { return CameraModel(PinholeIntrinsics{721.5377, 721.5377, 609.5593, 172.854, 1242, 375}); }

std::vector<Box3D> boxes(int n, std::uint64_t seed) {
  SceneSampler sampler;
  sampler.boxes_per_scene = n;
  Rng rng(seed);
  return sample_boxes(kitti(), sampler, rng);
}

void BM_BevIou(benchmark::State& state) {
  Rng rng(1);
  std::vector<std::pair<Box3D, Box3D>> pairs;
  for (int i = 0; i < 256; ++i) {
    pairs.push_back({Box3D{0, 1, 10, {1.5, 1.6, 4}, rng.uniform(-3, 3)},
                     Box3D{rng.uniform(-1, 1), 1, 10 + rng.uniform(-1, 1), {1.5, 1.7, 4.2}, rng.uniform(-3, 3)}});
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& [a, b] = pairs[i++ % pairs.size()];
    benchmark::DoNotOptimize(state.range(0) ? iou_3d(a, b) : bev_iou(a, b));
  }
}
BENCHMARK(BM_BevIou)->Arg(0)->Arg(1)->ArgNames({"3d"});

void BM_RefineLM(benchmark::State& state) {
  const CameraModel cam = kitti();
  const Box3D gt = boxes(1, 2).front();
  const auto rp = project_reference_points(cam, gt, RPLayout::EightRP);
  Box3D init = gt;
  init.x += 1.0;
  init.z -= 1.5;
  init.ry += 0.15;
  LMOptions opts;
  opts.optimize_dims = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(refine_box_lm(cam, init, rp, opts));
}
BENCHMARK(BM_RefineLM)->Arg(0)->Arg(1)->ArgNames({"dims"});

void BM_Aggregate(benchmark::State& state) {
  const CameraModel cam = kitti();
  const auto layout = state.range(0) == 2 ? RPLayout::TwoRP : RPLayout::EightRP;
  const RenderedScene scene = render_scene(SceneSpec{cam, boxes(4, 3), 0, layout, true});
  std::int64_t pixels = 0;
  for (const auto& o : scene.objects) pixels += o.pixel_count;
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_all(scene.mask, scene.maps, cam));
  state.SetItemsProcessed(state.iterations() * pixels);
}
BENCHMARK(BM_Aggregate)->Arg(2)->Arg(8)->ArgNames({"rps"})->Unit(benchmark::kMicrosecond);

void BM_Lift(benchmark::State& state) {
  const CameraModel cam = kitti();
  const RenderedScene scene = render_scene(SceneSpec{cam, boxes(4, 4), 0, RPLayout::EightRP, true});
  for (auto _ : state) benchmark::DoNotOptimize(lift_instances(scene.mask, scene.maps, cam));
}
BENCHMARK(BM_Lift)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
