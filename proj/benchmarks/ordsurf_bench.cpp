#include <benchmark/benchmark.h>

#include <utility>
#include <vector>

#include "ordsurf/autodiff.hpp"
#include "ordsurf/discretize.hpp"
#include "ordsurf/net.hpp"
#include "ordsurf/ordinal.hpp"
#include "ordsurf/prng.hpp"
#include "ordsurf/raster.hpp"
#include "ordsurf/stitch.hpp"

using namespace ordsurf;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  SplitMix64 rng(seed);
  for (float& v : t.data) v = float(rng.uniform(lo, hi));
  return t;
}

NetConfig bench_net_config() {
  NetConfig cfg;
  cfg.stem_channels = 8;
  cfg.stage_channels = {8, 16, 32, 32};
  cfg.blocks_per_stage = {1, 1, 1, 1};
  cfg.aspp_rates = {1, 2, 3};
  cfg.aspp_channels = 16;
  cfg.K = 16;
  cfg.head = HeadKind::Ordinal2K;
  cfg.patch_size = 64;
  return cfg;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
  const int ch = int(state.range(0));
  const Tensor x = random_tensor({1, ch, 64, 64}, 1);
  const Tensor w = random_tensor({ch, ch, 3, 3}, 2);
  const Tensor b = random_tensor({ch}, 3);
  for (auto _ : state) {
    Tensor out = kernels::conv2d_forward(x, w, b, 1, 1, 1);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 64 * 64 * ch * ch * 9);
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Arg(32);

static void BM_NetForwardBackward(benchmark::State& state) {
  Net net(bench_net_config(), 7, Net::HeadInit::Random);
  const Tensor input = random_tensor({4, 3, 64, 64}, 4, 0.0, 1.0);
  SplitMix64 rng(5);
  std::vector<std::uint16_t> target(std::size_t(4) * 64 * 64);
  for (auto& c : target) c = std::uint16_t(rng.below(16));
  for (auto _ : state) {
    net.zero_grad();
    auto out = net.forward(input);
    Tensor seed;
    const double loss = ordinal_nll_batch(out->value, target, 16, &seed);
    benchmark::DoNotOptimize(loss);
    backward(out, seed);
  }
  state.SetItemsProcessed(state.iterations() * 4);  // patches per step
}
BENCHMARK(BM_NetForwardBackward)->Unit(benchmark::kMillisecond);

static void BM_OrdinalLossBatch(benchmark::State& state) {
  const int K = 16;
  const Tensor logits = random_tensor({4, 2 * K, 64, 64}, 6, -2.0, 2.0);
  SplitMix64 rng(7);
  std::vector<std::uint16_t> target(std::size_t(4) * 64 * 64);
  for (auto& c : target) c = std::uint16_t(rng.below(K));
  Tensor grad;
  for (auto _ : state) {
    const double loss = ordinal_nll_batch(logits, target, K, &grad);
    benchmark::DoNotOptimize(loss);
    benchmark::DoNotOptimize(grad.data.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(target.size()));
}
BENCHMARK(BM_OrdinalLossBatch);

static void BM_EncodeMap(benchmark::State& state) {
  const DiscretizationScheme scheme = make_scheme(SchemeKind::SID, 0.0, 40.0, 16);
  RasterGrid grid = RasterGrid::filled(512, 512, 0.0f);
  SplitMix64 rng(8);
  for (float& v : grid.data) v = float(rng.uniform(0.0, 40.0));
  for (auto _ : state) {
    ClassMap cm = encode_map(grid, scheme);
    benchmark::DoNotOptimize(cm.classes.data());
  }
  state.SetItemsProcessed(state.iterations() * 512 * 512);
}
BENCHMARK(BM_EncodeMap);

static void BM_Stitch3x3(benchmark::State& state) {
  // 3x3 grid of 128 px patches over a smooth surface, like predict produces
  RasterGrid surface = RasterGrid::filled(368, 368, 0.0f);
  for (int y = 0; y < 368; ++y)
    for (int x = 0; x < 368; ++x) surface.at(x, y) = 0.02f * float(x) + 0.01f * float(y);
  const PatchLayout layout = plan_grid(368, 368, 128, 8);
  std::vector<RasterGrid> patches;
  for (const PatchRect& r : layout.rects)
    patches.push_back(localize_patch(surface, r.x0, r.y0, r.size).grid);
  for (auto _ : state) {
    StitchResult res = stitch(patches, layout);
    benchmark::DoNotOptimize(res.raster.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 368 * 368);
}
BENCHMARK(BM_Stitch3x3);

BENCHMARK_MAIN();
