#include <benchmark/benchmark.h>

#include "harmony/attribution/grad_cam.hpp"
#include "harmony/attribution/soundness.hpp"
#include "harmony/data/shapes.hpp"
#include "harmony/model/zoo.hpp"

namespace {

using namespace harmony;

Dataset shapes(int n) {
  ShapesParams p;
  p.n = n;
  p.num_classes = 3;
  p.side = 16;
  p.seed = 1;
  return generate_shapes_dataset(p);
}

void BM_CnnForward(benchmark::State& state) {
  const CnnSize size = state.range(0) == 0 ? CnnSize::kSmall : CnnSize::kLarge;
  ClassifierAdapter model = build_toy_cnn(size, toy_input_spec(3, 16), 3, 1);
  const Dataset d = shapes(64);
  std::vector<const ImageTensor*> images;
  for (const auto& ex : d) images.push_back(&ex.image);
  const Tensor batch = stack_images(images);
  for (auto _ : state) benchmark::DoNotOptimize(model.logits(batch));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_CnnForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_VitForward(benchmark::State& state) {
  ClassifierAdapter model = build_toy_vit(toy_input_spec(3, 16), 3, 4, 1);
  const Dataset d = shapes(64);
  std::vector<const ImageTensor*> images;
  for (const auto& ex : d) images.push_back(&ex.image);
  const Tensor batch = stack_images(images);
  for (auto _ : state) benchmark::DoNotOptimize(model.logits(batch));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_VitForward)->Unit(benchmark::kMillisecond);

// One SS objective + gradient evaluation with the pinned desk settings.
void BM_SSStep(benchmark::State& state) {
  ClassifierAdapter model = build_toy_cnn(CnnSize::kSmall, toy_input_spec(3, 16), 3, 1);
  const Dataset d = shapes(8);
  const std::vector<ImageTensor> baselines{d[1].image, d[2].image, d[3].image, d[4].image};
  SSConfig c;
  c.objective_mode = ObjectiveMode::kLabelCe;
  c.mask_grid = 8;
  c.tv_weight = 3;
  c.sparsity_weight = 0.25;
  const std::vector<double> theta(64, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(ss_objective(model, d[0].image, theta, baselines, c, d[0].label));
}
BENCHMARK(BM_SSStep)->Unit(benchmark::kMicrosecond);

void BM_GradCam(benchmark::State& state) {
  ClassifierAdapter model = build_toy_cnn(CnnSize::kLarge, toy_input_spec(3, 16), 3, 1);
  const Dataset d = shapes(3);
  const std::string layer = model.default_cam_layer();
  for (auto _ : state) benchmark::DoNotOptimize(grad_cam(model, d[0], layer));
}
BENCHMARK(BM_GradCam)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
