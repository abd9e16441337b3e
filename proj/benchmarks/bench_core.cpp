// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include <solidsplat/depth.hpp>
#include <solidsplat/grad.hpp>
#include <solidsplat/optimize.hpp>
#include <solidsplat/render.hpp>
#include <solidsplat/synthetic.hpp>

#include <benchmark/benchmark.h>

using namespace solidsplat;

namespace {

Scene cluster(std::size_t n) {
    return synthetic::random_scene(n, Vec3(-0.4, -0.4, 2.0), Vec3(0.4, 0.4, 4.0), 0.2, 0.5, 3);
}

const Ray kRay = make_ray(Vec3::Zero(), Vec3::UnitZ());

void BM_RestrictToRay(benchmark::State &state) {
    const auto scene = cluster(64);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(restrict_to_ray(scene[i++ % scene.size()], kRay));
    }
}
BENCHMARK(BM_RestrictToRay);

void BM_GatherProfile(benchmark::State &state) {
    const auto scene = cluster(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(gather_profile(scene, kRay));
}
BENCHMARK(BM_GatherProfile)->Arg(16)->Arg(256);

void BM_MedianDepth(benchmark::State &state) {
    const auto profile = gather_profile(cluster(static_cast<std::size_t>(state.range(0))), kRay);
    const auto t_init = initial_depth(profile).value_or(3.0);
    const int traversals = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(median_depth(profile, t_init, kDefaultBracketRadius, traversals));
}
BENCHMARK(BM_MedianDepth)->Args({8, 5})->Args({64, 5})->Args({64, 14});

void BM_DepthBackward(benchmark::State &state) {
    const auto scene = cluster(static_cast<std::size_t>(state.range(0)));
    const auto profile = gather_profile(scene, kRay);
    const auto m = median_depth(profile, initial_depth(profile).value_or(3.0));
    GradientTerms terms;
    for (auto _ : state) {
        terms.clear();
        benchmark::DoNotOptimize(depth_backward(profile, scene, m, 1.0, terms));
    }
}
BENCHMARK(BM_DepthBackward)->Arg(8)->Arg(64);

void BM_RenderView(benchmark::State &state) {
    const auto scene = synthetic::sphere_gaussians(synthetic::Sphere{}, 400);
    const auto cam = synthetic::camera_ring(8, Vec3::Zero(), 3.0, 0.5, 50, 48, 48)[0];
    RenderOptions options;
    options.workers = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(render_view(scene, cam, options));
}
BENCHMARK(BM_RenderView)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_TrainingLoss(benchmark::State &state) {
    const synthetic::Sphere sphere;
    const auto cams = synthetic::camera_ring(8, Vec3::Zero(), 3.0, 0.5, 50, 48, 48);
    const TrainView ref{cams[0], synthetic::render_sphere(cams[0], sphere).image, std::nullopt};
    const TrainView nbr{cams[1], synthetic::render_sphere(cams[1], sphere).image, std::nullopt};
    const auto scene = synthetic::random_scene(200, Vec3::Constant(-1.2), Vec3::Constant(1.2), 0.06, 0.18, 1);
    const TrainConfig config;
    const bool geometric = state.range(0) != 0;
    for (auto _ : state) {
        GradientBuffer grads;
        benchmark::DoNotOptimize(training_loss(scene, ref, &nbr, config, geometric, &grads));
    }
}
BENCHMARK(BM_TrainingLoss)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
