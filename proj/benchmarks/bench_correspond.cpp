#include <benchmark/benchmark.h>

#include <random>

#include "facefit/correspond.hpp"
#include "facefit/synthetic.hpp"

using namespace facefit;

static void BM_BuildUvIndex(benchmark::State& state) {
    const MorphableModel model = sphere_head_model();
    std::mt19937_64 rng(1);
    const CameraParams cam = sample_camera(model, 512, 512, rng);
    const FitInputs inputs = render_fit_inputs(model, FaceParams::zero(model), cam, 512, 512);
    for (auto _ : state) {
        const UvIndex index = build_uv_index(inputs.uv_map, inputs.mask);
        benchmark::DoNotOptimize(index.entry_count());
    }
}
BENCHMARK(BM_BuildUvIndex);

static void BM_FindCorrespondences(benchmark::State& state) {
    const MorphableModel model = sphere_head_model();
    std::mt19937_64 rng(1);
    const CameraParams cam = sample_camera(model, 512, 512, rng);
    const FitInputs inputs = render_fit_inputs(model, FaceParams::zero(model), cam, 512, 512);
    const UvIndex index = build_uv_index(inputs.uv_map, inputs.mask);
    for (auto _ : state) {
        const CorrespondenceSet corr = find_correspondences(model, index, 0.0027);
        benchmark::DoNotOptimize(corr.accepted_count());
    }
}
BENCHMARK(BM_FindCorrespondences);

static void BM_UvQueryVsExhaustive(benchmark::State& state) {
    // nearest() against the grid, compared with what a full scan would cost
    const MorphableModel model = sphere_head_model();
    std::mt19937_64 rng(1);
    const CameraParams cam = sample_camera(model, 512, 512, rng);
    const FitInputs inputs = render_fit_inputs(model, FaceParams::zero(model), cam, 512, 512);
    const UvIndex index = build_uv_index(inputs.uv_map, inputs.mask);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::mt19937_64 qrng(7);
    for (auto _ : state) {
        const auto hit = index.nearest(Eigen::Vector2d(uni(qrng), uni(qrng)));
        benchmark::DoNotOptimize(hit.row_major);
    }
}
BENCHMARK(BM_UvQueryVsExhaustive);
