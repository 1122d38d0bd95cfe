#include <benchmark/benchmark.h>

#include <random>

#include "facefit/correspond.hpp"
#include "facefit/fitter.hpp"
#include "facefit/synthetic.hpp"

using namespace facefit;

static void BM_EnergyAndGradients(benchmark::State& state) {
    const MorphableModel model = sphere_head_model();
    std::mt19937_64 rng(11);
    const FaceParams truth = sample_face_params(model, rng);
    const CameraParams cam = sample_camera(model, 256, 256, rng);
    const FitInputs inputs = render_fit_inputs(model, truth, cam, 256, 256);
    const UvIndex index = build_uv_index(inputs.uv_map, inputs.mask);
    FitConfig config;
    const CorrespondenceSet corr = find_correspondences(model, index, config.delta_uv);

    FaceParams face = truth;
    face.expression_coeffs.array() += 0.2;
    for (auto _ : state) {
        const EnergyGradients eval = energy_and_gradients(model, face, cam, inputs, config, corr);
        benchmark::DoNotOptimize(eval.terms.total);
    }
}
BENCHMARK(BM_EnergyAndGradients)->Unit(benchmark::kMillisecond);

static void BM_FitImage(benchmark::State& state) {
    const MorphableModel model = sphere_head_model();
    std::mt19937_64 rng(13);
    const FaceParams truth = sample_face_params(model, rng);
    const CameraParams cam = sample_camera(model, 256, 256, rng);
    FitInputs inputs = render_fit_inputs(model, truth, cam, 256, 256);
    inputs.mica_identity = truth.identity_coeffs;

    FitConfig config;
    config.steps = int(state.range(0));
    for (auto _ : state) {
        const FitResult result = fit_image(model, inputs, config);
        benchmark::DoNotOptimize(result.term_breakdown.total);
    }
}
BENCHMARK(BM_FitImage)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
