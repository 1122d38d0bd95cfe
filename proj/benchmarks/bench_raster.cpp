#include <benchmark/benchmark.h>

#include "facefit/raster.hpp"
#include "facefit/synthetic.hpp"

using namespace facefit;

namespace {

struct Scene {
    MorphableModel model = sphere_head_model();
    FaceParams face = FaceParams::zero(model);
    CameraParams cam;
    Eigen::MatrixX3d verts;

    explicit Scene(int wh) {
        cam.focal_length = wh;
        cam.principal_point = Eigen::Vector2d(wh / 2.0, wh / 2.0);
        cam.translation = Eigen::Vector3d(0, 0, 0.55);
        verts = model_forward(model, face);
    }
};

} // namespace

static void BM_Rasterize(benchmark::State& state) {
    const int wh = int(state.range(0));
    const Scene scene(wh);
    for (auto _ : state) {
        const FragmentBuffer frag =
            rasterize(scene.verts, scene.model.triangles, scene.cam, wh, wh, int(state.range(1)));
        benchmark::DoNotOptimize(frag.depth.data());
    }
}
BENCHMARK(BM_Rasterize)->Args({256, 1})->Args({256, 4})->Args({512, 1})->Args({512, 4});

static void BM_RenderMaps(benchmark::State& state) {
    const int wh = int(state.range(0));
    const Scene scene(wh);
    for (auto _ : state) {
        const RenderedMaps maps = render_maps(scene.model, scene.face, scene.cam, wh, wh);
        benchmark::DoNotOptimize(maps.uv_map.data.data());
    }
}
BENCHMARK(BM_RenderMaps)->Arg(256)->Arg(512);

static void BM_VisibleVertices(benchmark::State& state) {
    const int wh = 256;
    const Scene scene(wh);
    const FragmentBuffer frag = rasterize(scene.verts, scene.model.triangles, scene.cam, wh, wh);
    for (auto _ : state) {
        auto vis = visible_vertices(scene.verts, scene.model.triangles, scene.cam, frag);
        benchmark::DoNotOptimize(vis.data());
    }
}
BENCHMARK(BM_VisibleVertices);
