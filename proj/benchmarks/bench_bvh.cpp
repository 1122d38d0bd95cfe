#include <benchmark/benchmark.h>

#include <random>

#include "facefit/evalbench.hpp"
#include "facefit/synthetic.hpp"

using namespace facefit;

namespace {

TriMesh mm_sphere(int subdivisions) {
    TriMesh mesh = icosphere(subdivisions);
    mesh.vertices *= 100.0;
    return mesh;
}

} // namespace

static void BM_BvhBuild(benchmark::State& state) {
    const TriMesh mesh = mm_sphere(int(state.range(0)));
    for (auto _ : state) {
        const TriangleBvh bvh(mesh.vertices, mesh.triangles);
        benchmark::DoNotOptimize(&bvh);
    }
}
BENCHMARK(BM_BvhBuild)->Arg(2)->Arg(3)->Arg(4);

static void BM_BvhNearest(benchmark::State& state) {
    const TriMesh mesh = mm_sphere(int(state.range(0)));
    const TriangleBvh bvh(mesh.vertices, mesh.triangles);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-200.0, 200.0);
    for (auto _ : state) {
        const SurfaceHit hit = bvh.nearest({uni(rng), uni(rng), uni(rng)});
        benchmark::DoNotOptimize(hit.distance);
    }
}
BENCHMARK(BM_BvhNearest)->Arg(2)->Arg(3)->Arg(4);

static void BM_BruteForceNearest(benchmark::State& state) {
    const TriMesh mesh = mm_sphere(int(state.range(0)));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-200.0, 200.0);
    for (auto _ : state) {
        const Eigen::Vector3d q(uni(rng), uni(rng), uni(rng));
        double best = std::numeric_limits<double>::infinity();
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            Eigen::Vector3d closest;
            best = std::min(best, point_triangle_distance2(q, mesh.vertices.row(mesh.triangles(t, 0)),
                                                           mesh.vertices.row(mesh.triangles(t, 1)),
                                                           mesh.vertices.row(mesh.triangles(t, 2)),
                                                           closest));
        }
        benchmark::DoNotOptimize(best);
    }
}
BENCHMARK(BM_BruteForceNearest)->Arg(2)->Arg(3);

static void BM_ComputeMetrics(benchmark::State& state) {
    const TriMesh mesh = mm_sphere(3);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    PointCloud gt;
    gt.points.resize(10000, 3);
    gt.normals.resize(10000, 3);
    for (int i = 0; i < 10000; ++i) {
        Eigen::Vector3d d(gauss(rng), gauss(rng), gauss(rng));
        d.normalize();
        gt.points.row(i) = ((100.0 + 2.0 * gauss(rng)) * d).transpose();
        gt.normals.row(i) = d.transpose();
    }
    for (auto _ : state) {
        const MetricsRecord rec = compute_metrics(mesh, gt);
        benchmark::DoNotOptimize(rec.l1_mm);
    }
}
BENCHMARK(BM_ComputeMetrics);
