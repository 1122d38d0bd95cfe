// Acceptance suite: one self-contained check per criterion, each printing a
// single [PASS]/[FAIL] line. Run all or select one with --criterion N.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "facefit/correspond.hpp"
#include "facefit/evalbench.hpp"
#include "facefit/fitter.hpp"
#include "facefit/io.hpp"
#include "facefit/model.hpp"
#include "facefit/raster.hpp"
#include "facefit/rotation.hpp"
#include "facefit/synthetic.hpp"
#include "facefit/tracker.hpp"

using namespace facefit;
namespace fs = std::filesystem;

namespace {

int checks_failed = 0;

void expect(bool ok, const char* what) {
    if (!ok) {
        ++checks_failed;
        std::printf("    FAILED check: %s\n", what);
    }
}

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-12});
}

// ---------------------------------------------------------------- criterion 1

bool criterion1_gradients() {
    checks_failed = 0;
    const MorphableModel model = sphere_head_model();

    // forward_jacobian vs central differences, 50 seeds
    for (int seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        const FaceParams p = sample_face_params(model, rng);
        const Eigen::MatrixXd jac = model_forward_jacobian(model, p);
        std::uniform_int_distribution<int> pick(0, p.dof() - 1);
        const int d = pick(rng);
        const double h = 1e-5;
        FaceParams lo = p, hi = p;
        auto bump = [&](FaceParams& q, double delta) {
            if (d < model.id_dim())
                q.identity_coeffs[d] += delta;
            else if (d < model.id_dim() + model.ex_dim())
                q.expression_coeffs[d - model.id_dim()] += delta;
            else
                q.jaw_rotation[d - model.id_dim() - model.ex_dim()] += delta;
        };
        bump(lo, -h);
        bump(hi, h);
        const Eigen::MatrixX3d flo = model_forward(model, lo);
        const Eigen::MatrixX3d fhi = model_forward(model, hi);
        double worst = 0;
        for (int v = 0; v < model.vertex_count(); ++v)
            for (int c = 0; c < 3; ++c) {
                const double fd = (fhi(v, c) - flo(v, c)) / (2 * h);
                const double an = jac(3 * v + c, d);
                if (std::abs(fd) > 1e-8 || std::abs(an) > 1e-8)
                    worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(fd), 1e-6));
            }
        expect(worst < 1e-4, "forward_jacobian finite differences");
    }

    // project_jacobian vs central differences, 50 seeds
    for (int seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(2000 + seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        CameraParams cam;
        cam.rotation = 0.5 * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
        cam.translation = Eigen::Vector3d(0.05 * gauss(rng), 0.05 * gauss(rng), 0.6);
        cam.focal_length = 300 * std::exp(0.1 * gauss(rng));
        cam.principal_point = Eigen::Vector2d(128, 128);
        const Eigen::Vector3d point(0.1 * gauss(rng), 0.1 * gauss(rng), 0.05 * gauss(rng));
        if (cam.to_camera_frame(point).z() < 0.1) continue;
        const PixelJacobian jac = project_jacobian(point, cam);

        auto pixel_of = [&](const CameraParams& c, const Eigen::Vector3d& p) {
            Eigen::MatrixX3d m(1, 3);
            m.row(0) = p;
            return Eigen::Vector2d(project(m, c).pixels.row(0));
        };
        const double h = 1e-6;
        double worst = 0;
        auto count = [&](const Eigen::Vector2d& fd, const Eigen::Vector2d& an) {
            for (int r = 0; r < 2; ++r)
                if (std::abs(fd[r]) > 1e-7 || std::abs(an[r]) > 1e-7)
                    worst = std::max(worst, std::abs(an[r] - fd[r]) / std::max(std::abs(fd[r]), 1e-4));
        };
        for (int c = 0; c < 3; ++c) {
            CameraParams lo = cam, hi = cam;
            lo.rotation[c] -= h;
            hi.rotation[c] += h;
            count((pixel_of(hi, point) - pixel_of(lo, point)) / (2 * h), jac.d_rotation.col(c));
            Eigen::Vector3d plo = point, phi = point;
            plo[c] -= h;
            phi[c] += h;
            count((pixel_of(cam, phi) - pixel_of(cam, plo)) / (2 * h), jac.d_point.col(c));
        }
        expect(worst < 1e-4, "project_jacobian finite differences");
    }

    // per-loss finite differences, 50 seeds each
    for (int seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(3000 + seed);
        std::normal_distribution<double> gauss(0.0, 4.0);
        const int n = 12;
        CorrespondenceSet corr;
        corr.target_pixels.resize(n, 2);
        corr.uv_distances = Eigen::VectorXd::Zero(n);
        corr.accepted.assign(n, 1);
        std::vector<std::uint8_t> visible(n, 1);
        Eigen::MatrixX2d projected(n, 2);
        for (int v = 0; v < n; ++v) {
            corr.target_pixels.row(v) << gauss(rng), gauss(rng);
            projected.row(v) << gauss(rng), gauss(rng);
            if (v % 3 == 0) corr.accepted[v] = 0;
        }
        const UvLossResult uv = uv_vertex_loss(corr, projected, visible);
        const double h = 1e-6;
        double worst = 0;
        for (int v = 0; v < n; ++v)
            for (int c = 0; c < 2; ++c) {
                Eigen::MatrixX2d lo = projected, hi = projected;
                lo(v, c) -= h;
                hi(v, c) += h;
                const double fd = (uv_vertex_loss(corr, hi, visible).value -
                                   uv_vertex_loss(corr, lo, visible).value) /
                                  (2 * h);
                if (std::abs(fd) > 1e-9 || std::abs(uv.grad(v, c)) > 1e-9)
                    worst = std::max(worst, rel_err(uv.grad(v, c), fd));
            }
        expect(worst < 1e-4, "uv_vertex_loss finite differences");

        // normal loss
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        MapImage pred = MapImage::zeros(5, 4, 3, true);
        MapImage rend = MapImage::zeros(5, 4, 3, true);
        MapImage mask = MapImage::zeros(5, 4, 1, true);
        for (auto& v : pred.data) v = float(uni(rng));
        for (auto& v : rend.data) v = float(uni(rng));
        const NormalLossResult nl = normal_loss(pred, rend, mask);
        worst = 0;
        for (const auto& pg : nl.pixel_grads)
            for (int c = 0; c < 3; ++c) {
                MapImage lo = rend, hi = rend;
                lo.at(pg.y, pg.x, c) -= 1e-3f;
                hi.at(pg.y, pg.x, c) += 1e-3f;
                const double fd =
                    (normal_loss(pred, hi, mask).value - normal_loss(pred, lo, mask).value) / 2e-3;
                worst = std::max(worst, rel_err(pg.grad[c], fd));
            }
        expect(worst < 1e-4, "normal_loss finite differences");

        // regularizer
        FaceParams face;
        face.identity_coeffs = Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) { return uni(rng); });
        face.expression_coeffs =
            Eigen::VectorXd::NullaryExpr(4, [&](Eigen::Index) { return uni(rng); });
        Eigen::VectorXd anchor =
            Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) { return uni(rng); });
        const RegResult reg = regularization(face, anchor, 0.15, 0.01);
        worst = 0;
        for (int k = 0; k < 8; ++k) {
            FaceParams lo = face, hi = face;
            lo.identity_coeffs[k] -= 1e-5;
            hi.identity_coeffs[k] += 1e-5;
            const double fd = (regularization(hi, anchor, 0.15, 0.01).value -
                               regularization(lo, anchor, 0.15, 0.01).value) /
                              2e-5;
            worst = std::max(worst, rel_err(reg.grad_identity[k], fd));
        }
        expect(worst < 1e-6, "regularizer finite differences");

        // landmark loss
        std::vector<Landmark2d> lms = {{1, {gauss(rng), gauss(rng)}},
                                       {4, {gauss(rng), gauss(rng)}},
                                       {7, {gauss(rng), gauss(rng)}}};
        const LandmarkLossResult lmk = landmark_loss(lms, projected);
        worst = 0;
        for (int v = 0; v < n; ++v)
            for (int c = 0; c < 2; ++c) {
                Eigen::MatrixX2d lo = projected, hi = projected;
                lo(v, c) -= h;
                hi(v, c) += h;
                const double fd =
                    (landmark_loss(lms, hi).value - landmark_loss(lms, lo).value) / (2 * h);
                if (std::abs(fd) > 1e-9 || std::abs(lmk.grad(v, c)) > 1e-9)
                    worst = std::max(worst, rel_err(lmk.grad(v, c), fd));
            }
        expect(worst < 1e-4, "landmark_loss finite differences");

        // smoothness
        std::vector<Eigen::VectorXd> seq(5);
        for (auto& v : seq)
            v = Eigen::VectorXd::NullaryExpr(3, [&](Eigen::Index) { return gauss(rng); });
        const SmoothnessResult sm = smoothness_loss(seq, 2.5);
        worst = 0;
        for (int t = 0; t < 5; ++t)
            for (int c = 0; c < 3; ++c) {
                auto lo = seq, hi = seq;
                lo[t][c] -= 1e-5;
                hi[t][c] += 1e-5;
                const double fd =
                    (smoothness_loss(hi, 2.5).value - smoothness_loss(lo, 2.5).value) / 2e-5;
                worst = std::max(worst, rel_err(sm.grads[t][c], fd));
            }
        expect(worst < 1e-6, "smoothness_loss finite differences");
    }

    // full-energy directional derivatives on a rendered scene
    {
        const int wh = 128;
        std::mt19937_64 rng(4000);
        const FaceParams truth = sample_face_params(model, rng);
        const CameraParams true_cam = sample_camera(model, wh, wh, rng);
        const FitInputs inputs = render_fit_inputs(model, truth, true_cam, wh, wh);
        const UvIndex index = build_uv_index(inputs.uv_map, inputs.mask);
        FitConfig config;
        const CorrespondenceSet corr = find_correspondences(model, index, config.delta_uv);

        FaceParams face = truth;
        face.identity_coeffs.array() += 0.15;
        face.expression_coeffs.array() -= 0.1;
        CameraParams cam = true_cam;
        cam.translation.z() *= 1.02;

        const int dof = face.dof() + 9;
        auto unpack = [&](const Eigen::VectorXd& x) {
            FaceParams f = face;
            CameraParams c = cam;
            int o = 0;
            f.identity_coeffs = x.segment(o, model.id_dim());
            o += model.id_dim();
            f.expression_coeffs = x.segment(o, model.ex_dim());
            o += model.ex_dim();
            f.jaw_rotation = x.segment<3>(o);
            o += 3;
            c.rotation = x.segment<3>(o);
            o += 3;
            c.translation = x.segment<3>(o);
            o += 3;
            c.focal_length = x[o++];
            c.principal_point = x.segment<2>(o);
            return std::make_pair(f, c);
        };
        Eigen::VectorXd x0(dof);
        x0 << face.identity_coeffs, face.expression_coeffs, face.jaw_rotation, cam.rotation,
            cam.translation, cam.focal_length, cam.principal_point;

        const EnergyGradients base = energy_and_gradients(model, face, cam, inputs, config, corr);
        Eigen::VectorXd grad(dof);
        grad << base.face_grad, base.cam_grad;

        std::normal_distribution<double> gauss(0.0, 1.0);
        const double h = 1e-6;
        for (int dir_i = 0; dir_i < 10; ++dir_i) {
            Eigen::VectorXd dir = Eigen::VectorXd::NullaryExpr(dof, [&](Eigen::Index) { return gauss(rng); });
            dir.normalize();
            const auto [f_hi, c_hi] = unpack(x0 + h * dir);
            const auto [f_lo, c_lo] = unpack(x0 - h * dir);
            const double e_hi = energy_and_gradients(model, f_hi, c_hi, inputs, config, corr).terms.total;
            const double e_lo = energy_and_gradients(model, f_lo, c_lo, inputs, config, corr).terms.total;
            const double fd = (e_hi - e_lo) / (2 * h);
            const double an = grad.dot(dir);
            expect(rel_err(an, fd) < 5e-3, "full-energy directional derivative");
        }
    }
    return checks_failed == 0;
}

// ------------------------------------------------------------- criteria 2 & 3

struct RecoveryInstance {
    FaceParams truth_face;
    CameraParams truth_cam;
    FitInputs inputs;
    std::vector<std::uint8_t> visible;
    Eigen::MatrixX3d truth_verts;
    double bbox_diag = 0;
};

RecoveryInstance make_instance(const MorphableModel& model, int wh, std::uint64_t seed) {
    RecoveryInstance inst;
    std::mt19937_64 rng(seed);
    inst.truth_face = sample_face_params(model, rng);
    inst.truth_cam = sample_camera(model, wh, wh, rng);
    inst.inputs = render_fit_inputs(model, inst.truth_face, inst.truth_cam, wh, wh);
    inst.truth_verts = model_forward(model, inst.truth_face);
    const FragmentBuffer frag = rasterize(inst.truth_verts, model.triangles, inst.truth_cam, wh, wh);
    inst.visible = visible_vertices(inst.truth_verts, model.triangles, inst.truth_cam, frag);
    inst.bbox_diag = bounding_box_diagonal(inst.truth_verts);

    // identity anchor: noisy "network prediction" of the true identity
    std::normal_distribution<double> noise(0.0, 0.10);
    Eigen::VectorXd anchor = inst.truth_face.identity_coeffs;
    for (Eigen::Index i = 0; i < anchor.size(); ++i) anchor[i] += noise(rng);
    inst.inputs.mica_identity = anchor;

    // synthetic landmark detections from the true state
    const ProjectionResult proj = project(inst.truth_verts, inst.truth_cam);
    for (const int v : model.landmark_vertex_ids)
        inst.inputs.landmarks2d.push_back({v, proj.pixels.row(v).transpose()});
    return inst;
}

double visible_vertex_rmse(const MorphableModel& model, const RecoveryInstance& inst,
                           const FaceParams& recovered) {
    const Eigen::MatrixX3d verts = model_forward(model, recovered);
    double sum2 = 0;
    int count = 0;
    for (int v = 0; v < model.vertex_count(); ++v) {
        if (!inst.visible[v]) continue;
        sum2 += (verts.row(v) - inst.truth_verts.row(v)).squaredNorm();
        ++count;
    }
    return std::sqrt(sum2 / std::max(1, count));
}

constexpr int kRecoveryInstances = 20;
constexpr int kRecoveryImage = 256;

std::vector<RecoveryInstance> recovery_suite(const MorphableModel& model) {
    std::vector<RecoveryInstance> suite;
    suite.reserve(kRecoveryInstances);
    for (int i = 0; i < kRecoveryInstances; ++i)
        suite.push_back(make_instance(model, kRecoveryImage, 42 + i));
    return suite;
}

bool criterion2_recovery() {
    checks_failed = 0;
    const MorphableModel model = sphere_head_model(4);
    const auto suite = recovery_suite(model);

    FitConfig config; // reference defaults: lambda 2000/200/0.15/0.01, 500 steps
    int passed = 0;
    for (int i = 0; i < kRecoveryInstances; ++i) {
        const FitResult fit = fit_image(model, suite[i].inputs, config);
        const double rmse = visible_vertex_rmse(model, suite[i], fit.face);
        const double fl_err =
            std::abs(fit.cam.focal_length - suite[i].truth_cam.focal_length) /
            suite[i].truth_cam.focal_length;
        const bool ok = rmse < 0.02 * suite[i].bbox_diag && fl_err < 0.05;
        if (ok) ++passed;
        std::printf("    instance %2d: rmse %.4f mm (budget %.4f), fl err %.2f%% %s\n", i,
                    1000 * rmse, 1000 * 0.02 * suite[i].bbox_diag, 100 * fl_err,
                    ok ? "ok" : "FAIL");
    }
    expect(passed == kRecoveryInstances, "20/20 instances recovered");
    return checks_failed == 0;
}

bool criterion3_ablation() {
    checks_failed = 0;
    const MorphableModel model = sphere_head_model(4);
    const auto suite = recovery_suite(model);

    auto median_rmse = [&](const FitConfig& config) {
        std::vector<double> rmses;
        for (const auto& inst : suite) {
            const FitResult fit = fit_image(model, inst.inputs, config);
            rmses.push_back(visible_vertex_rmse(model, inst, fit.face));
        }
        std::sort(rmses.begin(), rmses.end());
        return 0.5 * (rmses[rmses.size() / 2 - 1] + rmses[rmses.size() / 2]);
    };

    FitConfig full;
    FitConfig uv_only = full;
    uv_only.lambda_n = 0;
    FitConfig normal_only = full;
    normal_only.lambda_uv = 0;
    FitConfig lmk_only = full;
    lmk_only.lambda_uv = 0;
    lmk_only.lambda_n = 0;
    lmk_only.lambda_lmk = 1.0;

    const double m_full = median_rmse(full);
    const double m_uv = median_rmse(uv_only);
    const double m_normal = median_rmse(normal_only);
    const double m_lmk = median_rmse(lmk_only);
    std::printf("    median rmse mm: full %.4f  uv-only %.4f  normal-only %.4f  lmk-only %.4f\n",
                1000 * m_full, 1000 * m_uv, 1000 * m_normal, 1000 * m_lmk);

    // ordering with 5% tie tolerance
    expect(m_full <= m_uv * 1.05, "full <= uv-only (5% ties)");
    expect(m_uv <= m_normal * 1.05, "uv-only <= normal-only (5% ties)");
    expect(m_normal <= m_lmk * 1.05, "normal-only <= landmark-only (5% ties)");
    return checks_failed == 0;
}

// ---------------------------------------------------------------- criterion 4

bool criterion4_metrics() {
    checks_failed = 0;

    // 500-triangle mesh: bumpy sphere (320) + 9x10 grid plane (180)
    TriMesh bumpy = icosphere(2);
    for (int v = 0; v < bumpy.vertex_count(); ++v) {
        const Eigen::Vector3d d = bumpy.vertices.row(v);
        bumpy.vertices.row(v) = (100.0 * (1.0 + 0.15 * std::sin(3.0 * d.x() + 2.0 * d.y()))) * d;
    }
    TriMesh mesh;
    const int grid_side = 10, grid_rows = 9;
    mesh.vertices.resize(bumpy.vertex_count() + (grid_side + 1) * (grid_rows + 1), 3);
    mesh.vertices.topRows(bumpy.vertex_count()) = bumpy.vertices;
    for (int j = 0; j <= grid_rows; ++j)
        for (int i = 0; i <= grid_side; ++i)
            mesh.vertices.row(bumpy.vertex_count() + j * (grid_side + 1) + i)
                << -200.0 + 40.0 * i, -200.0 + 40.0 * j, -180.0;
    mesh.triangles.resize(bumpy.triangle_count() + grid_side * grid_rows * 2, 3);
    mesh.triangles.topRows(bumpy.triangle_count()) = bumpy.triangles;
    int t = bumpy.triangle_count();
    for (int j = 0; j < grid_rows; ++j)
        for (int i = 0; i < grid_side; ++i) {
            const int a = bumpy.vertex_count() + j * (grid_side + 1) + i;
            const int b = a + 1, c = a + grid_side + 1, d = c + 1;
            mesh.triangles.row(t++) << a, b, d;
            mesh.triangles.row(t++) << a, d, c;
        }
    expect(mesh.triangle_count() == 500, "mesh has exactly 500 triangles");

    const TriangleBvh bvh(mesh.vertices, mesh.triangles);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-260.0, 260.0);
    double worst = 0;
    bool ids_match = true;
    for (int q = 0; q < 10000; ++q) {
        const Eigen::Vector3d query(uni(rng), uni(rng), uni(rng));
        const SurfaceHit fast = bvh.nearest(query);
        double best_d2 = std::numeric_limits<double>::infinity();
        int best_tri = -1;
        for (int tri = 0; tri < mesh.triangle_count(); ++tri) {
            Eigen::Vector3d closest;
            const double d2 = point_triangle_distance2(
                query, mesh.vertices.row(mesh.triangles(tri, 0)),
                mesh.vertices.row(mesh.triangles(tri, 1)), mesh.vertices.row(mesh.triangles(tri, 2)),
                closest);
            if (d2 < best_d2) {
                best_d2 = d2;
                best_tri = tri;
            }
        }
        worst = std::max(worst, std::abs(fast.distance - std::sqrt(best_d2)));
        if (fast.triangle != best_tri) ids_match = false;
    }
    std::printf("    bvh vs brute force: worst |delta| = %.3g\n", worst);
    expect(worst < 1e-9, "BVH distances equal brute force to 1e-9 on 10k queries");
    expect(ids_match, "BVH winner ids equal brute force (tie rule)");

    // hand-constructed metrics record
    {
        TriMesh plane;
        const int cells = 9, side = 10;
        plane.vertices.resize(side * side, 3);
        for (int j = 0; j < side; ++j)
            for (int i = 0; i < side; ++i)
                plane.vertices.row(j * side + i) << 10.0 * i, 10.0 * j, 0.0;
        plane.triangles.resize(cells * cells * 2, 3);
        int k = 0;
        for (int j = 0; j < cells; ++j)
            for (int i = 0; i < cells; ++i) {
                const int a = j * side + i, b = a + 1, c = a + side, d = c + 1;
                plane.triangles.row(k++) << a, b, d;
                plane.triangles.row(k++) << a, d, c;
            }
        PointCloud gt;
        gt.points.resize(100, 3);
        gt.normals.resize(100, 3);
        const double offsets[4] = {1.0, -1.0, 4.0, -4.0};
        for (int i = 0; i < 100; ++i) {
            gt.points.row(i) =
                plane.vertices.row(i) + offsets[i % 4] * Eigen::RowVector3d(0, 0, 1);
            gt.normals.row(i) << 0, 0, 1;
        }
        const MetricsRecord rec = compute_metrics(plane, gt);
        expect(std::abs(rec.l1_mm - 2.5) < 1e-12, "hand example: L1 = 2.5");
        expect(std::abs(rec.l2_mm - std::sqrt(8.5)) < 1e-12, "hand example: L2 = sqrt(8.5)");
        expect(std::abs(rec.recall_2_5 - 0.5) < 1e-12, "hand example: R2.5 = 0.5");
    }

    // rigid invariance
    {
        PointCloud gt;
        gt.points.resize(400, 3);
        gt.normals.resize(400, 3);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int i = 0; i < 400; ++i) {
            Eigen::Vector3d dir(gauss(rng), gauss(rng), gauss(rng));
            dir.normalize();
            gt.points.row(i) = ((105.0 + 4.0 * gauss(rng)) * dir).transpose();
            gt.normals.row(i) = dir.transpose();
        }
        const MetricsRecord base = compute_metrics(bumpy, gt);
        RigidTransform rigid;
        rigid.rotation = axis_angle_to_matrix(Eigen::Vector3d(0.5, -0.3, 0.8));
        rigid.translation = Eigen::Vector3d(40, -70, 25);
        TriMesh moved = bumpy;
        moved.vertices = rigid.apply(bumpy.vertices);
        PointCloud moved_gt;
        moved_gt.points = rigid.apply(gt.points);
        moved_gt.normals = gt.normals * rigid.rotation.transpose();
        const MetricsRecord rec = compute_metrics(moved, moved_gt);
        expect(std::abs(rec.l1_mm - base.l1_mm) < 1e-9, "rigid invariance: L1");
        expect(std::abs(rec.l2_mm - base.l2_mm) < 1e-9, "rigid invariance: L2");
        expect(std::abs(rec.nc - base.nc) < 1e-9, "rigid invariance: NC");
        expect(rec.recall_2_5 == base.recall_2_5, "rigid invariance: recall");
    }
    return checks_failed == 0;
}

// ---------------------------------------------------------------- criterion 5

bool criterion5_icp() {
    checks_failed = 0;
    TriMesh mesh = icosphere(3);
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        const Eigen::Vector3d d = mesh.vertices.row(v);
        mesh.vertices.row(v) =
            (100.0 * (1.0 + 0.1 * std::sin(2.5 * d.x()) * std::cos(2.0 * d.z()))) * d;
    }
    const Eigen::MatrixX3d normals = vertex_normals(mesh.vertices, mesh.triangles);
    const std::vector<int> landmark_ids = {0, 50, 120, 260, 400, 530, 610};

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> angle(0.05, 30.0 * M_PI / 180.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (int trial = 0; trial < 10; ++trial) {
        RigidTransform truth;
        Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
        axis.normalize();
        truth.rotation = axis_angle_to_matrix(angle(rng) * axis);
        truth.translation = Eigen::Vector3d(30 * gauss(rng), 30 * gauss(rng), 30 * gauss(rng));

        PointCloud gt;
        gt.points = truth.apply(mesh.vertices);
        gt.normals = normals * truth.rotation.transpose();

        // exact landmarks
        std::vector<LandmarkPair> exact;
        for (const int v : landmark_ids)
            exact.push_back({v, truth.apply(Eigen::Vector3d(mesh.vertices.row(v)))});
        const RigidTransform got = rigid_align(mesh, gt, exact);
        const double rot_err = Eigen::AngleAxisd(got.rotation.transpose() * truth.rotation).angle();
        const double tr_err = (got.translation - truth.translation).norm();
        expect(std::abs(rot_err) < 1e-6, "exact landmarks: rotation < 1e-6 rad");
        expect(tr_err < 1e-6, "exact landmarks: translation < 1e-6");

        // 0.5 mm landmark noise, ICP must pull the alignment back
        std::vector<LandmarkPair> noisy = exact;
        for (auto& lm : noisy)
            lm.point += 0.5 * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)).normalized();
        const RigidTransform refined = rigid_align(mesh, gt, noisy);
        const double rot_err2 =
            Eigen::AngleAxisd(refined.rotation.transpose() * truth.rotation).angle();
        expect(std::abs(rot_err2) < 1e-3, "noisy landmarks: rotation < 1e-3 rad after ICP");
    }
    return checks_failed == 0;
}

// ---------------------------------------------------------------- criterion 6

bool criterion6_roundtrip() {
    checks_failed = 0;
    const MorphableModel model = sphere_head_model(4);
    const auto suite = recovery_suite(model);

    for (const auto& inst : suite) {
        const UvIndex index = build_uv_index(inst.inputs.uv_map, inst.inputs.mask);
        const CorrespondenceSet corr = find_correspondences(model, index, FitConfig{}.delta_uv);
        const ProjectionResult proj = project(inst.truth_verts, inst.truth_cam);

        double worst = 0;
        int contributing = 0;
        for (int v = 0; v < model.vertex_count(); ++v) {
            if (!(corr.accepted[v] && inst.visible[v])) continue;
            ++contributing;
            worst = std::max(worst,
                             (corr.target_pixels.row(v) - proj.pixels.row(v)).norm());
        }
        expect(contributing > 100, "enough contributing vertices");
        expect(worst <= 1.5, "accepted+visible correspondences within 1.5 px");
    }

    // index == exhaustive argmin on 1000 queries of the first render
    {
        const auto& inputs = suite[0].inputs;
        const UvIndex index = build_uv_index(inputs.uv_map, inputs.mask);
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        bool all_equal = true;
        for (int q = 0; q < 1000; ++q) {
            const Eigen::Vector2d query(uni(rng), uni(rng));
            const auto fast = index.nearest(query);

            double best = std::numeric_limits<double>::infinity();
            int best_rm = -1;
            for (int y = 0; y < inputs.uv_map.height; ++y)
                for (int x = 0; x < inputs.uv_map.width; ++x) {
                    if (!(inputs.uv_map.is_valid(y, x) && inputs.mask.is_valid(y, x))) continue;
                    const double du = query.x() - inputs.uv_map.at(y, x, 0);
                    const double dv = query.y() - inputs.uv_map.at(y, x, 1);
                    const double d2 = du * du + dv * dv;
                    if (d2 < best) {
                        best = d2;
                        best_rm = y * inputs.uv_map.width + x;
                    }
                }
            if (fast.row_major != best_rm) all_equal = false;
        }
        expect(all_equal, "uv index equals exhaustive argmin on 1000 queries");
    }
    return checks_failed == 0;
}

// ---------------------------------------------------------------- criterion 7

bool criterion7_tracking() {
    checks_failed = 0;
    const MorphableModel model = sphere_head_model(4);
    const int wh = 256, frame_count = 8;

    std::mt19937_64 rng(31);
    FaceParams identity_truth = sample_face_params(model, rng);
    const CameraParams base_cam = sample_camera(model, wh, wh, rng);

    std::vector<FitInputs> frames;
    std::vector<FaceParams> truths;
    std::vector<Eigen::MatrixX3d> truth_verts;
    for (int t = 0; t < frame_count; ++t) {
        FaceParams face = identity_truth;
        for (int k = 0; k < model.ex_dim(); ++k)
            face.expression_coeffs[k] = 0.6 * std::sin(0.45 * t + 0.8 * k);
        face.jaw_rotation = Eigen::Vector3d(0.1 + 0.05 * std::sin(0.5 * t), 0, 0);
        CameraParams cam = base_cam;
        cam.rotation += Eigen::Vector3d(0.01 * t, -0.008 * t, 0.004 * t);
        FitInputs inputs = render_fit_inputs(model, face, cam, wh, wh);
        inputs.mica_identity = identity_truth.identity_coeffs;
        frames.push_back(std::move(inputs));
        truths.push_back(face);
        truth_verts.push_back(model_forward(model, face));
    }

    TrackConfig config;
    const TrackResult result = track_sequence(model, frames, config);

    // shared identity bit-identical across frames
    bool shared_ok = true;
    for (int t = 1; t < frame_count; ++t) {
        if (result.frames[t].face.identity_coeffs != result.frames[0].face.identity_coeffs)
            shared_ok = false;
        if (result.frames[t].cam.focal_length != result.frames[0].cam.focal_length) shared_ok = false;
        if (result.frames[t].cam.principal_point != result.frames[0].cam.principal_point)
            shared_ok = false;
    }
    expect(shared_ok, "shared z_id / fl / pp bit-identical across frames");

    // per-frame visible-vertex RMSE
    const double diag = bounding_box_diagonal(truth_verts[0]);
    for (int t = 0; t < frame_count; ++t) {
        const FragmentBuffer frag =
            rasterize(truth_verts[t], model.triangles, base_cam, wh, wh);
        const auto visible = visible_vertices(truth_verts[t], model.triangles, base_cam, frag);
        const Eigen::MatrixX3d recovered = model_forward(model, result.frames[t].face);
        double sum2 = 0;
        int count = 0;
        for (int v = 0; v < model.vertex_count(); ++v) {
            if (!visible[v]) continue;
            sum2 += (recovered.row(v) - truth_verts[t].row(v)).squaredNorm();
            ++count;
        }
        const double rmse = std::sqrt(sum2 / std::max(1, count));
        std::printf("    frame %d rmse %.4f mm (budget %.4f)\n", t, 1000 * rmse,
                    1000 * 0.02 * diag);
        expect(rmse < 0.02 * diag, "per-frame visible-vertex RMSE < 2% bbox diagonal");
    }

    // second difference of recovered expression <= 2x ground truth
    auto second_diff = [&](auto&& get) {
        double sum = 0;
        for (int t = 1; t + 1 < frame_count; ++t)
            sum += (get(t - 1) - 2.0 * get(t) + get(t + 1)).norm();
        return sum / (frame_count - 2);
    };
    const double sd_truth =
        second_diff([&](int t) { return Eigen::VectorXd(truths[t].expression_coeffs); });
    const double sd_rec = second_diff(
        [&](int t) { return Eigen::VectorXd(result.frames[t].face.expression_coeffs); });
    std::printf("    expression second difference: recovered %.5f vs truth %.5f\n", sd_rec, sd_truth);
    expect(sd_rec <= 2.0 * sd_truth, "recovered z_ex second difference <= 2x truth");

    // identical-frame sequence: per-frame parameter spread < 1e-6 after stage C
    {
        std::vector<FitInputs> same(frame_count, frames[0]);
        const TrackResult res = track_sequence(model, same, config);
        double spread = 0;
        for (int t = 1; t < frame_count; ++t) {
            spread = std::max(spread, (res.frames[t].face.expression_coeffs -
                                       res.frames[0].face.expression_coeffs)
                                          .cwiseAbs()
                                          .maxCoeff());
            spread = std::max(spread, (res.frames[t].face.jaw_rotation -
                                       res.frames[0].face.jaw_rotation)
                                          .cwiseAbs()
                                          .maxCoeff());
            spread = std::max(
                spread,
                (res.frames[t].cam.rotation - res.frames[0].cam.rotation).cwiseAbs().maxCoeff());
            spread = std::max(spread, (res.frames[t].cam.translation -
                                       res.frames[0].cam.translation)
                                          .cwiseAbs()
                                          .maxCoeff());
        }
        std::printf("    identical-frame parameter spread: %.3g\n", spread);
        expect(spread < 1e-6, "identical-frame sequence spread < 1e-6");
    }
    return checks_failed == 0;
}

// ---------------------------------------------------------------- criterion 8

std::uint64_t fnv1a(const std::vector<char>& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const char c : bytes) {
        h ^= std::uint8_t(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool criterion8_codecs() {
    checks_failed = 0;
    const fs::path testdata = FACEFIT_TESTDATA_DIR;
    const fs::path tmp = fs::temp_directory_path() / "facefit_acceptance";
    fs::create_directories(tmp);

    struct Golden {
        const char* name;
        std::uint64_t checksum;
    };
    // frozen checksums of the committed fixtures
    const Golden goldens[] = {
        {"golden_color.pfm", 0x50a89e2db4246e3fULL},
        {"golden_gray.pfm", 0xb56f2c819a6f3d77ULL},
        {"golden_mask.pgm", 0x6f0af54353059a92ULL},
        {"golden_tiny.p3dm", 0x74876961e4c10204ULL},
    };

    for (const auto& g : goldens) {
        const fs::path src = testdata / g.name;
        const auto original = read_bytes(src);
        expect(!original.empty(), "fixture exists");
        expect(fnv1a(original) == g.checksum, "fixture checksum matches the frozen value");

        const fs::path out = tmp / g.name;
        const std::string name(g.name);
        if (name.find(".pfm") != std::string::npos) {
            io::save_map(out.string(), io::load_map(src.string()));
        } else if (name.find(".pgm") != std::string::npos) {
            io::save_mask(out.string(), io::load_mask(src.string()));
        } else {
            save_model(out.string(), load_model(src.string()));
        }
        expect(read_bytes(out) == original, "round-trip is byte-identical");
    }
    return checks_failed == 0;
}

} // namespace

int main(int argc, char** argv) {
    int selected = 0;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) selected = std::atoi(argv[i + 1]);

    struct Criterion {
        int id;
        const char* description;
        std::function<bool()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient correctness (losses, jacobians, full energy)", criterion1_gradients},
        {2, "synthetic single-image recovery (20 instances)", criterion2_recovery},
        {3, "ablation ordering: full <= uv <= normal <= landmark", criterion3_ablation},
        {4, "metric oracles: BVH == brute force, hand-built record, rigid invariance",
         criterion4_metrics},
        {5, "ICP recovery with exact and noisy landmarks", criterion5_icp},
        {6, "round-trip correspondences and exact uv index", criterion6_roundtrip},
        {7, "video tracking: shared identity, RMSE, identical-frame convergence",
         criterion7_tracking},
        {8, "codec bit-exactness on golden fixtures", criterion8_codecs},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (selected != 0 && c.id != selected) continue;
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = c.run();
        } catch (const std::exception& e) {
            std::printf("    exception: %s\n", e.what());
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", c.id, c.description,
                    seconds);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
