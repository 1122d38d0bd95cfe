#include <doctest.h>

#include <fstream>
#include <random>

#include "facefit/common.hpp"
#include "facefit/model.hpp"
#include "facefit/rotation.hpp"
#include "facefit/synthetic.hpp"
#include "test_helpers.hpp"

using namespace facefit;

namespace {

MorphableModel minimal_model() {
    MorphableModel m;
    m.template_vertices.resize(3, 3);
    m.template_vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    m.triangles.resize(1, 3);
    m.triangles << 0, 1, 2;
    m.id_basis = Eigen::MatrixXd::Zero(9, 1);
    m.id_basis(2, 0) = 0.5; // vertex 0 moves in z
    m.ex_basis = Eigen::MatrixXd::Zero(9, 1);
    m.ex_basis(3, 0) = 0.25; // vertex 1 moves in x
    m.jaw_joint = Eigen::Vector3d(0, 0, 0);
    m.jaw_weights = Eigen::VectorXd::Zero(3);
    m.vertex_uv.resize(3, 2);
    m.vertex_uv << 0, 0, 1, 0, 0, 1;
    m.landmark_vertex_ids = {0, 2};
    return m;
}

} // namespace

TEST_CASE("minimal model round-trips bit-exactly") {
    const MorphableModel m = minimal_model();
    const auto path = test_helpers::temp_file("minimal.p3dm");
    save_model(path.string(), m);
    const MorphableModel loaded = load_model(path.string());

    CHECK(loaded.template_vertices == m.template_vertices);
    CHECK(loaded.triangles == m.triangles);
    CHECK(loaded.id_basis == m.id_basis);
    CHECK(loaded.ex_basis == m.ex_basis);
    CHECK(loaded.jaw_joint == m.jaw_joint);
    CHECK(loaded.jaw_weights == m.jaw_weights);
    CHECK(loaded.vertex_uv == m.vertex_uv);
    CHECK(loaded.landmark_vertex_ids == m.landmark_vertex_ids);
}

TEST_CASE("triangle index out of bounds is a DimensionMismatch") {
    MorphableModel m = minimal_model();
    m.triangles(0, 2) = 3; // == N
    const auto path = test_helpers::temp_file("bad_index.p3dm");
    CHECK_THROWS_AS(save_model(path.string(), m), Error); // validate on save too
    try {
        save_model(path.string(), m);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DimensionMismatch);
        CHECK(std::string(e.what()).find("triangles") != std::string::npos);
    }
}

TEST_CASE("bad magic is a MalformedHeader") {
    const auto path = test_helpers::temp_file("bad_magic.p3dm");
    std::ofstream(path) << "NOPE!\n garbage";
    try {
        (void)load_model(path.string());
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MalformedHeader);
    }
}

TEST_CASE("truncated model reports the byte offset") {
    const MorphableModel m = minimal_model();
    const auto path = test_helpers::temp_file("trunc.p3dm");
    save_model(path.string(), m);
    auto bytes = test_helpers::read_all_bytes(path);
    bytes.resize(bytes.size() / 2);
    std::ofstream(path, std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
    try {
        (void)load_model(path.string());
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::IoFailure);
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
}

TEST_CASE("sphere head asset reloads exactly") {
    const MorphableModel m = sphere_head_model();
    CHECK(m.vertex_count() == 900); // 642-vertex icosphere geometry, seam vertices split per uv island
    CHECK(m.id_dim() == 8);
    CHECK(m.ex_dim() == 4);
    const auto path = test_helpers::temp_file("sphere_head.p3dm");
    save_model(path.string(), m);
    const MorphableModel loaded = load_model(path.string());
    // generator is the oracle: float32-representable arrays reload bit-exactly
    CHECK(loaded.template_vertices == m.template_vertices);
    CHECK(loaded.id_basis == m.id_basis);
    CHECK(loaded.ex_basis == m.ex_basis);
    CHECK(loaded.jaw_weights == m.jaw_weights);
    CHECK(loaded.vertex_uv == m.vertex_uv);
}

TEST_CASE("forward with zero params is the template exactly") {
    const MorphableModel m = sphere_head_model();
    const Eigen::MatrixX3d out = model_forward(m, FaceParams::zero(m));
    CHECK((out - m.template_vertices).norm() == 0.0);
}

TEST_CASE("forward is linear in blendshape coefficients") {
    const MorphableModel m = minimal_model();
    FaceParams p = FaceParams::zero(m);
    p.identity_coeffs[0] = 2.0;
    const Eigen::MatrixX3d out = model_forward(m, p);
    Eigen::MatrixX3d expected = m.template_vertices;
    expected(0, 2) += 2.0 * 0.5;
    CHECK((out - expected).norm() == 0.0);
}

TEST_CASE("forward is affine in coefficients at fixed jaw") {
    const MorphableModel m = sphere_head_model();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        FaceParams a = FaceParams::zero(m), b = FaceParams::zero(m), sum = FaceParams::zero(m);
        const Eigen::Vector3d jaw(0.2 * coeff(rng), 0.1 * coeff(rng), 0.1 * coeff(rng));
        a.jaw_rotation = b.jaw_rotation = sum.jaw_rotation = jaw;
        for (int k = 0; k < m.id_dim(); ++k) {
            a.identity_coeffs[k] = coeff(rng);
            b.identity_coeffs[k] = coeff(rng);
            sum.identity_coeffs[k] = a.identity_coeffs[k] + b.identity_coeffs[k];
        }
        for (int k = 0; k < m.ex_dim(); ++k) {
            a.expression_coeffs[k] = coeff(rng);
            b.expression_coeffs[k] = coeff(rng);
            sum.expression_coeffs[k] = a.expression_coeffs[k] + b.expression_coeffs[k];
        }
        FaceParams zero = FaceParams::zero(m);
        zero.jaw_rotation = jaw;
        const Eigen::MatrixX3d f0 = model_forward(m, zero);
        const Eigen::MatrixX3d fa = model_forward(m, a);
        const Eigen::MatrixX3d fb = model_forward(m, b);
        const Eigen::MatrixX3d fs = model_forward(m, sum);
        CHECK(((fs - f0) - ((fa - f0) + (fb - f0))).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("fully skinned vertex follows the Rodrigues rotation exactly") {
    MorphableModel m = minimal_model();
    m.jaw_weights << 1.0, 0.0, 0.5;
    m.jaw_joint = Eigen::Vector3d(0.1, -0.2, 0.3);

    FaceParams p = FaceParams::zero(m);
    p.jaw_rotation = Eigen::Vector3d(0.3, 0, 0);
    const Eigen::MatrixX3d out = model_forward(m, p);

    // independent Rodrigues-formula oracle
    const double theta = 0.3;
    Eigen::Matrix3d rot;
    const Eigen::Vector3d axis(1, 0, 0);
    const Eigen::Matrix3d k = skew(axis);
    rot = Eigen::Matrix3d::Identity() + std::sin(theta) * k + (1 - std::cos(theta)) * k * k;

    const Eigen::Vector3d p0 = m.template_vertices.row(0);
    const Eigen::Vector3d expected = rot * (p0 - m.jaw_joint) + m.jaw_joint;
    CHECK((Eigen::Vector3d(out.row(0)) - expected).norm() < 1e-14);

    // weight-0 vertex untouched
    CHECK((out.row(1) - m.template_vertices.row(1)).norm() == 0.0);
}

TEST_CASE("jacobian blendshape columns equal the basis at zero jaw") {
    const MorphableModel m = sphere_head_model();
    const Eigen::MatrixXd jac = model_forward_jacobian(m, FaceParams::zero(m));
    CHECK((jac.leftCols(m.id_dim()) - m.id_basis).norm() == 0.0);
    CHECK((jac.middleCols(m.id_dim(), m.ex_dim()) - m.ex_basis).norm() == 0.0);
}

TEST_CASE("unskinned vertices have zero jaw derivative") {
    const MorphableModel m = sphere_head_model();
    FaceParams p = FaceParams::zero(m);
    p.jaw_rotation = Eigen::Vector3d(0.2, 0.05, -0.1);
    const Eigen::MatrixXd jac = model_forward_jacobian(m, p);
    const int jaw_col = m.id_dim() + m.ex_dim();
    for (int v = 0; v < m.vertex_count(); ++v)
        if (m.jaw_weights[v] == 0.0)
            CHECK(jac.block<3, 3>(3 * v, jaw_col).norm() == 0.0);
}

TEST_CASE("forward jacobian matches central finite differences") {
    const MorphableModel m = sphere_head_model();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);

    const double h = 1e-5;
    for (int trial = 0; trial < 5; ++trial) {
        FaceParams p = FaceParams::zero(m);
        for (int k = 0; k < m.id_dim(); ++k) p.identity_coeffs[k] = coeff(rng);
        for (int k = 0; k < m.ex_dim(); ++k) p.expression_coeffs[k] = coeff(rng);
        p.jaw_rotation = Eigen::Vector3d(0.2 * coeff(rng), 0.1 * coeff(rng), 0.1 * coeff(rng));

        const Eigen::MatrixXd jac = model_forward_jacobian(m, p);
        const int dof = p.dof();
        double max_rel = 0.0;
        for (int d = 0; d < dof; ++d) {
            FaceParams lo = p, hi = p;
            auto bump = [&](FaceParams& q, double delta) {
                if (d < m.id_dim())
                    q.identity_coeffs[d] += delta;
                else if (d < m.id_dim() + m.ex_dim())
                    q.expression_coeffs[d - m.id_dim()] += delta;
                else
                    q.jaw_rotation[d - m.id_dim() - m.ex_dim()] += delta;
            };
            bump(lo, -h);
            bump(hi, h);
            const Eigen::MatrixX3d flo = model_forward(m, lo);
            const Eigen::MatrixX3d fhi = model_forward(m, hi);
            for (int v = 0; v < m.vertex_count(); ++v)
                for (int c = 0; c < 3; ++c) {
                    const double fd = (fhi(v, c) - flo(v, c)) / (2.0 * h);
                    const double an = jac(3 * v + c, d);
                    if (std::abs(fd) > 1e-8 || std::abs(an) > 1e-8)
                        max_rel = std::max(max_rel, std::abs(an - fd) / std::max(std::abs(fd), 1e-6));
                }
        }
        CHECK(max_rel < 1e-4);
    }
}
