#include "facefit/model.hpp"

#include <cmath>
#include <cstring>

#include "facefit/common.hpp"
#include "facefit/rotation.hpp"
#include "binary_util.hpp"

namespace facefit {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* field) {
    if (!m.allFinite()) fail(ErrorKind::NonFiniteData, std::string("field '") + field + "' contains non-finite values");
}

} // namespace

void MorphableModel::validate() const {
    const int n = vertex_count();
    if (n <= 0) fail(ErrorKind::DimensionMismatch, "template_vertices is empty");
    require_finite(template_vertices, "template_vertices");

    for (int t = 0; t < triangles.rows(); ++t)
        for (int j = 0; j < 3; ++j)
            if (triangles(t, j) < 0 || triangles(t, j) >= n)
                fail(ErrorKind::DimensionMismatch,
                     "field 'triangles': index " + std::to_string(triangles(t, j)) +
                         " at triangle " + std::to_string(t) + " out of range [0," +
                         std::to_string(n) + ")");

    for (int t = 0; t < triangles.rows(); ++t) {
        const Eigen::Vector3d a = template_vertices.row(triangles(t, 0));
        const Eigen::Vector3d b = template_vertices.row(triangles(t, 1));
        const Eigen::Vector3d c = template_vertices.row(triangles(t, 2));
        if ((b - a).cross(c - a).norm() <= 0.0)
            fail(ErrorKind::DegenerateGeometry, "field 'triangles': triangle " + std::to_string(t) + " has zero area");
    }

    if (id_basis.rows() != 3 * n)
        fail(ErrorKind::DimensionMismatch, "field 'id_basis': expected " + std::to_string(3 * n) +
                                               " rows, got " + std::to_string(id_basis.rows()));
    if (ex_basis.rows() != 3 * n)
        fail(ErrorKind::DimensionMismatch, "field 'ex_basis': expected " + std::to_string(3 * n) +
                                               " rows, got " + std::to_string(ex_basis.rows()));
    require_finite(id_basis, "id_basis");
    require_finite(ex_basis, "ex_basis");
    require_finite(jaw_joint.transpose(), "jaw_joint");

    if (jaw_weights.size() != n)
        fail(ErrorKind::DimensionMismatch, "field 'jaw_weights': expected " + std::to_string(n) +
                                               " entries, got " + std::to_string(jaw_weights.size()));
    require_finite(jaw_weights, "jaw_weights");
    if ((jaw_weights.array() < 0.0).any() || (jaw_weights.array() > 1.0).any())
        fail(ErrorKind::NonFiniteData, "field 'jaw_weights': values outside [0,1]");

    if (vertex_uv.rows() != n)
        fail(ErrorKind::DimensionMismatch, "field 'vertex_uv': expected " + std::to_string(n) +
                                               " rows, got " + std::to_string(vertex_uv.rows()));
    require_finite(vertex_uv, "vertex_uv");
    if ((vertex_uv.array() < 0.0).any() || (vertex_uv.array() > 1.0).any())
        fail(ErrorKind::NonFiniteData, "field 'vertex_uv': values outside [0,1]^2");

    for (int id : landmark_vertex_ids)
        if (id < 0 || id >= n)
            fail(ErrorKind::DimensionMismatch,
                 "field 'landmark_vertex_ids': index " + std::to_string(id) + " out of range");
}

FaceParams FaceParams::zero(const MorphableModel& model) {
    FaceParams p;
    p.identity_coeffs = Eigen::VectorXd::Zero(model.id_dim());
    p.expression_coeffs = Eigen::VectorXd::Zero(model.ex_dim());
    p.jaw_rotation.setZero();
    return p;
}

namespace {

void check_param_dims(const MorphableModel& model, const FaceParams& params) {
    if (params.identity_coeffs.size() != model.id_dim())
        fail(ErrorKind::DimensionMismatch,
             "identity_coeffs has " + std::to_string(params.identity_coeffs.size()) +
                 " entries, model expects " + std::to_string(model.id_dim()));
    if (params.expression_coeffs.size() != model.ex_dim())
        fail(ErrorKind::DimensionMismatch,
             "expression_coeffs has " + std::to_string(params.expression_coeffs.size()) +
                 " entries, model expects " + std::to_string(model.ex_dim()));
}

Eigen::MatrixX3d shaped_vertices(const MorphableModel& model, const FaceParams& params) {
    Eigen::VectorXd offset = model.id_basis * params.identity_coeffs +
                             model.ex_basis * params.expression_coeffs;
    Eigen::MatrixX3d shaped = model.template_vertices;
    const int n = model.vertex_count();
    for (int v = 0; v < n; ++v)
        shaped.row(v) += Eigen::RowVector3d(offset[3 * v + 0], offset[3 * v + 1], offset[3 * v + 2]);
    return shaped;
}

} // namespace

Eigen::MatrixX3d model_forward(const MorphableModel& model, const FaceParams& params) {
    check_param_dims(model, params);
    Eigen::MatrixX3d shaped = shaped_vertices(model, params);

    if (params.jaw_rotation.isZero(0.0)) return shaped;

    const Eigen::Matrix3d rot = axis_angle_to_matrix(params.jaw_rotation);
    const int n = model.vertex_count();
    Eigen::MatrixX3d out(n, 3);
    for (int v = 0; v < n; ++v) {
        const double w = model.jaw_weights[v];
        const Eigen::Vector3d p = shaped.row(v);
        if (w == 0.0) {
            out.row(v) = p;
            continue;
        }
        const Eigen::Vector3d rotated = rot * (p - model.jaw_joint) + model.jaw_joint;
        out.row(v) = (1.0 - w) * p + w * rotated;
    }
    return out;
}

Eigen::MatrixXd model_forward_jacobian(const MorphableModel& model, const FaceParams& params) {
    check_param_dims(model, params);
    const int n = model.vertex_count();
    const int kid = model.id_dim();
    const int kex = model.ex_dim();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * n, kid + kex + 3);

    const Eigen::Matrix3d rot = axis_angle_to_matrix(params.jaw_rotation);
    const Eigen::Matrix3d rot_minus_identity = rot - Eigen::Matrix3d::Identity();
    const Eigen::MatrixX3d shaped = shaped_vertices(model, params);

    // Blendshape columns: d V_v / d z_k = b + w_v (R - I) b, with b the basis
    // displacement of vertex v in column k.
    for (int k = 0; k < kid + kex; ++k) {
        const auto& basis = k < kid ? model.id_basis : model.ex_basis;
        const int col = k < kid ? k : k - kid;
        for (int v = 0; v < n; ++v) {
            const Eigen::Vector3d b = basis.template block<3, 1>(3 * v, col);
            Eigen::Vector3d d = b;
            const double w = model.jaw_weights[v];
            if (w != 0.0) d += w * (rot_minus_identity * b);
            jac.block<3, 1>(3 * v, k) = d;
        }
    }

    // Jaw columns: d V_v / d theta = w_v * d(R (s_v - joint)) / d theta.
    for (int v = 0; v < n; ++v) {
        const double w = model.jaw_weights[v];
        if (w == 0.0) continue;
        const Eigen::Vector3d local = Eigen::Vector3d(shaped.row(v)) - model.jaw_joint;
        jac.block<3, 3>(3 * v, kid + kex) = w * rotate_point_jacobian(params.jaw_rotation, local);
    }
    return jac;
}

MorphableModel load_model(const std::string& path) {
    detail::FileReader in(path);

    char magic[6] = {};
    in.read_bytes(magic, 6);
    if (std::memcmp(magic, "P3DM1\n", 6) != 0)
        fail(ErrorKind::MalformedHeader, "'" + path + "': expected magic \"P3DM1\\n\"");

    const std::uint32_t n = in.read_u32();
    const std::uint32_t f = in.read_u32();
    const std::uint32_t kid = in.read_u32();
    const std::uint32_t kex = in.read_u32();
    if (n == 0) fail(ErrorKind::MalformedHeader, "'" + path + "': vertex count is zero");

    MorphableModel model;
    std::vector<float> buf;

    auto read_floats = [&](std::size_t count) {
        buf.resize(count);
        in.read_f32_array(buf.data(), count);
    };

    read_floats(std::size_t(n) * 3);
    model.template_vertices.resize(n, 3);
    for (std::uint32_t v = 0; v < n; ++v)
        model.template_vertices.row(v) << buf[3 * v + 0], buf[3 * v + 1], buf[3 * v + 2];

    std::vector<std::uint32_t> tris(std::size_t(f) * 3);
    in.read_u32_array(tris.data(), tris.size());
    model.triangles.resize(f, 3);
    for (std::uint32_t t = 0; t < f; ++t)
        model.triangles.row(t) << static_cast<int>(tris[3 * t + 0]), static_cast<int>(tris[3 * t + 1]),
            static_cast<int>(tris[3 * t + 2]);

    // Bases are stored row-major N x 3 x K; in memory column k is the
    // flattened displacement field.
    auto read_basis = [&](std::uint32_t k) {
        Eigen::MatrixXd basis(3 * std::size_t(n), k);
        read_floats(std::size_t(n) * 3 * k);
        for (std::uint32_t v = 0; v < n; ++v)
            for (int c = 0; c < 3; ++c)
                for (std::uint32_t j = 0; j < k; ++j)
                    basis(3 * v + c, j) = buf[(std::size_t(v) * 3 + c) * k + j];
        return basis;
    };
    model.id_basis = read_basis(kid);
    model.ex_basis = read_basis(kex);

    read_floats(3);
    model.jaw_joint << buf[0], buf[1], buf[2];

    read_floats(n);
    model.jaw_weights.resize(n);
    for (std::uint32_t v = 0; v < n; ++v) model.jaw_weights[v] = buf[v];

    read_floats(std::size_t(n) * 2);
    model.vertex_uv.resize(n, 2);
    for (std::uint32_t v = 0; v < n; ++v)
        model.vertex_uv.row(v) << buf[2 * v + 0], buf[2 * v + 1];

    const std::uint32_t lmk_count = in.read_u32();
    std::vector<std::uint32_t> lmk(lmk_count);
    if (lmk_count > 0) in.read_u32_array(lmk.data(), lmk_count);
    model.landmark_vertex_ids.assign(lmk.begin(), lmk.end());

    model.validate();
    return model;
}

void save_model(const std::string& path, const MorphableModel& model) {
    model.validate();
    detail::FileWriter out(path);
    out.write_bytes("P3DM1\n", 6);

    const std::uint32_t n = model.vertex_count();
    const std::uint32_t f = model.triangle_count();
    const std::uint32_t kid = model.id_dim();
    const std::uint32_t kex = model.ex_dim();
    out.write_u32(n);
    out.write_u32(f);
    out.write_u32(kid);
    out.write_u32(kex);

    std::vector<float> buf;
    buf.reserve(std::size_t(n) * 3 * std::max<std::uint32_t>(std::max(kid, kex), 1));

    buf.clear();
    for (std::uint32_t v = 0; v < n; ++v)
        for (int c = 0; c < 3; ++c) buf.push_back(static_cast<float>(model.template_vertices(v, c)));
    out.write_f32_array(buf.data(), buf.size());

    std::vector<std::uint32_t> tris;
    tris.reserve(std::size_t(f) * 3);
    for (std::uint32_t t = 0; t < f; ++t)
        for (int j = 0; j < 3; ++j) tris.push_back(static_cast<std::uint32_t>(model.triangles(t, j)));
    out.write_u32_array(tris.data(), tris.size());

    auto write_basis = [&](const Eigen::MatrixXd& basis) {
        buf.clear();
        const std::uint32_t k = static_cast<std::uint32_t>(basis.cols());
        for (std::uint32_t v = 0; v < n; ++v)
            for (int c = 0; c < 3; ++c)
                for (std::uint32_t j = 0; j < k; ++j)
                    buf.push_back(static_cast<float>(basis(3 * v + c, j)));
        out.write_f32_array(buf.data(), buf.size());
    };
    write_basis(model.id_basis);
    write_basis(model.ex_basis);

    for (int c = 0; c < 3; ++c) out.write_f32(static_cast<float>(model.jaw_joint[c]));

    buf.clear();
    for (std::uint32_t v = 0; v < n; ++v) buf.push_back(static_cast<float>(model.jaw_weights[v]));
    out.write_f32_array(buf.data(), buf.size());

    buf.clear();
    for (std::uint32_t v = 0; v < n; ++v)
        for (int c = 0; c < 2; ++c) buf.push_back(static_cast<float>(model.vertex_uv(v, c)));
    out.write_f32_array(buf.data(), buf.size());

    out.write_u32(static_cast<std::uint32_t>(model.landmark_vertex_ids.size()));
    std::vector<std::uint32_t> lmk(model.landmark_vertex_ids.begin(), model.landmark_vertex_ids.end());
    if (!lmk.empty()) out.write_u32_array(lmk.data(), lmk.size());
}

} // namespace facefit
