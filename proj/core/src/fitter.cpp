#include "facefit/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "facefit/common.hpp"
#include "facefit/geometry.hpp"
#include "facefit/raster.hpp"
#include "facefit/rotation.hpp"

namespace facefit {

namespace {
constexpr double kContribMinDepth = 1e-6;
constexpr double kPhase1Fraction = 0.2;
constexpr int kMinContributing = 10;
} // namespace

void FitConfig::validate() const {
    auto non_negative = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            fail(ErrorKind::NonFiniteData, std::string("config ") + name + " must be non-negative");
    };
    non_negative(lambda_uv, "lambda_uv");
    non_negative(lambda_n, "lambda_n");
    non_negative(lambda_id, "lambda_id");
    non_negative(lambda_ex, "lambda_ex");
    non_negative(lambda_lmk, "lambda_lmk");
    non_negative(lr_id, "lr_id");
    non_negative(lr_ex, "lr_ex");
    non_negative(lr_jaw, "lr_jaw");
    non_negative(lr_cam, "lr_cam");
    non_negative(delta_uv, "delta_uv");
    if (steps <= 0) fail(ErrorKind::NonFiniteData, "config steps must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        fail(ErrorKind::NonFiniteData, "config adam betas must lie in [0,1)");
    if (!(adam_eps > 0.0)) fail(ErrorKind::NonFiniteData, "config adam_eps must be positive");
    if (corr_refresh_interval <= 0)
        fail(ErrorKind::NonFiniteData, "config corr_refresh_interval must be positive");
}

void FitInputs::validate(const MorphableModel& model) const {
    if (uv_map.channels != 2)
        fail(ErrorKind::DimensionMismatch, "uv map must have 2 channels, has " + std::to_string(uv_map.channels));
    if (normal_map.channels != 3)
        fail(ErrorKind::DimensionMismatch,
             "normal map must have 3 channels, has " + std::to_string(normal_map.channels));
    if (mask.channels != 1)
        fail(ErrorKind::DimensionMismatch, "mask must have 1 channel, has " + std::to_string(mask.channels));
    if (!uv_map.same_size(normal_map) || !uv_map.same_size(mask))
        fail(ErrorKind::DimensionMismatch, "uv/normal/mask map dimensions differ");
    if (mica_identity && mica_identity->size() != model.id_dim())
        fail(ErrorKind::DimensionMismatch,
             "identity anchor has " + std::to_string(mica_identity->size()) + " entries, model expects " +
                 std::to_string(model.id_dim()));
    for (const auto& lm : landmarks2d)
        if (lm.vertex_id < 0 || lm.vertex_id >= model.vertex_count())
            fail(ErrorKind::IndexOutOfRange,
                 "landmark vertex id " + std::to_string(lm.vertex_id) + " out of range");
}

// ---- loss terms -----------------------------------------------------------

UvLossResult uv_vertex_loss(const CorrespondenceSet& corr, const Eigen::MatrixX2d& projected,
                            const std::vector<std::uint8_t>& visible) {
    const int n = corr.size();
    if (projected.rows() != n || int(visible.size()) != n)
        fail(ErrorKind::DimensionMismatch, "uv_vertex_loss inputs not aligned to vertex count");

    UvLossResult out;
    out.grad = Eigen::MatrixX2d::Zero(n, 2);
    for (int v = 0; v < n; ++v)
        if (corr.accepted[v] && visible[v]) ++out.contributing;
    if (out.contributing == 0) return out;

    const double inv = 1.0 / out.contributing;
    for (int v = 0; v < n; ++v) {
        if (!(corr.accepted[v] && visible[v])) continue;
        for (int c = 0; c < 2; ++c) {
            const double diff = projected(v, c) - corr.target_pixels(v, c);
            out.value += std::abs(diff) * inv;
            // subgradient 0 at exact zero
            if (diff > 0.0)
                out.grad(v, c) = inv;
            else if (diff < 0.0)
                out.grad(v, c) = -inv;
        }
    }
    return out;
}

NormalLossResult normal_loss(const MapImage& pred, const MapImage& rendered, const MapImage& mask) {
    if (!pred.same_size(rendered) || !pred.same_size(mask))
        fail(ErrorKind::DimensionMismatch, "normal_loss map dimensions differ");
    if (pred.channels != rendered.channels)
        fail(ErrorKind::DimensionMismatch, "normal_loss channel counts differ");

    NormalLossResult out;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x)
            if (pred.is_valid(y, x) && rendered.is_valid(y, x) && mask.is_valid(y, x))
                ++out.contributing;
    if (out.contributing == 0) return out;

    const double inv = 1.0 / (double(out.contributing) * pred.channels);
    out.pixel_grads.reserve(out.contributing);
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) {
            if (!(pred.is_valid(y, x) && rendered.is_valid(y, x) && mask.is_valid(y, x))) continue;
            NormalLossResult::PixelGrad pg{x, y, Eigen::Vector3d::Zero()};
            for (int c = 0; c < pred.channels; ++c) {
                const double diff = double(rendered.at(y, x, c)) - double(pred.at(y, x, c));
                out.value += std::abs(diff) * inv;
                if (diff > 0.0)
                    pg.grad[c] = inv;
                else if (diff < 0.0)
                    pg.grad[c] = -inv;
            }
            out.pixel_grads.push_back(pg);
        }
    return out;
}

RegResult regularization(const FaceParams& face, const std::optional<Eigen::VectorXd>& mica_identity,
                         double lambda_id, double lambda_ex) {
    RegResult out;
    Eigen::VectorXd id_diff = face.identity_coeffs;
    if (mica_identity) {
        if (mica_identity->size() != face.identity_coeffs.size())
            fail(ErrorKind::DimensionMismatch, "identity anchor dimension mismatch");
        id_diff -= *mica_identity;
    }
    out.value = lambda_id * id_diff.squaredNorm() + lambda_ex * face.expression_coeffs.squaredNorm();
    out.grad_identity = 2.0 * lambda_id * id_diff;
    out.grad_expression = 2.0 * lambda_ex * face.expression_coeffs;
    return out;
}

LandmarkLossResult landmark_loss(const std::vector<Landmark2d>& landmarks,
                                 const Eigen::MatrixX2d& projected) {
    LandmarkLossResult out;
    out.grad = Eigen::MatrixX2d::Zero(projected.rows(), 2);
    if (landmarks.empty()) return out;

    const double inv = 1.0 / double(landmarks.size());
    for (const auto& lm : landmarks) {
        if (lm.vertex_id < 0 || lm.vertex_id >= projected.rows())
            fail(ErrorKind::IndexOutOfRange,
                 "landmark vertex id " + std::to_string(lm.vertex_id) + " out of range");
        for (int c = 0; c < 2; ++c) {
            const double diff = projected(lm.vertex_id, c) - lm.pixel[c];
            out.value += std::abs(diff) * inv;
            if (diff > 0.0)
                out.grad(lm.vertex_id, c) += inv;
            else if (diff < 0.0)
                out.grad(lm.vertex_id, c) -= inv;
        }
    }
    return out;
}

// ---- Adam -------------------------------------------------------------------

AdamState AdamState::zero(Eigen::Index dim) {
    AdamState s;
    s.first_moment = Eigen::VectorXd::Zero(dim);
    s.second_moment = Eigen::VectorXd::Zero(dim);
    return s;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               const Eigen::VectorXd& learning_rates, AdamState& state, const FitConfig& config,
               const std::vector<std::uint8_t>* active) {
    if (params.size() != grad.size() || params.size() != learning_rates.size() ||
        params.size() != state.first_moment.size())
        fail(ErrorKind::DimensionMismatch, "adam_step dimension mismatch");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.adam_beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(config.adam_beta2, double(state.step));
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        if (active && !(*active)[i]) continue;
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad[i];
        v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * grad[i] * grad[i];
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        params[i] -= learning_rates[i] * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
}

// ---- parameter packing ------------------------------------------------------

namespace {

// Optimizer coordinates for the camera.
//
// Focal length and camera-frame depth move together along an apparent-size
// valley (doubling both leaves the image almost unchanged), so they are
// optimized in rotated log coordinates: "size" = log fl - log tz (strongly
// constrained) and "range" = log fl + log tz (the weak perspective
// direction). Adam's per-coordinate step sizing then walks the valley
// directly instead of zig-zagging across it. The principal point offset is
// expressed in image widths. One lr_cam suits every camera unknown.
struct CamCoding {
    double fl_ref = 1.0;
    double tz_ref = 1.0;
    Eigen::Vector2d pp_ref = Eigen::Vector2d::Zero();
    double pp_scale = 1.0;
    // With frozen intrinsics the rotated coordinates cannot express
    // "fl fixed, depth free", so the two slots fall back to plain
    // (log fl, log tz).
    bool decouple = true;
};

// The perspective direction is weakly constrained and may need to travel
// ~0.5 log units within the step budget; the gain gives it a larger
// effective learning rate without touching lr_cam.
constexpr double kRangeGain = 2.0;

struct Layout {
    int kid = 0, kex = 0;
    int id_off = 0, ex_off = 0, jaw_off = 0, rot_off = 0, txy_off = 0, size_off = 0,
        range_off = 0, pp_off = 0;
    int total = 0;
};

Layout make_layout(const MorphableModel& model) {
    Layout l;
    l.kid = model.id_dim();
    l.kex = model.ex_dim();
    l.id_off = 0;
    l.ex_off = l.kid;
    l.jaw_off = l.kid + l.kex;
    l.rot_off = l.jaw_off + 3;
    l.txy_off = l.rot_off + 3;
    l.size_off = l.txy_off + 2;
    l.range_off = l.size_off + 1;
    l.pp_off = l.range_off + 1;
    l.total = l.pp_off + 2;
    return l;
}

Eigen::VectorXd pack_params(const Layout& l, const CamCoding& coding, const FaceParams& face,
                            const CameraParams& cam) {
    Eigen::VectorXd x(l.total);
    x.segment(l.id_off, l.kid) = face.identity_coeffs;
    x.segment(l.ex_off, l.kex) = face.expression_coeffs;
    x.segment<3>(l.jaw_off) = face.jaw_rotation;
    x.segment<3>(l.rot_off) = cam.rotation;
    x.segment<2>(l.txy_off) = cam.translation.head<2>();
    const double log_fl = std::log(cam.focal_length / coding.fl_ref);
    const double log_tz = std::log(std::max(cam.translation.z(), 1e-6) / coding.tz_ref);
    x[l.size_off] = coding.decouple ? log_fl - log_tz : log_fl;
    x[l.range_off] = coding.decouple ? (log_fl + log_tz) / kRangeGain : log_tz;
    x.segment<2>(l.pp_off) = (cam.principal_point - coding.pp_ref) / coding.pp_scale;
    return x;
}

FaceParams unpack_face(const Layout& l, const Eigen::VectorXd& x) {
    FaceParams face;
    face.identity_coeffs = x.segment(l.id_off, l.kid);
    face.expression_coeffs = x.segment(l.ex_off, l.kex);
    face.jaw_rotation = x.segment<3>(l.jaw_off);
    return face;
}

CameraParams unpack_cam(const Layout& l, const CamCoding& coding, const Eigen::VectorXd& x) {
    CameraParams cam;
    cam.rotation = x.segment<3>(l.rot_off);
    cam.translation.head<2>() = x.segment<2>(l.txy_off);
    if (coding.decouple) {
        const double sum = kRangeGain * x[l.range_off];
        cam.translation.z() = coding.tz_ref * std::exp(0.5 * (sum - x[l.size_off]));
        cam.focal_length = coding.fl_ref * std::exp(0.5 * (x[l.size_off] + sum));
    } else {
        cam.translation.z() = coding.tz_ref * std::exp(x[l.range_off]);
        cam.focal_length = coding.fl_ref * std::exp(x[l.size_off]);
    }
    cam.principal_point = coding.pp_ref + coding.pp_scale * x.segment<2>(l.pp_off);
    return cam;
}

// Maps the raw-parameter gradient (d/d fl, d/d translation, d/d pp) into
// coding coordinates.
void encode_cam_grad(const Layout& l, const CamCoding& coding, const CameraParams& cam,
                     const Eigen::VectorXd& raw_cam_grad, Eigen::VectorXd& x_grad) {
    x_grad.segment<3>(l.rot_off) = raw_cam_grad.segment<3>(0);
    x_grad.segment<2>(l.txy_off) = raw_cam_grad.segment<2>(3);
    const double g_log_fl = raw_cam_grad[6] * cam.focal_length;
    const double g_log_tz = raw_cam_grad[5] * cam.translation.z();
    if (coding.decouple) {
        x_grad[l.size_off] = 0.5 * (g_log_fl - g_log_tz);
        x_grad[l.range_off] = 0.5 * kRangeGain * (g_log_fl + g_log_tz);
    } else {
        x_grad[l.size_off] = g_log_fl;
        x_grad[l.range_off] = g_log_tz;
    }
    x_grad.segment<2>(l.pp_off) = raw_cam_grad.segment<2>(7) * coding.pp_scale;
}

Eigen::VectorXd learning_rate_vector(const Layout& l, const FitConfig& config) {
    Eigen::VectorXd lr(l.total);
    lr.segment(l.id_off, l.kid).setConstant(config.lr_id);
    lr.segment(l.ex_off, l.kex).setConstant(config.lr_ex);
    lr.segment<3>(l.jaw_off).setConstant(config.lr_jaw);
    lr.segment(l.rot_off, 9).setConstant(config.lr_cam);
    return lr;
}

// Least-squares camera pre-solve on the static correspondence targets: a few
// damped Gauss-Newton steps over rotation, in-plane translation and apparent
// size with the current shape held fixed. The focal-length / distance product
// stays pinned: with the shape still wrong, perspective is unobservable and
// plain least squares runs down that valley toward an orthographic camera.
// Correspondence targets give direct 2D-3D matches, so this lands the camera
// near its basin before the gradient loop starts.
// `with_range` frees the focal-length / distance product as a seventh
// coordinate; only safe once the shape is reasonably converged, otherwise
// least squares runs toward an orthographic camera.
CameraParams presolve_camera(const Eigen::MatrixX3d& vertices, const CorrespondenceSet& corr,
                             CameraParams cam, bool with_range) {
    std::vector<int> used;
    for (int v = 0; v < corr.size(); ++v)
        if (corr.accepted[v]) used.push_back(v);
    if (used.size() < 8) return cam;

    const CameraParams fallback = cam;
    double product = cam.focal_length * std::max(cam.translation.z(), 1e-6);
    const int dof = with_range ? 9 : 6; // the full solve frees pp as well
    for (int iter = 0; iter < 30; ++iter) {
        Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(dof, dof);
        Eigen::VectorXd jtr = Eigen::VectorXd::Zero(dof);
        int rows = 0;
        const ProjectionResult proj = project(vertices, cam);
        for (const int v : used) {
            if (proj.depths[v] < 0.05) continue;
            const PixelJacobian pj = project_jacobian(vertices.row(v), cam);
            Eigen::MatrixXd jac(2, dof);
            // col 5, "size": fl *= e^(s/2), tz *= e^(-s/2)
            // col 6, "range": fl *= e^(s/2), tz *= e^(+s/2)
            jac.col(0) = pj.d_rotation.col(0);
            jac.col(1) = pj.d_rotation.col(1);
            jac.col(2) = pj.d_rotation.col(2);
            jac.col(3) = pj.d_translation.col(0);
            jac.col(4) = pj.d_translation.col(1);
            jac.col(5) = 0.5 * (pj.d_focal_length * cam.focal_length -
                                pj.d_translation.col(2) * cam.translation.z());
            if (with_range) {
                jac.col(6) = 0.5 * (pj.d_focal_length * cam.focal_length +
                                    pj.d_translation.col(2) * cam.translation.z());
                jac.col(7) = pj.d_principal_point.col(0);
                jac.col(8) = pj.d_principal_point.col(1);
            }
            const Eigen::Vector2d r =
                proj.pixels.row(v).transpose() - corr.target_pixels.row(v).transpose();
            jtj += jac.transpose() * jac;
            jtr += jac.transpose() * r;
            ++rows;
        }
        if (rows < 8) return cam;
        jtj.diagonal() *= 1.0 + 1e-4;
        Eigen::VectorXd delta = jtj.ldlt().solve(jtr);
        if (!delta.allFinite()) break;
        if (delta.norm() > 1.0) delta *= 1.0 / delta.norm(); // trust region
        cam.rotation -= delta.segment<3>(0);
        cam.translation.x() -= delta[3];
        cam.translation.y() -= delta[4];
        cam.focal_length *= std::exp(-0.5 * delta[5]);
        if (with_range) {
            cam.focal_length *= std::exp(-0.5 * delta[6]);
            product *= std::exp(-delta[6]);
            cam.principal_point.x() -= delta[7];
            cam.principal_point.y() -= delta[8];
        }
        cam.translation.z() = product / cam.focal_length;
        if (delta.norm() < 1e-10) break;
    }
    // reject runaway solutions (shape not as converged as hoped)
    if (cam.focal_length < 0.6 * fallback.focal_length ||
        cam.focal_length > 1.7 * fallback.focal_length || cam.translation.z() < 0.02)
        return fallback;
    return cam;
}

} // namespace

// ---- energy -----------------------------------------------------------------

EnergyGradients energy_and_gradients(const MorphableModel& model, const FaceParams& face,
                                     const CameraParams& cam, const FitInputs& inputs,
                                     const FitConfig& config, const CorrespondenceSet& corr) {
    const int n = model.vertex_count();
    const int width = inputs.uv_map.width;
    const int height = inputs.uv_map.height;

    EnergyGradients out;
    out.face_grad = Eigen::VectorXd::Zero(model.id_dim() + model.ex_dim() + 3);
    out.cam_grad = Eigen::VectorXd::Zero(9);
    out.cam_grad_sparse = Eigen::VectorXd::Zero(9);

    const Eigen::MatrixX3d verts = model_forward(model, face);
    const Eigen::MatrixXd face_jac = model_forward_jacobian(model, face);
    const ProjectionResult proj = project(verts, cam);
    const FragmentBuffer frag = rasterize(verts, model.triangles, cam, width, height, config.threads);
    std::vector<std::uint8_t> visible = visible_vertices(verts, model.triangles, cam, frag);

    // Gradient w.r.t. vertex positions, accumulated across all terms, pushed
    // through the face Jacobian once at the end.
    Eigen::MatrixX3d vert_grad = Eigen::MatrixX3d::Zero(n, 3);

    // -- uv vertex term --
    const UvLossResult uv = uv_vertex_loss(corr, proj.pixels, visible);
    out.terms.uv = config.lambda_uv * uv.value;
    out.terms.contributing_vertices = uv.contributing;

    // -- landmark term (pairs whose vertex is in front of the camera) --
    LandmarkLossResult lmk;
    if (!inputs.landmarks2d.empty() && config.lambda_lmk > 0.0) {
        std::vector<Landmark2d> usable;
        usable.reserve(inputs.landmarks2d.size());
        for (const auto& lm : inputs.landmarks2d)
            if (proj.depths[lm.vertex_id] > kContribMinDepth) usable.push_back(lm);
        lmk = landmark_loss(usable, proj.pixels);
        out.terms.landmark = config.lambda_lmk * lmk.value;
    } else {
        lmk.grad = Eigen::MatrixX2d::Zero(n, 2);
    }

    // Pixel-space gradients chain through the projection per vertex.
    for (int v = 0; v < n; ++v) {
        Eigen::Vector2d g_pixel = config.lambda_uv * uv.grad.row(v).transpose() +
                                  config.lambda_lmk * lmk.grad.row(v).transpose();
        if (g_pixel.isZero(0.0)) continue;
        if (proj.depths[v] <= kContribMinDepth) continue;
        const PixelJacobian pj = project_jacobian(verts.row(v), cam);
        vert_grad.row(v) += (pj.d_point.transpose() * g_pixel).transpose();
        Eigen::VectorXd cam_part(9);
        cam_part.segment<3>(0) = pj.d_rotation.transpose() * g_pixel;
        cam_part.segment<3>(3) = pj.d_translation.transpose() * g_pixel;
        cam_part[6] = pj.d_focal_length.dot(g_pixel);
        cam_part.segment<2>(7) = pj.d_principal_point.transpose() * g_pixel;
        out.cam_grad += cam_part;
        out.cam_grad_sparse += cam_part;
    }

    // -- normal term --
    if (config.lambda_n > 0.0) {
        const Eigen::Matrix3d rot = cam.rotation_matrix();
        const Eigen::MatrixX3d normal_sums = vertex_normal_sums(verts, model.triangles);
        Eigen::MatrixX3d normals_world = normal_sums;
        for (int v = 0; v < n; ++v) {
            const double len = normals_world.row(v).norm();
            if (len > 0.0) normals_world.row(v) /= len;
        }
        const Eigen::MatrixX3d normals_cam = normals_world * rot.transpose();

        // Rendered normals kept in double so the energy stays smooth for
        // finite-difference validation; the float path in render_maps is for
        // files only.
        double value = 0.0;
        int contributing = 0;
        Eigen::MatrixX3d ncam_grad = Eigen::MatrixX3d::Zero(n, 3);

        std::vector<std::pair<int, int>> pixels;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (frag.covered(y, x) && inputs.normal_map.is_valid(y, x) && inputs.mask.is_valid(y, x))
                    pixels.emplace_back(x, y);
        contributing = int(pixels.size());

        if (contributing > 0) {
            const double inv = 1.0 / (3.0 * contributing);
            for (const auto& [x, y] : pixels) {
                const std::int32_t t = frag.tri_at(y, x);
                const Eigen::Vector3d b = frag.bary_at(y, x);
                Eigen::Vector3d m = Eigen::Vector3d::Zero();
                for (int j = 0; j < 3; ++j) m += b[j] * normals_cam.row(model.triangles(t, j)).transpose();
                const double mlen = m.norm();
                if (mlen == 0.0) continue;
                const Eigen::Vector3d nrm = m / mlen;

                Eigen::Vector3d g_pixel = Eigen::Vector3d::Zero();
                for (int c = 0; c < 3; ++c) {
                    const double diff = nrm[c] - double(inputs.normal_map.at(y, x, c));
                    value += std::abs(diff) * inv;
                    if (diff > 0.0)
                        g_pixel[c] = inv;
                    else if (diff < 0.0)
                        g_pixel[c] = -inv;
                }
                // through the per-pixel renormalization
                const Eigen::Vector3d g_m = (g_pixel - nrm * nrm.dot(g_pixel)) / mlen;
                for (int j = 0; j < 3; ++j)
                    ncam_grad.row(model.triangles(t, j)) += (config.lambda_n * b[j]) * g_m.transpose();
            }
        }
        out.terms.normal = config.lambda_n * value;
        out.terms.contributing_pixels = contributing;

        // camera rotation sees the world->camera normal rotation
        Eigen::MatrixX3d nworld_grad = Eigen::MatrixX3d::Zero(n, 3);
        Eigen::Vector3d rot_grad = Eigen::Vector3d::Zero();
        for (int v = 0; v < n; ++v) {
            const Eigen::Vector3d g = ncam_grad.row(v);
            if (g.isZero(0.0)) continue;
            rot_grad += rotate_point_jacobian(cam.rotation, normals_world.row(v)).transpose() * g;
            nworld_grad.row(v) = (rot.transpose() * g).transpose();
        }
        out.cam_grad.segment<3>(0) += rot_grad;

        // through the vertex-normal normalization
        Eigen::MatrixX3d nsum_grad = Eigen::MatrixX3d::Zero(n, 3);
        for (int v = 0; v < n; ++v) {
            const Eigen::Vector3d g = nworld_grad.row(v);
            if (g.isZero(0.0)) continue;
            const double len = normal_sums.row(v).norm();
            if (len == 0.0) continue;
            const Eigen::Vector3d nw = normals_world.row(v);
            nsum_grad.row(v) = ((g - nw * nw.dot(g)) / len).transpose();
        }

        // through the area-weighted cross products, one pass over faces
        for (int t = 0; t < model.triangle_count(); ++t) {
            const int a = model.triangles(t, 0), bb = model.triangles(t, 1), cc = model.triangles(t, 2);
            const Eigen::Vector3d g_cr =
                0.5 * (nsum_grad.row(a) + nsum_grad.row(bb) + nsum_grad.row(cc)).transpose();
            if (g_cr.isZero(0.0)) continue;
            const Eigen::Vector3d e1 = verts.row(bb) - verts.row(a);
            const Eigen::Vector3d e2 = verts.row(cc) - verts.row(a);
            vert_grad.row(a) += ((e1 - e2).cross(g_cr)).transpose();
            vert_grad.row(bb) += (e2.cross(g_cr)).transpose();
            vert_grad.row(cc) += (g_cr.cross(e1)).transpose();
        }
    }

    // -- regularizer --
    const RegResult reg =
        regularization(face, inputs.mica_identity, config.lambda_id, config.lambda_ex);
    out.terms.reg = reg.value;

    // vertex gradients -> face parameters
    Eigen::VectorXd vert_grad_flat(3 * n);
    for (int v = 0; v < n; ++v) vert_grad_flat.segment<3>(3 * v) = vert_grad.row(v).transpose();
    out.face_grad = face_jac.transpose() * vert_grad_flat;
    out.face_grad.segment(0, model.id_dim()) += reg.grad_identity;
    out.face_grad.segment(model.id_dim(), model.ex_dim()) += reg.grad_expression;

    out.terms.total = out.terms.uv + out.terms.normal + out.terms.reg + out.terms.landmark;
    return out;
}

// ---- fitting ------------------------------------------------------------------

FitInit default_fit_init(const MorphableModel& model, int width, int height) {
    FitInit init;
    init.face = FaceParams::zero(model);
    init.cam.rotation.setZero();
    init.cam.focal_length = double(std::max(width, height));
    init.cam.principal_point = Eigen::Vector2d(width / 2.0, height / 2.0);
    const Eigen::Vector3d centroid = model.template_vertices.colwise().mean();
    const double diag = bounding_box_diagonal(model.template_vertices);
    // depth at which the template spans ~72% of the shorter image side, the
    // typical framing of a face crop
    const double depth = init.cam.focal_length * diag / (0.72 * std::min(width, height));
    init.cam.translation = Eigen::Vector3d(0, 0, depth) - centroid;
    return init;
}

FitResult fit_image_from(const MorphableModel& model, const FitInputs& inputs,
                         const FitConfig& config, const FitInit& init, const ParamFreeze& freeze,
                         bool run_camera_phase) {
    config.validate();
    inputs.validate(model);

    UvIndex index;
    try {
        index = build_uv_index(inputs.uv_map, inputs.mask);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::EmptyMask)
            fail(ErrorKind::NoCorrespondences, "no valid pixels to correspond against");
        throw;
    }
    CorrespondenceSet corr = find_correspondences(model, index, config.delta_uv);

    const CorrespondenceSet gn_corr =
        run_camera_phase ? find_correspondences(model, index, 1.5 * config.delta_uv) : corr;

    FitInit start = init;
    if (run_camera_phase)
        start.cam = presolve_camera(model_forward(model, init.face), corr, init.cam, false);

    const Layout layout = make_layout(model);
    CamCoding coding;
    coding.fl_ref = start.cam.focal_length;
    coding.tz_ref = std::max(start.cam.translation.z(), 1e-6);
    coding.pp_ref = start.cam.principal_point;
    coding.pp_scale = double(inputs.uv_map.width);
    coding.decouple = !freeze.intrinsics;

    Eigen::VectorXd x = pack_params(layout, coding, start.face, start.cam);
    const Eigen::VectorXd lr = learning_rate_vector(layout, config);
    AdamState state = AdamState::zero(layout.total);

    std::vector<std::uint8_t> camera_only(layout.total, 0);
    for (int i = layout.rot_off; i < layout.total; ++i) camera_only[i] = 1;
    // While the shape is wrong the perspective direction only absorbs shape
    // misfit, so it stays at its initialization until the late joint stage.
    camera_only[layout.range_off] = 0;
    std::vector<std::uint8_t> unfrozen(layout.total, 1);
    if (freeze.identity)
        for (int i = 0; i < layout.kid; ++i) unfrozen[layout.id_off + i] = 0;
    if (freeze.intrinsics) {
        unfrozen[layout.size_off] = 0; // log fl in the non-decoupled coding
        unfrozen[layout.pp_off] = 0;
        unfrozen[layout.pp_off + 1] = 0;
    }
    std::vector<std::uint8_t> no_range = unfrozen;
    no_range[layout.range_off] = 0;

    const int phase1_steps = run_camera_phase ? int(std::lround(kPhase1Fraction * config.steps)) : 0;

    FitResult result;
    result.energy_trace.reserve(config.steps);
    int best_contributing = 0;
    const int tail_start = int(std::lround(0.85 * config.steps));
    Eigen::VectorXd tail_sum = Eigen::VectorXd::Zero(layout.total);

    // The optimizer state restarts whenever the active parameter set
    // changes: moments accumulated while the shape was still coarse would
    // keep the weakly-constrained camera directions sluggish exactly when
    // their signal becomes meaningful. The final quarter re-freezes the
    // shape so the camera settles in its own basin, free of the slow
    // shape/perspective exchange.
    const int range_release_step =
        phase1_steps + int(std::lround(0.15 * (config.steps - phase1_steps)));
    const int camera_resolve_step = int(std::lround(0.6 * config.steps));
    const int camera_polish_step = int(std::lround(0.8 * config.steps));
    std::vector<std::uint8_t> full_camera = camera_only;
    full_camera[layout.range_off] = unfrozen[layout.range_off];
    full_camera[layout.size_off] = unfrozen[layout.size_off];
    full_camera[layout.pp_off] = unfrozen[layout.pp_off];
    full_camera[layout.pp_off + 1] = unfrozen[layout.pp_off + 1];

    for (int step = 0; step < config.steps; ++step) {
        if (step > 0 && step % config.corr_refresh_interval == 0)
            corr = find_correspondences(model, index, config.delta_uv);
        if (run_camera_phase &&
            (step == phase1_steps || step == range_release_step ||
             step == camera_resolve_step || step == camera_polish_step))
            state = AdamState::zero(layout.total);
        if ((step == camera_resolve_step || step == camera_polish_step) && run_camera_phase) {
            // with the shape now converged, a full least-squares camera solve
            // jumps the perspective coordinate into its basin; a looser gate
            // admits more matches, averaging down target quantization noise
            const FaceParams f = unpack_face(layout, x);
            const CameraParams solved = presolve_camera(model_forward(model, f), gn_corr,
                                                        unpack_cam(layout, coding, x), true);
            x = pack_params(layout, coding, f, solved);
        }

        const FaceParams face = unpack_face(layout, x);
        const CameraParams cam = unpack_cam(layout, coding, x);
        const EnergyGradients eval = energy_and_gradients(model, face, cam, inputs, config, corr);
        result.energy_trace.push_back(eval.terms.total);
        best_contributing = std::max(best_contributing, eval.terms.contributing_vertices);

        Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.total);
        const bool phase1 = step < phase1_steps;
        if (phase1) {
            encode_cam_grad(layout, coding, cam, eval.cam_grad_sparse, grad);
        } else {
            grad.segment(0, layout.kid + layout.kex + 3) = eval.face_grad;
            encode_cam_grad(layout, coding, cam, eval.cam_grad, grad);
        }

        if (phase1 == false && run_camera_phase && step == phase1_steps &&
            best_contributing < kMinContributing)
            fail(ErrorKind::NoCorrespondences,
                 "camera phase saw only " + std::to_string(best_contributing) +
                     " contributing vertices (need " + std::to_string(kMinContributing) + ")");
        if (!run_camera_phase && step == 0 && eval.terms.contributing_vertices < kMinContributing)
            fail(ErrorKind::NoCorrespondences,
                 "only " + std::to_string(eval.terms.contributing_vertices) +
                     " contributing vertices (need " + std::to_string(kMinContributing) + ")");

        const std::vector<std::uint8_t>* active = &unfrozen;
        if (run_camera_phase) {
            if (phase1)
                active = &camera_only;
            else if (step < range_release_step)
                active = &no_range;
            else if (step >= camera_polish_step)
                active = &full_camera;
        }
        adam_step(x, grad, lr, state, config, active);

        // tail averaging: near convergence the L1 losses keep sign-flipping
        // at sub-pixel residuals and Adam walks around the optimum; the mean
        // of the late iterates sits much closer to the basin center
        if (step >= tail_start) tail_sum += x;
    }
    if (config.steps > tail_start)
        x = tail_sum / double(config.steps - tail_start);
    if (run_camera_phase) {
        // final refit: solve the camera once more from the averaged shape
        const FaceParams f = unpack_face(layout, x);
        const CameraParams solved = presolve_camera(model_forward(model, f), gn_corr,
                                                    unpack_cam(layout, coding, x), true);
        x = pack_params(layout, coding, f, solved);
    }

    result.face = unpack_face(layout, x);
    result.cam = unpack_cam(layout, coding, x);
    const EnergyGradients final_eval =
        energy_and_gradients(model, result.face, result.cam, inputs, config, corr);
    result.term_breakdown = final_eval.terms;
    return result;
}

FitResult fit_image(const MorphableModel& model, const FitInputs& inputs, const FitConfig& config) {
    FitInit init = default_fit_init(model, inputs.uv_map.width, inputs.uv_map.height);
    // identity starts at the external prediction when one is supplied; the
    // regularizer anchors to the same vector
    if (inputs.mica_identity) init.face.identity_coeffs = *inputs.mica_identity;
    return fit_image_from(model, inputs, config, init, ParamFreeze{}, /*run_camera_phase=*/true);
}

} // namespace facefit
