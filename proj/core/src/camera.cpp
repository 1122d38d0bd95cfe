#include "facefit/camera.hpp"

#include "facefit/common.hpp"
#include "facefit/rotation.hpp"

namespace facefit {

Eigen::Matrix3d CameraParams::rotation_matrix() const {
    return axis_angle_to_matrix(rotation);
}

Eigen::Vector3d CameraParams::to_camera_frame(const Eigen::Vector3d& world_point) const {
    return rotation_matrix() * world_point + translation;
}

ProjectionResult project(const Eigen::MatrixX3d& points, const CameraParams& cam) {
    const Eigen::Matrix3d rot = cam.rotation_matrix();
    const int m = static_cast<int>(points.rows());
    ProjectionResult out;
    out.pixels.resize(m, 2);
    out.depths.resize(m);
    for (int i = 0; i < m; ++i) {
        const Eigen::Vector3d pc = rot * Eigen::Vector3d(points.row(i)) + cam.translation;
        out.depths[i] = pc.z();
        out.pixels(i, 0) = cam.focal_length * pc.x() / pc.z() + cam.principal_point.x();
        out.pixels(i, 1) = cam.focal_length * pc.y() / pc.z() + cam.principal_point.y();
    }
    return out;
}

PixelJacobian project_jacobian(const Eigen::Vector3d& point, const CameraParams& cam) {
    const Eigen::Matrix3d rot = cam.rotation_matrix();
    const Eigen::Vector3d pc = rot * point + cam.translation;
    if (pc.z() <= 1e-6)
        fail(ErrorKind::NearZeroDepth, "camera-frame depth " + std::to_string(pc.z()) +
                                           " too small for projection derivatives");

    const double inv_z = 1.0 / pc.z();
    // d(pixel) / d(camera-frame point)
    Eigen::Matrix<double, 2, 3> d_pc;
    d_pc << cam.focal_length * inv_z, 0.0, -cam.focal_length * pc.x() * inv_z * inv_z,
        0.0, cam.focal_length * inv_z, -cam.focal_length * pc.y() * inv_z * inv_z;

    PixelJacobian jac;
    jac.d_point = d_pc * rot;
    jac.d_rotation = d_pc * rotate_point_jacobian(cam.rotation, point);
    jac.d_translation = d_pc;
    jac.d_focal_length = Eigen::Vector2d(pc.x() * inv_z, pc.y() * inv_z);
    jac.d_principal_point = Eigen::Matrix2d::Identity();
    return jac;
}

} // namespace facefit
