#pragma once

#include <Eigen/Dense>

namespace facefit {

/// Pinhole camera with optimizable extrinsics and intrinsics.
///
/// Convention (used everywhere in this project): camera looks down +z,
/// +x right, +y down, pixel origin at the top-left corner, pixel centers at
/// half-integer coordinates.
struct CameraParams {
    Eigen::Vector3d rotation = Eigen::Vector3d::Zero();    // axis-angle, radians
    Eigen::Vector3d translation = Eigen::Vector3d::Zero(); // meters
    double focal_length = 1.0;                             // pixels
    Eigen::Vector2d principal_point = Eigen::Vector2d::Zero(); // pixels

    Eigen::Matrix3d rotation_matrix() const;
    Eigen::Vector3d to_camera_frame(const Eigen::Vector3d& world_point) const;
};

struct ProjectionResult {
    Eigen::MatrixX2d pixels; // M x 2
    Eigen::VectorXd depths;  // M; <= 0 marks an invalid projection
};

/// Projects world points: pixel = fl * (x_cam.xy / x_cam.z) + pp with
/// x_cam = exp(rotation) x + translation. Points at or behind the camera are
/// flagged through depth, never an error.
ProjectionResult project(const Eigen::MatrixX3d& points, const CameraParams& cam);

/// Derivatives of one projected pixel with respect to the world point and
/// every camera parameter. Throws NearZeroDepth when the camera-frame depth
/// of an evaluated point is <= 1e-6.
struct PixelJacobian {
    Eigen::Matrix<double, 2, 3> d_point;       // w.r.t. world point
    Eigen::Matrix<double, 2, 3> d_rotation;    // w.r.t. axis-angle
    Eigen::Matrix<double, 2, 3> d_translation;
    Eigen::Vector2d d_focal_length;
    Eigen::Matrix2d d_principal_point;
};

PixelJacobian project_jacobian(const Eigen::Vector3d& point, const CameraParams& cam);

} // namespace facefit
