#pragma once

#include <Eigen/Dense>

namespace facefit {

// Axis-angle (exponential map) utilities shared by the jaw joint and the
// camera extrinsics. All functions switch to second-order Taylor expansions
// below kSmallAngle so that values and derivatives stay smooth through the
// identity, where fitting is initialized.

inline constexpr double kSmallAngle = 1e-8;

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Rotation matrix exp([omega]x). Orthonormal with det +1; exact identity at
/// omega = 0.
Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& omega);

/// Right Jacobian J_r of SO(3): exp(omega + d) ~= exp(omega) exp(J_r(omega) d).
Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& omega);

/// d(exp(omega) p) / d(omega) as a 3x3 matrix, computed as -R [p]x J_r(omega).
Eigen::Matrix3d rotate_point_jacobian(const Eigen::Vector3d& omega, const Eigen::Vector3d& point);

} // namespace facefit
