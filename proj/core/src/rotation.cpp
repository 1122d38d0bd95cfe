#include "facefit/rotation.hpp"

#include <cmath>

namespace facefit {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& omega) {
    const double theta2 = omega.squaredNorm();
    const Eigen::Matrix3d k = skew(omega);
    if (theta2 < kSmallAngle * kSmallAngle) {
        // sin(t)/t ~ 1 - t^2/6, (1-cos(t))/t^2 ~ 1/2 - t^2/24
        return Eigen::Matrix3d::Identity() + (1.0 - theta2 / 6.0) * k +
               (0.5 - theta2 / 24.0) * (k * k);
    }
    const double theta = std::sqrt(theta2);
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / theta2;
    return Eigen::Matrix3d::Identity() + a * k + b * (k * k);
}

Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& omega) {
    const double theta2 = omega.squaredNorm();
    const Eigen::Matrix3d k = skew(omega);
    if (theta2 < kSmallAngle * kSmallAngle) {
        // (1-cos(t))/t^2 ~ 1/2 - t^2/24, (t-sin(t))/t^3 ~ 1/6 - t^2/120
        return Eigen::Matrix3d::Identity() - (0.5 - theta2 / 24.0) * k +
               (1.0 / 6.0 - theta2 / 120.0) * (k * k);
    }
    const double theta = std::sqrt(theta2);
    const double a = (1.0 - std::cos(theta)) / theta2;
    const double b = (theta - std::sin(theta)) / (theta2 * theta);
    return Eigen::Matrix3d::Identity() - a * k + b * (k * k);
}

Eigen::Matrix3d rotate_point_jacobian(const Eigen::Vector3d& omega, const Eigen::Vector3d& point) {
    return -axis_angle_to_matrix(omega) * skew(point) * so3_right_jacobian(omega);
}

} // namespace facefit
