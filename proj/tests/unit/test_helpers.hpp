#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace test_helpers {

inline std::filesystem::path temp_file(const std::string& name) {
    static std::uint64_t counter = 0;
    const auto dir = std::filesystem::temp_directory_path() / "facefit_tests";
    std::filesystem::create_directories(dir);
    return dir / (std::to_string(++counter) + "_" + name);
}

inline std::vector<char> read_all_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Eigen::Vector3d random_unit_vector(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Vector3d v(gauss(rng), gauss(rng), gauss(rng));
    while (v.norm() < 1e-6) v = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    return v.normalized();
}

// Central finite difference of a scalar function along one coordinate.
template <typename F>
double central_difference(F&& f, Eigen::VectorXd x, Eigen::Index i, double h) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double hi = f(x);
    x[i] = x0 - h;
    const double lo = f(x);
    return (hi - lo) / (2.0 * h);
}

inline double relative_error(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-12});
    return std::abs(got - want) / denom;
}

} // namespace test_helpers
