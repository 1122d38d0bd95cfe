#include "facefit/geometry.hpp"

#include <algorithm>
#include <array>
#include <vector>

#include "facefit/common.hpp"

namespace facefit {

namespace {

// Rotates (a,b,c) so the smallest vertex index comes first; winding preserved.
std::array<int, 3> canonical_cycle(int a, int b, int c) {
    if (a <= b && a <= c) return {a, b, c};
    if (b <= a && b <= c) return {b, c, a};
    return {c, a, b};
}

} // namespace

Eigen::MatrixX3d vertex_normal_sums(const Eigen::MatrixX3d& vertices,
                                    const Eigen::MatrixX3i& triangles) {
    const int n = static_cast<int>(vertices.rows());
    const int f = static_cast<int>(triangles.rows());

    struct Contribution {
        std::array<int, 3> key;
        Eigen::Vector3d value;
    };
    std::vector<std::vector<Contribution>> per_vertex(n);

    for (int t = 0; t < f; ++t) {
        const int a = triangles(t, 0), b = triangles(t, 1), c = triangles(t, 2);
        if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n)
            fail(ErrorKind::IndexOutOfRange, "triangle " + std::to_string(t) + " references vertex out of range");
        // cross/2 = area-weighted face normal
        const Eigen::Vector3d cr =
            0.5 * (vertices.row(b) - vertices.row(a)).cross(vertices.row(c) - vertices.row(a));
        const auto key = canonical_cycle(a, b, c);
        per_vertex[a].push_back({key, cr});
        per_vertex[b].push_back({key, cr});
        per_vertex[c].push_back({key, cr});
    }

    Eigen::MatrixX3d sums = Eigen::MatrixX3d::Zero(n, 3);
    for (int v = 0; v < n; ++v) {
        auto& contribs = per_vertex[v];
        std::sort(contribs.begin(), contribs.end(),
                  [](const Contribution& lhs, const Contribution& rhs) { return lhs.key < rhs.key; });
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        for (const auto& c : contribs) acc += c.value;
        sums.row(v) = acc;
    }
    return sums;
}

Eigen::MatrixX3d vertex_normals(const Eigen::MatrixX3d& vertices,
                                const Eigen::MatrixX3i& triangles) {
    Eigen::MatrixX3d sums = vertex_normal_sums(vertices, triangles);
    const int n = static_cast<int>(vertices.rows());

    // Track which vertices have adjacent faces at all; isolated vertices keep
    // a zero normal, but a vertex whose faces all collapse is an error.
    std::vector<char> has_face(n, 0);
    for (int t = 0; t < triangles.rows(); ++t)
        for (int j = 0; j < 3; ++j) has_face[triangles(t, j)] = 1;

    for (int v = 0; v < n; ++v) {
        const double len = sums.row(v).norm();
        if (len == 0.0) {
            if (has_face[v])
                fail(ErrorKind::DegenerateGeometry,
                     "vertex " + std::to_string(v) + " has only zero-area adjacent faces");
            continue;
        }
        sums.row(v) /= len;
    }
    return sums;
}

double bounding_box_diagonal(const Eigen::MatrixX3d& vertices) {
    if (vertices.rows() == 0) return 0.0;
    const Eigen::Vector3d lo = vertices.colwise().minCoeff();
    const Eigen::Vector3d hi = vertices.colwise().maxCoeff();
    return (hi - lo).norm();
}

} // namespace facefit
