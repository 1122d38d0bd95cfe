#pragma once

#include <Eigen/Dense>

namespace facefit {

/// Indexed triangle mesh; `uv` has zero rows when absent.
struct TriMesh {
    Eigen::MatrixX3d vertices;
    Eigen::MatrixX3i triangles;
    Eigen::MatrixX2d uv;

    int vertex_count() const { return static_cast<int>(vertices.rows()); }
    int triangle_count() const { return static_cast<int>(triangles.rows()); }
    bool has_uv() const { return uv.rows() == vertices.rows(); }
};

/// Area-weighted vertex normals, normalized to unit length.
///
/// Per-vertex contributions are accumulated over adjacent faces sorted by the
/// face's canonical vertex triple (winding preserved, smallest index first),
/// which makes the result independent of triangle order in the input.
/// Throws DegenerateGeometry if some vertex has adjacent faces but all of
/// them have zero area.
Eigen::MatrixX3d vertex_normals(const Eigen::MatrixX3d& vertices,
                                const Eigen::MatrixX3i& triangles);

/// Same accumulation, without the final normalization. Vertices whose
/// adjacent faces sum to a zero vector are left as zero.
Eigen::MatrixX3d vertex_normal_sums(const Eigen::MatrixX3d& vertices,
                                    const Eigen::MatrixX3i& triangles);

/// Diagonal length of the axis-aligned bounding box.
double bounding_box_diagonal(const Eigen::MatrixX3d& vertices);

} // namespace facefit
