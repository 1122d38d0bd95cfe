#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "facefit/geometry.hpp"

namespace facefit {

/// Ground-truth scan: oriented points in millimeters, optional per-point
/// region labels.
struct PointCloud {
    Eigen::MatrixX3d points;  // P x 3, millimeters
    Eigen::MatrixX3d normals; // P x 3, unit
    Eigen::VectorXi labels;   // P, or empty when absent

    int size() const { return static_cast<int>(points.rows()); }
    bool has_labels() const { return labels.size() == points.rows(); }
};

struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
    Eigen::MatrixX3d apply(const Eigen::MatrixX3d& pts) const {
        return (pts * rotation.transpose()).rowwise() + translation.transpose();
    }
    RigidTransform compose(const RigidTransform& inner) const {
        return {rotation * inner.rotation, rotation * inner.translation + translation};
    }
};

struct MetricsRecord {
    double l1_mm = 0.0;        // mean GT-point-to-surface distance
    double l2_mm = 0.0;        // root-mean-square distance
    double nc = 0.0;           // mean normal cosine, in [-1, 1]
    double recall_2_5 = 0.0;   // fraction of GT points within threshold
    RigidTransform aligned_transform;
};

struct SurfaceHit {
    double distance = 0.0;
    Eigen::Vector3d point = Eigen::Vector3d::Zero();  // nearest point on the surface
    std::int32_t triangle = -1;
    Eigen::Vector3d normal = Eigen::Vector3d::Zero(); // interpolated vertex normal at `point`
};

/// Static AABB tree over mesh triangles answering exact nearest-surface
/// queries. Results match a brute-force scan over all triangles, including
/// the lowest-triangle-id tie rule.
class TriangleBvh {
public:
    TriangleBvh(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& triangles);

    SurfaceHit nearest(const Eigen::Vector3d& query) const;

    const Eigen::MatrixX3d& vertices() const { return vertices_; }
    const Eigen::MatrixX3i& triangles() const { return triangles_; }

private:
    struct Node {
        Eigen::Vector3d box_lo, box_hi;
        std::int32_t left = -1, right = -1;  // children, or -1 at a leaf
        std::int32_t first = 0, count = 0;   // leaf triangle range
    };

    double box_distance2(const Node& node, const Eigen::Vector3d& q) const;
    std::int32_t build(std::vector<std::int32_t>& ids, std::int32_t first, std::int32_t count);

    Eigen::MatrixX3d vertices_;
    Eigen::MatrixX3i triangles_;
    Eigen::MatrixX3d vertex_normals_;
    std::vector<Node> nodes_;
    std::vector<std::int32_t> leaf_triangles_; // sorted within each leaf
};

/// Exact distance from a point to a triangle; also reports the closest point.
double point_triangle_distance2(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                Eigen::Vector3d& closest);

/// Convenience single-query form (builds no BVH).
SurfaceHit point_to_mesh_distance(const Eigen::Vector3d& point, const TriangleBvh& bvh);

/// Landmark pair for rigid alignment: a mesh vertex and its GT location.
struct LandmarkPair {
    int vertex_id = 0;
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

struct IcpOptions {
    int max_iterations = 50;
    double inlier_fraction = 0.9;
    double relative_rmse_tolerance = 1e-6;
};

/// Rigid alignment of a predicted mesh to a GT point cloud: closed-form
/// Procrustes on the landmark pairs, refined by trimmed point-to-plane ICP
/// (GT points against the mesh surface). Returns the transform to apply to
/// the mesh. Throws DegenerateLandmarks for < 3 or collinear landmarks.
RigidTransform rigid_align(const TriMesh& pred, const PointCloud& gt,
                           const std::vector<LandmarkPair>& landmarks,
                           const IcpOptions& options = {});

/// Benchmark metrics over the GT points whose label is in `keep_labels`
/// (empty = keep all). The mesh must already be aligned.
MetricsRecord compute_metrics(const TriMesh& pred, const PointCloud& gt,
                              const std::vector<int>& keep_labels = {},
                              double recall_threshold_mm = 2.5);

} // namespace facefit
