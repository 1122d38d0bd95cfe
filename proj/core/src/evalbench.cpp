#include "facefit/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "facefit/common.hpp"
#include "facefit/rotation.hpp"

namespace facefit {

namespace {

Eigen::Vector3d closest_point_segment(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                      const Eigen::Vector3d& b) {
    const Eigen::Vector3d ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return a;
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return a + t * ab;
}

} // namespace

double point_triangle_distance2(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                Eigen::Vector3d& closest) {
    // Ericson-style closest point on triangle via Voronoi region tests.
    const Eigen::Vector3d ab = b - a;
    const Eigen::Vector3d ac = c - a;

    if (ab.cross(ac).squaredNorm() == 0.0) {
        // degenerate triangle: fall back to the three edges
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : {closest_point_segment(p, a, b), closest_point_segment(p, b, c),
                              closest_point_segment(p, c, a)}) {
            const double d2 = (p - q).squaredNorm();
            if (d2 < best) {
                best = d2;
                closest = q;
            }
        }
        return best;
    }

    const Eigen::Vector3d ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        closest = a;
        return (p - a).squaredNorm();
    }

    const Eigen::Vector3d bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        closest = b;
        return (p - b).squaredNorm();
    }

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        closest = a + v * ab;
        return (p - closest).squaredNorm();
    }

    const Eigen::Vector3d cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        closest = c;
        return (p - c).squaredNorm();
    }

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        closest = a + w * ac;
        return (p - closest).squaredNorm();
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        closest = b + w * (c - b);
        return (p - closest).squaredNorm();
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    closest = a + v * ab + w * ac;
    return (p - closest).squaredNorm();
}

TriangleBvh::TriangleBvh(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& triangles)
    : vertices_(vertices), triangles_(triangles) {
    if (triangles.rows() == 0) fail(ErrorKind::DegenerateGeometry, "mesh has no triangles");

    // Vertex normals with a zero-area guard: evaluation meshes may be open or
    // contain slivers, only interpolation quality degrades there.
    vertex_normals_ = Eigen::MatrixX3d::Zero(vertices.rows(), 3);
    for (int t = 0; t < triangles.rows(); ++t) {
        const Eigen::Vector3d a = vertices.row(triangles(t, 0));
        const Eigen::Vector3d b = vertices.row(triangles(t, 1));
        const Eigen::Vector3d c = vertices.row(triangles(t, 2));
        const Eigen::Vector3d cr = 0.5 * (b - a).cross(c - a);
        for (int j = 0; j < 3; ++j) vertex_normals_.row(triangles(t, j)) += cr.transpose();
    }
    for (int v = 0; v < vertex_normals_.rows(); ++v) {
        const double len = vertex_normals_.row(v).norm();
        if (len > 0.0) vertex_normals_.row(v) /= len;
    }

    leaf_triangles_.resize(triangles.rows());
    std::iota(leaf_triangles_.begin(), leaf_triangles_.end(), 0);
    nodes_.reserve(std::size_t(2) * triangles.rows());
    build(leaf_triangles_, 0, std::int32_t(leaf_triangles_.size()));
}

std::int32_t TriangleBvh::build(std::vector<std::int32_t>& ids, std::int32_t first,
                                std::int32_t count) {
    Node node;
    node.box_lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    node.box_hi = -node.box_lo;
    for (std::int32_t i = first; i < first + count; ++i)
        for (int j = 0; j < 3; ++j) {
            const Eigen::Vector3d v = vertices_.row(triangles_(ids[i], j));
            node.box_lo = node.box_lo.cwiseMin(v);
            node.box_hi = node.box_hi.cwiseMax(v);
        }

    const std::int32_t node_index = std::int32_t(nodes_.size());
    nodes_.push_back(node);

    constexpr std::int32_t kLeafSize = 4;
    if (count <= kLeafSize) {
        nodes_[node_index].first = first;
        nodes_[node_index].count = count;
        std::sort(ids.begin() + first, ids.begin() + first + count); // ascending ids per leaf
        return node_index;
    }

    auto centroid = [&](std::int32_t tri, int axis) {
        return (vertices_(triangles_(tri, 0), axis) + vertices_(triangles_(tri, 1), axis) +
                vertices_(triangles_(tri, 2), axis)) / 3.0;
    };
    const Eigen::Vector3d extent = nodes_[node_index].box_hi - nodes_[node_index].box_lo;
    int axis = 0;
    extent.maxCoeff(&axis);

    const std::int32_t mid = first + count / 2;
    std::nth_element(ids.begin() + first, ids.begin() + mid, ids.begin() + first + count,
                     [&](std::int32_t lhs, std::int32_t rhs) {
                         const double cl = centroid(lhs, axis), cr = centroid(rhs, axis);
                         return cl < cr || (cl == cr && lhs < rhs);
                     });

    const std::int32_t left = build(ids, first, mid - first);
    const std::int32_t right = build(ids, mid, first + count - mid);
    nodes_[node_index].left = left;
    nodes_[node_index].right = right;
    return node_index;
}

double TriangleBvh::box_distance2(const Node& node, const Eigen::Vector3d& q) const {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double lo = node.box_lo[a] - q[a];
        const double hi = q[a] - node.box_hi[a];
        const double d = std::max({lo, hi, 0.0});
        d2 += d * d;
    }
    return d2;
}

SurfaceHit TriangleBvh::nearest(const Eigen::Vector3d& query) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    std::int32_t best_tri = -1;
    Eigen::Vector3d best_point = Eigen::Vector3d::Zero();

    // Explicit stack; children visited nearer-first. Nodes are pruned only
    // when strictly farther than the current best so that exact-tie
    // candidates are still examined and the lowest triangle id wins, exactly
    // like an ascending brute-force scan.
    std::int32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (box_distance2(node, query) > best_d2) continue;
        if (node.left < 0) {
            for (std::int32_t i = node.first; i < node.first + node.count; ++i) {
                const std::int32_t tri = leaf_triangles_[i];
                Eigen::Vector3d closest;
                const double d2 = point_triangle_distance2(query, vertices_.row(triangles_(tri, 0)),
                                                           vertices_.row(triangles_(tri, 1)),
                                                           vertices_.row(triangles_(tri, 2)), closest);
                if (d2 < best_d2 || (d2 == best_d2 && tri < best_tri)) {
                    best_d2 = d2;
                    best_tri = tri;
                    best_point = closest;
                }
            }
            continue;
        }
        const double dl = box_distance2(nodes_[node.left], query);
        const double dr = box_distance2(nodes_[node.right], query);
        // push the farther child first
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.left;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }

    SurfaceHit hit;
    hit.distance = std::sqrt(best_d2);
    hit.point = best_point;
    hit.triangle = best_tri;

    // Interpolated vertex normal at the nearest point.
    const Eigen::Vector3d a = vertices_.row(triangles_(best_tri, 0));
    const Eigen::Vector3d b = vertices_.row(triangles_(best_tri, 1));
    const Eigen::Vector3d c = vertices_.row(triangles_(best_tri, 2));
    const Eigen::Vector3d v0 = b - a, v1 = c - a, v2 = best_point - a;
    const double d00 = v0.dot(v0), d01 = v0.dot(v1), d11 = v1.dot(v1);
    const double d20 = v2.dot(v0), d21 = v2.dot(v1);
    const double denom = d00 * d11 - d01 * d01;
    double bv = 0.0, bw = 0.0;
    if (denom > 0.0) {
        bv = std::clamp((d11 * d20 - d01 * d21) / denom, 0.0, 1.0);
        bw = std::clamp((d00 * d21 - d01 * d20) / denom, 0.0, 1.0);
    }
    Eigen::Vector3d n = (1.0 - bv - bw) * vertex_normals_.row(triangles_(best_tri, 0)).transpose() +
                        bv * vertex_normals_.row(triangles_(best_tri, 1)).transpose() +
                        bw * vertex_normals_.row(triangles_(best_tri, 2)).transpose();
    const double len = n.norm();
    hit.normal = len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::Zero();
    return hit;
}

SurfaceHit point_to_mesh_distance(const Eigen::Vector3d& point, const TriangleBvh& bvh) {
    return bvh.nearest(point);
}

RigidTransform rigid_align(const TriMesh& pred, const PointCloud& gt,
                           const std::vector<LandmarkPair>& landmarks, const IcpOptions& options) {
    if (landmarks.size() < 3)
        fail(ErrorKind::DegenerateLandmarks, "need >= 3 landmark pairs, got " +
                                                 std::to_string(landmarks.size()));

    Eigen::MatrixX3d src(landmarks.size(), 3), dst(landmarks.size(), 3);
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        const int v = landmarks[i].vertex_id;
        if (v < 0 || v >= pred.vertex_count())
            fail(ErrorKind::IndexOutOfRange, "landmark vertex id " + std::to_string(v) + " out of range");
        src.row(i) = pred.vertices.row(v);
        dst.row(i) = landmarks[i].point.transpose();
    }

    const Eigen::RowVector3d src_mean = src.colwise().mean();
    const Eigen::RowVector3d dst_mean = dst.colwise().mean();
    const Eigen::MatrixX3d src_c = src.rowwise() - src_mean;
    const Eigen::MatrixX3d dst_c = dst.rowwise() - dst_mean;

    // Collinear or coincident landmarks leave a rotation axis unconstrained.
    {
        Eigen::JacobiSVD<Eigen::MatrixX3d> spread(src_c);
        const double s0 = spread.singularValues()[0];
        const double s1 = spread.singularValues()[1];
        if (s0 <= 0.0 || s1 <= 1e-9 * s0)
            fail(ErrorKind::DegenerateLandmarks, "landmarks are collinear or coincident");
    }

    // Orthogonal Procrustes (no scale), reflection-safe.
    const Eigen::Matrix3d h = src_c.transpose() * dst_c;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    RigidTransform transform;
    transform.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    transform.translation = dst_mean.transpose() - transform.rotation * src_mean.transpose();

    // Trimmed point-to-plane ICP, GT points against the (static) mesh BVH.
    const TriangleBvh bvh(pred.vertices, pred.triangles);
    const double scale = bounding_box_diagonal(pred.vertices);
    const int keep = std::max(1, int(std::ceil(options.inlier_fraction * gt.size())));
    double prev_rmse = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const Eigen::Matrix3d rot_inv = transform.rotation.transpose();

        struct Match {
            double d2;
            SurfaceHit hit;
            int point;
        };
        std::vector<Match> matches(gt.size());
        for (int i = 0; i < gt.size(); ++i) {
            const Eigen::Vector3d q = rot_inv * (Eigen::Vector3d(gt.points.row(i)) - transform.translation);
            matches[i].hit = bvh.nearest(q);
            matches[i].d2 = matches[i].hit.distance * matches[i].hit.distance;
            matches[i].point = i;
        }
        std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
            return a.d2 < b.d2 || (a.d2 == b.d2 && a.point < b.point);
        });
        matches.resize(keep);

        double sum_d2 = 0.0;
        for (const auto& m : matches) sum_d2 += m.d2;
        const double rmse = std::sqrt(sum_d2 / keep);
        // already tight (e.g. exact landmarks): a further linearized step
        // would only add solver noise
        if (rmse < 1e-9 * scale) break;
        if (std::abs(prev_rmse - rmse) < options.relative_rmse_tolerance * std::max(prev_rmse, 1e-12))
            break;
        prev_rmse = rmse;

        // Linearized point-to-plane step in the GT frame.
        Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
        for (const auto& m : matches) {
            const Eigen::Vector3d p = transform.apply(m.hit.point);
            const Eigen::Vector3d n = transform.rotation * m.hit.normal;
            const Eigen::Vector3d g = gt.points.row(m.point);
            const double r = n.dot(p - g);
            Eigen::Matrix<double, 6, 1> a;
            a.head<3>() = p.cross(n);
            a.tail<3>() = n;
            ata += a * a.transpose();
            atb -= a * r;
        }
        const Eigen::Matrix<double, 6, 1> delta = ata.ldlt().solve(atb);
        RigidTransform step;
        step.rotation = axis_angle_to_matrix(delta.head<3>());
        step.translation = delta.tail<3>();
        transform = step.compose(transform);
    }
    return transform;
}

MetricsRecord compute_metrics(const TriMesh& pred, const PointCloud& gt,
                              const std::vector<int>& keep_labels, double recall_threshold_mm) {
    std::vector<int> kept;
    kept.reserve(gt.size());
    for (int i = 0; i < gt.size(); ++i) {
        if (!keep_labels.empty()) {
            if (!gt.has_labels()) fail(ErrorKind::DimensionMismatch, "point cloud has no labels to mask by");
            if (std::find(keep_labels.begin(), keep_labels.end(), gt.labels[i]) == keep_labels.end())
                continue;
        }
        kept.push_back(i);
    }
    if (kept.empty()) fail(ErrorKind::EmptyAfterMasking, "no GT points left after region masking");

    const TriangleBvh bvh(pred.vertices, pred.triangles);

    std::vector<double> distances(kept.size());
    std::vector<double> cosines(kept.size());
    parallel_for(0, std::int64_t(kept.size()), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const int p = kept[i];
            const SurfaceHit hit = bvh.nearest(gt.points.row(p));
            distances[i] = hit.distance;
            cosines[i] = hit.normal.dot(gt.normals.row(p));
        }
    });

    MetricsRecord rec;
    double sum = 0.0, sum2 = 0.0, sum_cos = 0.0;
    int within = 0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        sum += distances[i];
        sum2 += distances[i] * distances[i];
        sum_cos += cosines[i];
        if (distances[i] <= recall_threshold_mm) ++within;
    }
    const double n = double(kept.size());
    rec.l1_mm = sum / n;
    rec.l2_mm = std::sqrt(sum2 / n);
    rec.nc = sum_cos / n;
    rec.recall_2_5 = within / n;
    return rec;
}

} // namespace facefit
