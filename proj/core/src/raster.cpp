#include "facefit/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "facefit/common.hpp"
#include "facefit/geometry.hpp"

namespace facefit {

namespace {

constexpr double kMinDepth = 1e-6; // triangles touching z <= this are skipped (no near-plane clipping)

struct ScreenVertex {
    double x, y, z;
};

inline double edge_cross(double ax, double ay, double bx, double by) {
    return ax * by - ay * bx;
}

// Top-left fill rule for the "edge function >= 0 inside" orientation:
// pixels exactly on an edge belong to the triangle iff the edge is a top
// edge (horizontal, interior below) or a left edge.
inline bool edge_is_top_left(double dx, double dy) {
    return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

void raster_rows(const Eigen::MatrixX2d& pix, const Eigen::VectorXd& depths,
                 const Eigen::MatrixX3i& triangles, int width, int row_begin, int row_end,
                 FragmentBuffer& out) {
    const int tri_count = static_cast<int>(triangles.rows());
    for (int t = 0; t < tri_count; ++t) {
        int i0 = triangles(t, 0), i1 = triangles(t, 1), i2 = triangles(t, 2);
        if (depths[i0] <= kMinDepth || depths[i1] <= kMinDepth || depths[i2] <= kMinDepth) continue;

        // Front faces have negative screen-space signed area (y-down pixels);
        // swap two vertices so the edge functions are >= 0 inside.
        const double raw_area = edge_cross(pix(i1, 0) - pix(i0, 0), pix(i1, 1) - pix(i0, 1),
                                           pix(i2, 0) - pix(i0, 0), pix(i2, 1) - pix(i0, 1));
        if (raw_area >= 0.0) continue; // back-facing or degenerate
        std::swap(i1, i2);

        const double x0 = pix(i0, 0), y0 = pix(i0, 1);
        const double x1 = pix(i1, 0), y1 = pix(i1, 1);
        const double x2 = pix(i2, 0), y2 = pix(i2, 1);
        const double area2 = -raw_area;

        const int px_lo = std::max(0, int(std::ceil(std::min({x0, x1, x2}) - 0.5)));
        const int px_hi = std::min(width - 1, int(std::floor(std::max({x0, x1, x2}) - 0.5)));
        const int py_lo = std::max(row_begin, int(std::ceil(std::min({y0, y1, y2}) - 0.5)));
        const int py_hi = std::min(row_end - 1, int(std::floor(std::max({y0, y1, y2}) - 0.5)));
        if (px_lo > px_hi || py_lo > py_hi) continue;

        const bool tl0 = edge_is_top_left(x2 - x1, y2 - y1); // edge opposite vertex 0
        const bool tl1 = edge_is_top_left(x0 - x2, y0 - y2);
        const bool tl2 = edge_is_top_left(x1 - x0, y1 - y0);

        const double inv_z0 = 1.0 / depths[i0];
        const double inv_z1 = 1.0 / depths[i1];
        const double inv_z2 = 1.0 / depths[i2];

        for (int py = py_lo; py <= py_hi; ++py) {
            const double qy = py + 0.5;
            for (int px = px_lo; px <= px_hi; ++px) {
                const double qx = px + 0.5;
                const double e0 = edge_cross(x2 - x1, y2 - y1, qx - x1, qy - y1);
                const double e1 = edge_cross(x0 - x2, y0 - y2, qx - x2, qy - y2);
                const double e2 = edge_cross(x1 - x0, y1 - y0, qx - x0, qy - y0);
                if (e0 < 0.0 || (e0 == 0.0 && !tl0)) continue;
                if (e1 < 0.0 || (e1 == 0.0 && !tl1)) continue;
                if (e2 < 0.0 || (e2 == 0.0 && !tl2)) continue;

                const double w0 = e0 / area2;
                const double w1 = e1 / area2;
                const double w2 = e2 / area2;

                // Perspective-correct weights; dotting with vertex depths
                // reproduces the interpolated depth below.
                const double s = w0 * inv_z0 + w1 * inv_z1 + w2 * inv_z2;
                const double b0 = w0 * inv_z0 / s;
                const double b1 = w1 * inv_z1 / s;
                const double b2 = w2 * inv_z2 / s;
                const double z = 1.0 / s;

                const std::size_t idx = std::size_t(py) * width + px;
                if (z < out.depth[idx]) { // tie keeps the earlier (lower) triangle id
                    out.depth[idx] = z;
                    out.triangle_id[idx] = t;
                    // weights back in the original vertex order (i1/i2 swapped)
                    out.barycentric[idx * 3 + 0] = b0;
                    out.barycentric[idx * 3 + 1] = b2;
                    out.barycentric[idx * 3 + 2] = b1;
                }
            }
        }
    }
}

} // namespace

FragmentBuffer rasterize(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& triangles,
                         const CameraParams& cam, int width, int height, int threads) {
    if (width <= 0 || height <= 0)
        fail(ErrorKind::DimensionMismatch, "rasterize needs positive image dimensions");

    FragmentBuffer out;
    out.width = width;
    out.height = height;
    out.triangle_id.assign(std::size_t(width) * height, -1);
    out.barycentric.assign(std::size_t(width) * height * 3, 0.0);
    out.depth.assign(std::size_t(width) * height, std::numeric_limits<double>::infinity());

    const ProjectionResult proj = project(vertices, cam);

    // Each band owns a contiguous row range; every band scans all triangles
    // in ascending id order, so the result is independent of the banding.
    parallel_for(0, height,
                 [&](std::int64_t lo, std::int64_t hi) {
                     raster_rows(proj.pixels, proj.depths, triangles, width, int(lo), int(hi), out);
                 },
                 threads);
    return out;
}

RenderedMaps render_maps(const MorphableModel& model, const FaceParams& params,
                         const CameraParams& cam, int width, int height, int threads) {
    const Eigen::MatrixX3d verts = model_forward(model, params);
    const FragmentBuffer frag = rasterize(verts, model.triangles, cam, width, height, threads);

    const Eigen::MatrixX3d normals_world = vertex_normals(verts, model.triangles);
    const Eigen::Matrix3d rot = cam.rotation_matrix();
    const Eigen::MatrixX3d normals_cam = normals_world * rot.transpose();

    RenderedMaps maps;
    maps.normal_map = MapImage::zeros(width, height, 3);
    maps.uv_map = MapImage::zeros(width, height, 2);
    maps.depth_map = MapImage::zeros(width, height, 1);
    for (float& d : maps.depth_map.data) d = std::numeric_limits<float>::infinity();

    parallel_for(0, height,
                 [&](std::int64_t lo, std::int64_t hi) {
                     for (int y = int(lo); y < int(hi); ++y)
                         for (int x = 0; x < width; ++x) {
                             const std::int32_t t = frag.tri_at(y, x);
                             if (t < 0) continue;
                             const Eigen::Vector3d b = frag.bary_at(y, x);
                             Eigen::Vector3d n = Eigen::Vector3d::Zero();
                             Eigen::Vector2d uv = Eigen::Vector2d::Zero();
                             for (int j = 0; j < 3; ++j) {
                                 const int v = model.triangles(t, j);
                                 n += b[j] * normals_cam.row(v).transpose();
                                 uv += b[j] * model.vertex_uv.row(v).transpose();
                             }
                             n.normalize();
                             for (int c = 0; c < 3; ++c) maps.normal_map.at(y, x, c) = float(n[c]);
                             maps.uv_map.at(y, x, 0) = float(uv[0]);
                             maps.uv_map.at(y, x, 1) = float(uv[1]);
                             maps.depth_map.at(y, x, 0) = float(frag.depth_at(y, x));
                             maps.normal_map.set_valid(y, x, true);
                             maps.uv_map.set_valid(y, x, true);
                             maps.depth_map.set_valid(y, x, true);
                         }
                 },
                 threads);
    return maps;
}

std::vector<std::uint8_t> visible_vertices(const Eigen::MatrixX3d& vertices,
                                           const Eigen::MatrixX3i& triangles,
                                           const CameraParams& cam, const FragmentBuffer& fragbuf,
                                           double depth_epsilon) {
    if (depth_epsilon <= 0.0) depth_epsilon = 1e-4 * bounding_box_diagonal(vertices);

    const ProjectionResult proj = project(vertices, cam);
    const Eigen::MatrixX3d normal_sums = vertex_normal_sums(vertices, triangles);
    const Eigen::Vector3d cam_center =
        -(cam.rotation_matrix().transpose() * cam.translation);

    const int n = static_cast<int>(vertices.rows());
    std::vector<std::uint8_t> visible(n, 0);
    for (int v = 0; v < n; ++v) {
        if (proj.depths[v] <= 0.0) continue;
        const int px = int(std::floor(proj.pixels(v, 0)));
        const int py = int(std::floor(proj.pixels(v, 1)));
        if (px < 0 || py < 0 || px >= fragbuf.width || py >= fragbuf.height) continue;

        // Back-facing vertices make unusable observations. The threshold sits
        // slightly past perpendicular because a polyhedron's visible
        // silhouette extends roughly half an edge beyond the smooth-normal
        // rim (vertices are the extreme points of the hull).
        const Eigen::Vector3d to_vertex =
            (Eigen::Vector3d(vertices.row(v)) - cam_center).normalized();
        const double facing = normal_sums.row(v).normalized().dot(to_vertex);
        if (facing >= 0.10) continue;

        // The depth buffer samples the surface at the pixel center while the
        // vertex sits up to half a pixel away; on slanted surfaces that alone
        // exceeds any fixed epsilon. Widen the tolerance by the local depth
        // spread so the test follows the surface slope.
        const double local = fragbuf.depth_at(py, px);
        double spread = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = px + dx, ny = py + dy;
                if (nx < 0 || ny < 0 || nx >= fragbuf.width || ny >= fragbuf.height) continue;
                const double d = fragbuf.depth_at(ny, nx);
                if (!std::isfinite(d)) continue;
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
        if (std::isfinite(lo)) spread = hi - lo;
        if (proj.depths[v] <= local + depth_epsilon + spread) visible[v] = 1;
    }
    return visible;
}

} // namespace facefit
