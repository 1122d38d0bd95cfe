#pragma once

#include <vector>

#include <Eigen/Dense>

#include "facefit/camera.hpp"
#include "facefit/image.hpp"
#include "facefit/model.hpp"

namespace facefit {

/// Per-pixel rasterization output. `barycentric` stores perspective-correct
/// weights: dotting them with per-vertex attributes (or depths) of the
/// covering triangle interpolates the attribute at the pixel center.
struct FragmentBuffer {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> triangle_id; // -1 = background
    std::vector<double> barycentric;       // h*w*3, weights in [0,1], sum 1 on covered pixels
    std::vector<double> depth;             // h*w, +inf on background

    std::int32_t tri_at(int y, int x) const { return triangle_id[std::size_t(y) * width + x]; }
    double depth_at(int y, int x) const { return depth[std::size_t(y) * width + x]; }
    Eigen::Vector3d bary_at(int y, int x) const {
        const std::size_t i = (std::size_t(y) * width + x) * 3;
        return {barycentric[i], barycentric[i + 1], barycentric[i + 2]};
    }
    bool covered(int y, int x) const { return tri_at(y, x) >= 0; }
};

/// Z-buffered perspective-correct rasterization with the top-left fill rule.
/// Back-facing triangles (screen-space signed area >= 0 under the y-down
/// pixel convention) are discarded. Depth ties resolve to the lower
/// triangle id. Deterministic across runs and thread counts.
FragmentBuffer rasterize(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& triangles,
                         const CameraParams& cam, int width, int height, int threads = 0);

struct RenderedMaps {
    MapImage normal_map; // camera-space unit normals, 3 channels
    MapImage uv_map;     // 2 channels
    MapImage depth_map;  // 1 channel, +inf where invalid
};

/// Rasterizes the posed model and interpolates camera-space vertex normals
/// (renormalized per pixel) and vertex uv coordinates. Covered pixels are
/// valid. Doubles as the synthetic ground-truth generator for tests.
RenderedMaps render_maps(const MorphableModel& model, const FaceParams& params,
                         const CameraParams& cam, int width, int height, int threads = 0);

/// A vertex is visible iff it projects inside the image with positive depth,
/// its interpolated normal faces the camera, and its depth is within
/// `depth_epsilon` plus the local 3x3 depth spread of the z-buffer value at
/// its pixel (the spread term tracks surface slope, which dwarfs any fixed
/// epsilon on grazing surfaces). Pass depth_epsilon <= 0 to use a floor of
/// 1e-4 * bounding-box diagonal.
std::vector<std::uint8_t> visible_vertices(const Eigen::MatrixX3d& vertices,
                                           const Eigen::MatrixX3i& triangles,
                                           const CameraParams& cam, const FragmentBuffer& fragbuf,
                                           double depth_epsilon = -1.0);

} // namespace facefit
