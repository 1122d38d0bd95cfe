#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "facefit/image.hpp"
#include "facefit/model.hpp"

namespace facefit {

/// Uniform grid over [0,1]^2 uv space holding (pixel, uv) entries for every
/// pixel valid in both the uv map and the mask. Queries return the exact
/// global nearest neighbor (ring expansion continues until no unexplored
/// cell can beat the current best), with ties broken by the smallest
/// row-major pixel index -- identical to an exhaustive scan.
class UvIndex {
public:
    struct Entry {
        float u, v;
        std::int32_t pixel_x, pixel_y;
        std::int32_t row_major; // tie-break key
    };

    struct QueryResult {
        Eigen::Vector2d pixel;    // pixel center (x + 0.5, y + 0.5)
        double uv_distance;
        std::int32_t row_major;
    };

    QueryResult nearest(const Eigen::Vector2d& uv) const;

    int cell_resolution() const { return resolution_; }
    std::size_t entry_count() const { return total_entries_; }
    int image_width() const { return width_; }
    int image_height() const { return height_; }

private:
    friend UvIndex build_uv_index(const MapImage&, const MapImage&);

    int resolution_ = 0;
    int width_ = 0;
    int height_ = 0;
    std::size_t total_entries_ = 0;
    std::vector<std::vector<Entry>> cells_; // resolution^2, row-major over (v,u)
};

/// Builds the index over pixels valid in both maps. Throws DimensionMismatch
/// on shape/channel mismatch and EmptyMask when no pixel survives.
UvIndex build_uv_index(const MapImage& uv_map, const MapImage& mask);

/// Per-vertex pixel targets extracted from the uv map (nearest uv match).
struct CorrespondenceSet {
    Eigen::MatrixX2d target_pixels; // N x 2, pixel centers
    Eigen::VectorXd uv_distances;   // N
    std::vector<std::uint8_t> accepted; // uv_distance < delta_uv

    int size() const { return static_cast<int>(target_pixels.rows()); }
    int accepted_count() const;
};

/// Nearest-uv lookup for every model vertex; accepted iff the uv distance is
/// strictly below delta_uv.
CorrespondenceSet find_correspondences(const MorphableModel& model, const UvIndex& index,
                                       double delta_uv);

} // namespace facefit
