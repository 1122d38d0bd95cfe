#include "facefit/correspond.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "facefit/common.hpp"

namespace facefit {

UvIndex build_uv_index(const MapImage& uv_map, const MapImage& mask) {
    if (uv_map.channels != 2)
        fail(ErrorKind::DimensionMismatch,
             "uv map has " + std::to_string(uv_map.channels) + " channels, expected 2");
    if (!uv_map.same_size(mask))
        fail(ErrorKind::DimensionMismatch, "uv map and mask dimensions differ");

    std::size_t valid_count = 0;
    for (int y = 0; y < uv_map.height; ++y)
        for (int x = 0; x < uv_map.width; ++x)
            if (uv_map.is_valid(y, x) && mask.is_valid(y, x)) ++valid_count;
    if (valid_count == 0) fail(ErrorKind::EmptyMask, "no pixel is valid in both uv map and mask");

    UvIndex index;
    index.width_ = uv_map.width;
    index.height_ = uv_map.height;
    index.total_entries_ = valid_count;
    index.resolution_ = std::max(1, int(std::ceil(std::sqrt(double(valid_count)) / 4.0)));
    index.cells_.assign(std::size_t(index.resolution_) * index.resolution_, {});

    const int res = index.resolution_;
    auto cell_of = [res](float coord) {
        return std::clamp(int(coord * res), 0, res - 1);
    };
    // Row-major insertion keeps each cell's entries sorted by the tie-break key.
    for (int y = 0; y < uv_map.height; ++y)
        for (int x = 0; x < uv_map.width; ++x) {
            if (!(uv_map.is_valid(y, x) && mask.is_valid(y, x))) continue;
            UvIndex::Entry e;
            e.u = uv_map.at(y, x, 0);
            e.v = uv_map.at(y, x, 1);
            e.pixel_x = x;
            e.pixel_y = y;
            e.row_major = y * uv_map.width + x;
            index.cells_[std::size_t(cell_of(e.v)) * res + cell_of(e.u)].push_back(e);
        }
    return index;
}

UvIndex::QueryResult UvIndex::nearest(const Eigen::Vector2d& uv) const {
    const int res = resolution_;
    const double cell_size = 1.0 / res;
    const int cu = std::clamp(int(uv.x() * res), 0, res - 1);
    const int cv = std::clamp(int(uv.y() * res), 0, res - 1);

    double best_d2 = std::numeric_limits<double>::infinity();
    const Entry* best = nullptr;

    auto scan_cell = [&](int u, int v) {
        for (const Entry& e : cells_[std::size_t(v) * res + u]) {
            const double du = uv.x() - e.u;
            const double dv = uv.y() - e.v;
            const double d2 = du * du + dv * dv;
            if (d2 < best_d2 || (d2 == best_d2 && best && e.row_major < best->row_major)) {
                best_d2 = d2;
                best = &e;
            }
        }
    };

    for (int ring = 0; ring < 2 * res; ++ring) {
        const int u_lo = cu - ring, u_hi = cu + ring;
        const int v_lo = cv - ring, v_hi = cv + ring;
        if (ring == 0) {
            scan_cell(cu, cv);
        } else {
            for (int u = std::max(0, u_lo); u <= std::min(res - 1, u_hi); ++u) {
                if (v_lo >= 0) scan_cell(u, v_lo);
                if (v_hi < res) scan_cell(u, v_hi);
            }
            for (int v = std::max(0, v_lo + 1); v <= std::min(res - 1, v_hi - 1); ++v) {
                if (u_lo >= 0) scan_cell(u_lo, v);
                if (u_hi < res) scan_cell(u_hi, v);
            }
        }

        if (best) {
            // Everything outside the scanned box is at least this far away;
            // on exact equality keep expanding so boundary ties resolve by
            // pixel index exactly as an exhaustive scan would.
            const double box_margin = std::min(
                std::min(uv.x() - u_lo * cell_size, (u_hi + 1) * cell_size - uv.x()),
                std::min(uv.y() - v_lo * cell_size, (v_hi + 1) * cell_size - uv.y()));
            if (box_margin > 0.0 && box_margin * box_margin > best_d2) break;
        }
        if (u_lo <= 0 && v_lo <= 0 && u_hi >= res - 1 && v_hi >= res - 1) break;
    }

    QueryResult result;
    result.pixel = Eigen::Vector2d(best->pixel_x + 0.5, best->pixel_y + 0.5);
    result.uv_distance = std::sqrt(best_d2);
    result.row_major = best->row_major;
    return result;
}

int CorrespondenceSet::accepted_count() const {
    int n = 0;
    for (auto a : accepted) n += a != 0;
    return n;
}

CorrespondenceSet find_correspondences(const MorphableModel& model, const UvIndex& index,
                                       double delta_uv) {
    if (index.entry_count() == 0) fail(ErrorKind::EmptyMask, "uv index is empty");
    const int n = model.vertex_count();
    CorrespondenceSet set;
    set.target_pixels.resize(n, 2);
    set.uv_distances.resize(n);
    set.accepted.assign(n, 0);
    for (int v = 0; v < n; ++v) {
        const auto hit = index.nearest(model.vertex_uv.row(v).transpose());
        set.target_pixels.row(v) = hit.pixel.transpose();
        set.uv_distances[v] = hit.uv_distance;
        set.accepted[v] = hit.uv_distance < delta_uv ? 1 : 0;
    }
    return set;
}

} // namespace facefit
