#pragma once

#include <cstdint>
#include <vector>

namespace facefit {

/// H x W x C float32 image with a per-pixel validity mask. Row 0 is the top
/// image row; data is row-major, channels interleaved.
struct MapImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;          // height * width * channels
    std::vector<std::uint8_t> valid;  // height * width

    static MapImage zeros(int width, int height, int channels, bool all_valid = false);

    float& at(int y, int x, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
    float at(int y, int x, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }
    bool is_valid(int y, int x) const { return valid[std::size_t(y) * width + x] != 0; }
    void set_valid(int y, int x, bool v) { valid[std::size_t(y) * width + x] = v ? 1 : 0; }
    std::size_t pixel_count() const { return std::size_t(width) * height; }
    bool same_size(const MapImage& other) const {
        return width == other.width && height == other.height;
    }

    /// Copy of the first two channels (used to view a 3-channel uv file as
    /// the 2-channel uv map the index builder expects).
    MapImage first_two_channels() const;
};

} // namespace facefit
