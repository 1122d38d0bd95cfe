#include "facefit/image.hpp"

#include "facefit/common.hpp"

namespace facefit {

MapImage MapImage::zeros(int width, int height, int channels, bool all_valid) {
    MapImage img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.data.assign(std::size_t(width) * height * channels, 0.0f);
    img.valid.assign(std::size_t(width) * height, all_valid ? 1 : 0);
    return img;
}

MapImage MapImage::first_two_channels() const {
    if (channels < 2) fail(ErrorKind::DimensionMismatch, "first_two_channels needs >= 2 channels");
    MapImage out = zeros(width, height, 2);
    out.valid = valid;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            out.at(y, x, 0) = at(y, x, 0);
            out.at(y, x, 1) = at(y, x, 1);
        }
    return out;
}

} // namespace facefit
