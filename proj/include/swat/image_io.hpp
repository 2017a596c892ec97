#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swat/tensor.hpp"

namespace swat {

// 8-bit interleaved raster, row-major. channels is 1 (gray) or 3 (rgb).
struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;
    int maxval = 255;
    std::vector<std::uint8_t> pixels;
};

// Binary netpbm readers: P5 -> 1 channel, P6 -> 3 channels. Header comments
// are honored; maxval must fit in one byte. Anything else is an IoError.
ImageU8 read_netpbm(const std::string& path);
ImageU8 parse_netpbm(const std::vector<std::uint8_t>& bytes, const std::string& origin);

// P5 writer, maxval 255. The image must be single-channel.
void write_pgm(const std::string& path, const ImageU8& img);

// (1, channels, H, W) tensor scaled to [0,1]. A gray image replicates its
// plane when three channels are requested; collapsing color to gray is not
// this function's job and throws.
Tensor image_to_tensor(const ImageU8& img, int channels);

// Rank-2 map -> min-max normalized 8-bit grayscale. A constant map comes out
// all zeros rather than dividing by the empty range.
ImageU8 gray_map_to_u8(const Tensor& map);

}  // namespace swat
