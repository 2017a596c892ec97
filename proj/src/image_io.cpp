#include "swat/image_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "swat/error.hpp"

namespace swat {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
                       const std::string& origin) {
    const std::size_t n = bytes.size();
    while (pos < n) {
        const char c = static_cast<char>(bytes[pos]);
        if (c == '#') {
            while (pos < n && bytes[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= n) throw IoError("truncated header: " + origin);
    std::string tok;
    while (pos < n) {
        const char c = static_cast<char>(bytes[pos]);
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
        tok.push_back(c);
        ++pos;
    }
    return tok;
}

int parse_header_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
                     const std::string& origin) {
    const std::string tok = next_token(bytes, pos, origin);
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(tok, &used);
    } catch (const std::exception&) {
        throw IoError("bad header number '" + tok + "': " + origin);
    }
    if (used != tok.size() || value <= 0) {
        throw IoError("bad header number '" + tok + "': " + origin);
    }
    return value;
}

}  // namespace

ImageU8 parse_netpbm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    std::size_t pos = 0;
    const std::string magic = next_token(bytes, pos, origin);
    int channels = 0;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw IoError("not a binary PGM/PPM (magic '" + magic + "'): " + origin);
    }
    ImageU8 img;
    img.channels = channels;
    img.width = parse_header_int(bytes, pos, origin);
    img.height = parse_header_int(bytes, pos, origin);
    img.maxval = parse_header_int(bytes, pos, origin);
    if (img.maxval > 255) throw IoError("only 8-bit rasters are supported: " + origin);
    if (pos >= bytes.size()) throw IoError("truncated header: " + origin);
    const char sep = static_cast<char>(bytes[pos]);
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
        throw IoError("missing raster separator: " + origin);
    }
    ++pos;

    const std::size_t want = static_cast<std::size_t>(img.width) *
                             static_cast<std::size_t>(img.height) *
                             static_cast<std::size_t>(channels);
    if (bytes.size() - pos < want) throw IoError("truncated raster: " + origin);
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + want));
    return img;
}

ImageU8 read_netpbm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_netpbm(bytes, path);
}

void write_pgm(const std::string& path, const ImageU8& img) {
    if (img.channels != 1) throw ContractError("write_pgm wants a single-channel image");
    const std::size_t want =
        static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    if (img.width <= 0 || img.height <= 0 || img.pixels.size() != want) {
        throw ContractError("write_pgm: raster size does not match dimensions");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("write failed: " + path);
}

Tensor image_to_tensor(const ImageU8& img, int channels) {
    if (channels != img.channels && !(img.channels == 1 && channels == 3)) {
        throw ContractError("cannot widen a " + std::to_string(img.channels) +
                            "-channel image to " + std::to_string(channels) + " channels");
    }
    const int64_t h = img.height;
    const int64_t w = img.width;
    const double inv = 1.0 / static_cast<double>(img.maxval);
    std::vector<double> data(static_cast<std::size_t>(channels) * h * w);
    for (int c = 0; c < channels; ++c) {
        const int src_c = img.channels == 1 ? 0 : c;
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                const std::size_t si =
                    (static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) *
                        img.channels +
                    static_cast<std::size_t>(src_c);
                data[(static_cast<std::size_t>(c) * h + static_cast<std::size_t>(y)) * w +
                     static_cast<std::size_t>(x)] = img.pixels[si] * inv;
            }
        }
    }
    return Tensor::from_data({1, channels, h, w}, std::move(data));
}

ImageU8 gray_map_to_u8(const Tensor& map) {
    if (map.dim() != 2) throw ShapeError("gray_map_to_u8 wants a rank-2 map");
    const auto& v = map.values();
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    ImageU8 img;
    img.height = static_cast<int>(map.extent(0));
    img.width = static_cast<int>(map.extent(1));
    img.channels = 1;
    img.pixels.resize(v.size());
    const double range = hi - lo;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = range > 0.0 ? (v[i] - lo) / range : 0.0;
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(t * 255.0));
    }
    return img;
}

}  // namespace swat
