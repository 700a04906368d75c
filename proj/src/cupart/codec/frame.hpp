#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cupart/errors.hpp"

namespace cupart::codec {

inline constexpr int kCtuEdge = 64;

// One luma plane, 8-bit, row-major. Residue frames reuse the same container
// in offset-128 representation.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> luma;

    Frame() = default;
    Frame(int w, int h) : width(w), height(h), luma(size_t(w) * h, 0) {
        if (w <= 0 || h <= 0 || w % kCtuEdge != 0 || h % kCtuEdge != 0)
            throw geometry_error("frame dimensions must be positive multiples of 64");
    }

    int ctu_cols() const { return width / kCtuEdge; }
    int ctu_rows() const { return height / kCtuEdge; }
    int ctu_count() const { return ctu_cols() * ctu_rows(); }

    uint8_t at(int x, int y) const { return luma[size_t(y) * width + x]; }
    uint8_t& at(int x, int y) { return luma[size_t(y) * width + x]; }

    // Copies the 64x64 block of the given CTU (raster CTU indexing).
    std::vector<uint8_t> ctu_block(int ctu_index) const;
};

// "CPHY" raw container: magic, u32 width, u32 height, u32 frame_count
// (little-endian), then the planes.
void cphy_write(const std::string& path, const std::vector<Frame>& frames);
std::vector<Frame> cphy_read(const std::string& path);

} // namespace cupart::codec
