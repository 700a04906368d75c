#include "cupart/codec/frame.hpp"

#include <cstring>
#include <fstream>

namespace cupart::codec {

std::vector<uint8_t> Frame::ctu_block(int ctu_index) const {
    if (ctu_index < 0 || ctu_index >= ctu_count())
        throw geometry_error("ctu index out of range");
    const int cx = (ctu_index % ctu_cols()) * kCtuEdge;
    const int cy = (ctu_index / ctu_cols()) * kCtuEdge;
    std::vector<uint8_t> block(size_t(kCtuEdge) * kCtuEdge);
    for (int y = 0; y < kCtuEdge; ++y)
        std::memcpy(block.data() + size_t(y) * kCtuEdge,
                    luma.data() + size_t(cy + y) * width + cx, kCtuEdge);
    return block;
}

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    const uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    uint8_t b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

} // namespace

void cphy_write(const std::string& path, const std::vector<Frame>& frames) {
    if (frames.empty()) throw data_error("cphy_write: no frames");
    const int w = frames[0].width, h = frames[0].height;
    for (const Frame& f : frames)
        if (f.width != w || f.height != h)
            throw data_error("cphy_write: frames disagree on dimensions");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cphy_write: cannot open " + path);
    os.write("CPHY", 4);
    put_u32(os, uint32_t(w));
    put_u32(os, uint32_t(h));
    put_u32(os, uint32_t(frames.size()));
    for (const Frame& f : frames)
        os.write(reinterpret_cast<const char*>(f.luma.data()),
                 std::streamsize(f.luma.size()));
    if (!os) throw data_error("cphy_write: write failed for " + path);
}

std::vector<Frame> cphy_read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cphy_read: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CPHY", 4) != 0)
        throw data_error("cphy_read: bad magic in " + path);
    const uint32_t w = get_u32(is), h = get_u32(is), n = get_u32(is);
    if (!is || w == 0 || h == 0 || w % kCtuEdge || h % kCtuEdge || n == 0)
        throw data_error("cphy_read: bad header in " + path);
    std::vector<Frame> frames;
    frames.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        Frame f{int(w), int(h)};
        is.read(reinterpret_cast<char*>(f.luma.data()), std::streamsize(f.luma.size()));
        if (!is) throw data_error("cphy_read: truncated plane in " + path);
        frames.push_back(std::move(f));
    }
    return frames;
}

} // namespace cupart::codec
