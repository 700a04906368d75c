#include "cupart/io/model_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cupart/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "model container i/o assumes a little-endian host");

namespace cupart::io {

namespace {

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

} // namespace

void ethm_write(const std::string& path, uint8_t kind, const std::vector<NamedTensor>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("ethm_write: cannot open " + path);
    os.write("ETHM", 4);
    put<uint16_t>(os, kModelVersion);
    put<uint8_t>(os, kind);
    put<uint32_t>(os, uint32_t(tensors.size()));
    for (const NamedTensor& nt : tensors) {
        if (nt.name.size() > 0xffff) throw data_error("ethm_write: tensor name too long");
        put<uint16_t>(os, uint16_t(nt.name.size()));
        os.write(nt.name.data(), std::streamsize(nt.name.size()));
        put<uint8_t>(os, uint8_t(nt.tensor.dims.size()));
        for (int d : nt.tensor.dims) put<uint32_t>(os, uint32_t(d));
        os.write(reinterpret_cast<const char*>(nt.tensor.ptr()),
                 std::streamsize(nt.tensor.size() * sizeof(float)));
    }
    if (!os) throw data_error("ethm_write: write failed for " + path);
}

ModelFile ethm_read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("ethm_read: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "ETHM", 4) != 0)
        throw data_error("ethm_read: bad magic in " + path);
    if (get<uint16_t>(is) != kModelVersion)
        throw data_error("ethm_read: unsupported version in " + path);
    ModelFile mf;
    mf.kind = get<uint8_t>(is);
    const uint32_t count = get<uint32_t>(is);
    for (uint32_t i = 0; i < count && is; ++i) {
        NamedTensor nt;
        const uint16_t name_len = get<uint16_t>(is);
        nt.name.resize(name_len);
        is.read(nt.name.data(), name_len);
        const uint8_t rank = get<uint8_t>(is);
        std::vector<int> dims(rank);
        for (auto& d : dims) d = int(get<uint32_t>(is));
        nt.tensor = nn::Tensor(dims);
        is.read(reinterpret_cast<char*>(nt.tensor.ptr()),
                std::streamsize(nt.tensor.size() * sizeof(float)));
        mf.tensors.push_back(std::move(nt));
    }
    if (!is) throw data_error("ethm_read: truncated file " + path);
    return mf;
}

const nn::Tensor& ModelFile::find(const std::string& name) const {
    for (const NamedTensor& nt : tensors)
        if (nt.name == name) return nt.tensor;
    throw data_error("model tensor not found: " + name);
}

} // namespace cupart::io
