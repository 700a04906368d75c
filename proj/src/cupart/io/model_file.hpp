#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cupart/nn/tensor.hpp"

namespace cupart::io {

// "ETHM" model container: magic, u16 version, u8 kind, u32 tensor_count,
// then per tensor: u16 name length, name bytes, u8 rank, u32 dims[rank],
// f32 little-endian payload.
inline constexpr uint16_t kModelVersion = 1;
inline constexpr uint8_t kModelKindCnn = 0;
inline constexpr uint8_t kModelKindLstm = 1;

struct NamedTensor {
    std::string name;
    nn::Tensor tensor;
};

void ethm_write(const std::string& path, uint8_t kind, const std::vector<NamedTensor>& tensors);

struct ModelFile {
    uint8_t kind = 0;
    std::vector<NamedTensor> tensors;

    const nn::Tensor& find(const std::string& name) const;
};

ModelFile ethm_read(const std::string& path);

} // namespace cupart::io
