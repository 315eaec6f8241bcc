#pragma once

#include <string>

#include "occ/nn/model.hpp"

namespace occ::nn {

// Weight file, little-endian: magic "DC2W", format version u32, tensor count
// u32, then per tensor: rank u32, dims u32[], raw f32 payload. Round trips
// bit-exactly.
void save_weights(const ModelWeights& model, const std::string& path);
ModelWeights load_weights(const std::string& path);

}  // namespace occ::nn
