#pragma once

#include <string>

#include "ulu/graph.hpp"

namespace ulu {

// Flat binary parameter snapshot:
//   magic "ULUK", version u32,
//   tensor count u32, then per tensor:
//     name length u32, name bytes, rank u32, dims u32 each,
//     data as little-endian 64-bit floats,
//   adaptive count u32, then (beta1, beta2) pairs.
// All integers little-endian.
void save_params(const ParamStore& store, const std::string& path);
ParamStore load_params(const std::string& path);

}  // namespace ulu
