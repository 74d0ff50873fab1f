#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cclab/model.hpp"

namespace cclab {

inline constexpr std::uint16_t kModelFormatVersion = 1;

/// CCMDL1 container, all integers and floats little-endian:
///   "CCMDL1"  u16 version
///   u32 name length, name bytes
///   u32 3, u32 c, u32 h, u32 w          input shape
///   u8 init scheme, u64 seed
///   u32 layer count, then per layer:
///     u8 type id (0 Flatten, 1 Dense, 2 ReLU, 3 Conv2D, 4 MaxPool)
///     u32 n, n x u32                    layer hyperparameters
///     for Dense / Conv2D, weight then bias:
///       u32 rank, rank x u32 dims, prod(dims) x f64 values
std::vector<std::uint8_t> serialize_model(const ModelState& state);
ModelState deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const ModelState& state, const std::string& path);
ModelState load_model(const std::string& path);

}  // namespace cclab
