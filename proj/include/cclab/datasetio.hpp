#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cclab/synth.hpp"

namespace cclab {

/// BGSET1 container. Little-endian, 32-byte header:
///   "BGSET1\0\0"  u16 version  u32 width  u32 height  u32 count
///   u8 connectivity (= 4)  9 reserved zero bytes
/// followed by `count` records of: u32 label, height x ceil(width / 8) bytes
/// of packed rows (see BitGrid). The generator config travels in a JSON
/// sidecar next to the container (`<path>.json`).
inline constexpr std::size_t kDatasetHeaderBytes = 32;

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds);
// Parses the container only; the config is left default-initialized.
Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes);

// Re-labels every image with the oracle; throws VerificationError naming the
// first image whose stored label differs.
void verify_labels(const Dataset& ds);

std::string manifest_path(const std::string& dataset_path);
nlohmann::json manifest_json(const Dataset& ds);

// Writes the container and its sidecar; returns the container size in bytes.
std::uint64_t write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path, bool verify = false);

}  // namespace cclab
