#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cclab {

/// Bit-packed binary image. Rows are padded to a whole number of bytes; bit
/// x of a row lives in byte x/8 at bit position 7 - x%8 (MSB first, the PBM
/// convention). Padding bits are kept at zero.
class BitGrid {
 public:
  BitGrid() = default;
  BitGrid(std::uint32_t width, std::uint32_t height);

  // Builds a grid from already packed rows; padding bits must be zero.
  static BitGrid from_packed(std::uint32_t width, std::uint32_t height,
                             std::vector<std::uint8_t> bytes);

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  std::size_t row_bytes() const noexcept { return row_bytes_; }
  std::size_t size() const noexcept { return std::size_t{width_} * height_; }

  bool get(std::uint32_t x, std::uint32_t y) const noexcept {
    return (bytes_[y * row_bytes_ + (x >> 3)] >> (7 - (x & 7))) & 1u;
  }
  void set(std::uint32_t x, std::uint32_t y, bool on = true) noexcept {
    auto& b = bytes_[y * row_bytes_ + (x >> 3)];
    const auto mask = static_cast<std::uint8_t>(1u << (7 - (x & 7)));
    b = on ? static_cast<std::uint8_t>(b | mask) : static_cast<std::uint8_t>(b & ~mask);
  }

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

  // Writes 0.0/1.0 per pixel in row-major order into out (size() elements).
  void to_values(std::span<double> out) const;

  friend bool operator==(const BitGrid&, const BitGrid&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::size_t row_bytes_ = 0;
  std::vector<std::uint8_t> bytes_;
};

std::uint64_t count_ones(const BitGrid& grid) noexcept;

// Number of pixels where a and b differ; grids must have equal dimensions.
std::uint64_t hamming_distance(const BitGrid& a, const BitGrid& b);

BitGrid invert(const BitGrid& grid);
BitGrid transpose(const BitGrid& grid);
BitGrid flip_horizontal(const BitGrid& grid);
BitGrid flip_vertical(const BitGrid& grid);
BitGrid rotate90(const BitGrid& grid);  // clockwise

struct LabelGrid {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint32_t> labels;  // 0 = background, 1..num_components
  std::uint32_t num_components = 0;

  std::uint32_t at(std::uint32_t x, std::uint32_t y) const noexcept {
    return labels[std::size_t{y} * width + x];
  }
};

enum class LabelAlgorithm { union_find, bfs };

/// Exact 4-connected component labeling. Ids are assigned in raster-scan
/// first-encounter order, so both algorithms produce identical label grids.
LabelGrid label_components(const BitGrid& grid,
                           LabelAlgorithm algorithm = LabelAlgorithm::union_find);

inline std::uint32_t num_components(const BitGrid& grid) {
  return label_components(grid).num_components;
}

// True if both labelings induce the same partition of the foreground.
bool same_partition(const LabelGrid& a, const LabelGrid& b);

}  // namespace cclab
