#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cclab/bitgrid.hpp"
#include "cclab/rng.hpp"

namespace cclab {

enum class ShapeKind { random_pixels, triangle, circle };

std::string_view to_string(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view text);

// Closed integer interval [lo, hi].
struct Range {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  friend bool operator==(const Range&, const Range&) = default;
};

// Parses "lo:hi" (or a single value "v" meaning v:v).
Range parse_range(std::string_view text);

struct ShapeSpec {
  ShapeKind kind = ShapeKind::triangle;
  // Diameter / bounding extent in pixels; unused for random pixels.
  Range size_range{2, 30};
  // Objects per image; for random pixels, foreground pixels per image.
  Range count_range{2, 40};

  friend bool operator==(const ShapeSpec&, const ShapeSpec&) = default;
};

struct PixelBudget {
  std::uint64_t target = 5000;
  double tolerance = 0.02;  // relative

  friend bool operator==(const PixelBudget&, const PixelBudget&) = default;
};

struct GenConfig {
  std::uint32_t image_size = 256;
  ShapeSpec shape;
  std::uint64_t n_images = 1;
  std::uint64_t seed = 0;
  std::optional<PixelBudget> pixel_budget;
  bool allow_overlap = false;

  // Throws ConfigError if the configuration cannot be generated.
  void validate() const;

  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

inline constexpr std::uint16_t kDatasetFormatVersion = 1;

struct Dataset {
  GenConfig config;
  std::uint16_t format_version = kDatasetFormatVersion;
  std::vector<BitGrid> images;
  std::vector<std::uint32_t> labels;  // 4-connected component counts
};

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Pixel offsets of a shape inside its size x size bounding box.
///
/// Circle: pixels whose centres lie in the disk of radius size/2 centred in
/// the box. Triangle: upright isoceles, apex row on top, base = height = size;
/// row j spans the pixel centres within (j + 1) / 2 of the vertical axis.
/// Both are 4-connected for every size >= 1.
const std::vector<Point>& shape_offsets(ShapeKind kind, int size);

inline std::size_t shape_area(ShapeKind kind, int size) {
  return shape_offsets(kind, size).size();
}

/// Absolute pixel set of a shape whose bounding box is centred at `center`
/// (box origin = center - size/2). Throws ShapeError when the box does not fit
/// inside a width x height image.
std::vector<Point> raster_shape(ShapeKind kind, Point center, int size,
                                std::uint32_t width, std::uint32_t height);

// Sets the pixels of raster_shape(...) in grid.
void stamp_shape(BitGrid& grid, ShapeKind kind, Point center, int size);

BitGrid gen_random_pixels(std::uint32_t image_size, std::uint64_t k, Rng& rng);

struct ShapeImage {
  BitGrid grid;
  std::uint32_t label = 0;
  std::vector<int> sizes;  // per placed shape
};

ShapeImage gen_shape_image(const GenConfig& config, std::int64_t target_count, Rng& rng);
ShapeImage gen_fixed_budget_image(const GenConfig& config, std::int64_t target_count, Rng& rng);

// One image of the dataset, generated from its own child rng.
ShapeImage gen_dataset_image(const GenConfig& config, std::uint64_t index);

Dataset gen_dataset(const GenConfig& config);

}  // namespace cclab
