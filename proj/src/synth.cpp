#include "cclab/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "cclab/error.hpp"

namespace cclab {

namespace {

constexpr int kPlacementAttempts = 2000;
constexpr int kImageAttempts = 50;

// Shape pixels plus their 4-neighbours; a new shape may not touch any of them
// when overlap is disallowed, so every shape stays its own component.
class Occupancy {
 public:
  Occupancy(std::uint32_t w, std::uint32_t h) : w_(w), h_(h), blocked_(std::size_t{w} * h, 0) {}

  bool fits(const std::vector<Point>& offsets, int x0, int y0) const {
    for (const auto& p : offsets)
      if (blocked_[idx(x0 + p.x, y0 + p.y)]) return false;
    return true;
  }

  void occupy(const std::vector<Point>& offsets, int x0, int y0) {
    for (const auto& p : offsets) {
      const int x = x0 + p.x;
      const int y = y0 + p.y;
      blocked_[idx(x, y)] = 1;
      if (x > 0) blocked_[idx(x - 1, y)] = 1;
      if (x + 1 < static_cast<int>(w_)) blocked_[idx(x + 1, y)] = 1;
      if (y > 0) blocked_[idx(x, y - 1)] = 1;
      if (y + 1 < static_cast<int>(h_)) blocked_[idx(x, y + 1)] = 1;
    }
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }
  std::uint32_t w_, h_;
  std::vector<std::uint8_t> blocked_;
};

void stamp_at(BitGrid& grid, const std::vector<Point>& offsets, int x0, int y0) {
  for (const auto& p : offsets)
    grid.set(static_cast<std::uint32_t>(x0 + p.x), static_cast<std::uint32_t>(y0 + p.y));
}

// Places shapes of the given sizes (in order) at uniform random valid
// positions. Returns false when some shape cannot be placed.
bool place_shapes(BitGrid& grid, ShapeKind kind, const std::vector<int>& sizes,
                  bool allow_overlap, Rng& rng) {
  const auto w = static_cast<int>(grid.width());
  const auto h = static_cast<int>(grid.height());
  Occupancy occ(grid.width(), grid.height());
  for (int s : sizes) {
    if (s > w || s > h) return false;
    const auto& offsets = shape_offsets(kind, s);
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const auto x0 = static_cast<int>(rng.uniform_int(0, w - s));
      const auto y0 = static_cast<int>(rng.uniform_int(0, h - s));
      if (!allow_overlap && !occ.fits(offsets, x0, y0)) continue;
      stamp_at(grid, offsets, x0, y0);
      if (!allow_overlap) occ.occupy(offsets, x0, y0);
      placed = true;
    }
    if (!placed) return false;
  }
  return true;
}

std::string describe(const GenConfig& c) {
  return std::string(to_string(c.shape.kind)) + " image_size=" + std::to_string(c.image_size);
}

}  // namespace

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::random_pixels:
      return "random_pixels";
    case ShapeKind::triangle:
      return "triangle";
    case ShapeKind::circle:
      return "circle";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(std::string_view text) {
  if (text == "random_pixels" || text == "pixels") return ShapeKind::random_pixels;
  if (text == "triangle") return ShapeKind::triangle;
  if (text == "circle") return ShapeKind::circle;
  throw ConfigError("unknown shape kind '" + std::string(text) + "'");
}

Range parse_range(std::string_view text) {
  auto parse_int = [&](std::string_view s) {
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || s.empty())
      throw ConfigError("invalid range '" + std::string(text) + "', expected lo:hi");
    return v;
  };
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    const auto v = parse_int(text);
    return {v, v};
  }
  Range r{parse_int(text.substr(0, colon)), parse_int(text.substr(colon + 1))};
  if (r.lo > r.hi) throw ConfigError("invalid range '" + std::string(text) + "': lo > hi");
  return r;
}

void GenConfig::validate() const {
  if (image_size < 1) throw ConfigError("image_size must be >= 1");
  const auto& r = shape.count_range;
  if (r.lo > r.hi) throw ConfigError("count_range: lo > hi");
  const auto area = static_cast<std::int64_t>(image_size) * image_size;
  if (shape.kind == ShapeKind::random_pixels) {
    if (r.lo < 0 || r.hi > area) throw ConfigError("random pixel count out of [0, image_size^2]");
    if (pixel_budget) throw ConfigError("pixel budget applies to shape datasets only");
    return;
  }
  if (r.lo < 1) throw ConfigError("count_range.lo must be >= 1");
  const auto& s = shape.size_range;
  if (s.lo > s.hi) throw ConfigError("size_range: lo > hi");
  if (s.lo < 2) throw ConfigError("size_range.lo must be >= 2 for shapes");
  if (s.hi > static_cast<std::int64_t>(image_size))
    throw ConfigError("size_range.hi exceeds image_size");
  if (pixel_budget) {
    if (pixel_budget->tolerance < 0.0 || pixel_budget->tolerance >= 1.0)
      throw ConfigError("pixel budget tolerance must be in [0, 1)");
    if (pixel_budget->target == 0) throw ConfigError("pixel budget must be positive");
    if (2 * pixel_budget->target > static_cast<std::uint64_t>(area))
      throw ConfigError("pixel budget exceeds half the image area");
  }
}

void to_json(nlohmann::json& j, const GenConfig& c) {
  j = nlohmann::json{
      {"image_size", c.image_size},
      {"kind", std::string(to_string(c.shape.kind))},
      {"size_range", {c.shape.size_range.lo, c.shape.size_range.hi}},
      {"count_range", {c.shape.count_range.lo, c.shape.count_range.hi}},
      {"n_images", c.n_images},
      {"seed", c.seed},
      {"allow_overlap", c.allow_overlap},
  };
  if (c.pixel_budget)
    j["pixel_budget"] = {{"target", c.pixel_budget->target},
                         {"tolerance", c.pixel_budget->tolerance}};
  else
    j["pixel_budget"] = nullptr;
}

void from_json(const nlohmann::json& j, GenConfig& c) {
  c.image_size = j.at("image_size").get<std::uint32_t>();
  c.shape.kind = parse_shape_kind(j.at("kind").get<std::string>());
  c.shape.size_range = {j.at("size_range").at(0).get<std::int64_t>(),
                        j.at("size_range").at(1).get<std::int64_t>()};
  c.shape.count_range = {j.at("count_range").at(0).get<std::int64_t>(),
                         j.at("count_range").at(1).get<std::int64_t>()};
  c.n_images = j.at("n_images").get<std::uint64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.allow_overlap = j.value("allow_overlap", false);
  if (j.contains("pixel_budget") && !j.at("pixel_budget").is_null()) {
    const auto& b = j.at("pixel_budget");
    c.pixel_budget = PixelBudget{b.at("target").get<std::uint64_t>(),
                                 b.at("tolerance").get<double>()};
  } else {
    c.pixel_budget.reset();
  }
}

const std::vector<Point>& shape_offsets(ShapeKind kind, int size) {
  if (kind == ShapeKind::random_pixels) throw ConfigError("random pixels have no shape");
  if (size < 1) throw ShapeError("shape size must be >= 1");

  static std::mutex mu;
  static std::map<std::pair<ShapeKind, int>, std::vector<Point>> cache;
  std::lock_guard lock(mu);
  auto [it, inserted] = cache.try_emplace({kind, size});
  if (!inserted) return it->second;

  // Doubled coordinates keep the tests in integers: pixel centre i + 0.5
  // against box centre size / 2 becomes 2i + 1 - size.
  auto& pts = it->second;
  for (int j = 0; j < size; ++j) {
    const int dy = 2 * j + 1 - size;
    for (int i = 0; i < size; ++i) {
      const int dx = 2 * i + 1 - size;
      const bool in = kind == ShapeKind::circle ? dx * dx + dy * dy <= size * size
                                                : std::abs(dx) <= j + 1;
      if (in) pts.push_back({i, j});
    }
  }
  return pts;
}

std::vector<Point> raster_shape(ShapeKind kind, Point center, int size, std::uint32_t width,
                                std::uint32_t height) {
  const int x0 = center.x - size / 2;
  const int y0 = center.y - size / 2;
  if (x0 < 0 || y0 < 0 || x0 + size > static_cast<int>(width) ||
      y0 + size > static_cast<int>(height))
    throw ShapeError("shape bounding box lies outside the image");
  std::vector<Point> out;
  for (const auto& p : shape_offsets(kind, size)) out.push_back({x0 + p.x, y0 + p.y});
  return out;
}

void stamp_shape(BitGrid& grid, ShapeKind kind, Point center, int size) {
  for (const auto& p : raster_shape(kind, center, size, grid.width(), grid.height()))
    grid.set(static_cast<std::uint32_t>(p.x), static_cast<std::uint32_t>(p.y));
}

BitGrid gen_random_pixels(std::uint32_t image_size, std::uint64_t k, Rng& rng) {
  BitGrid grid(image_size, image_size);
  const std::uint64_t n = std::uint64_t{image_size} * image_size;
  if (k > n) throw GenerationError("random pixel count exceeds image area");
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  for (std::uint64_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::uint64_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n - 1)));
    std::swap(idx[i], idx[j]);
    grid.set(idx[i] % image_size, idx[i] / image_size);
  }
  return grid;
}

ShapeImage gen_shape_image(const GenConfig& config, std::int64_t target_count, Rng& rng) {
  const auto& spec = config.shape;
  if (spec.kind == ShapeKind::random_pixels)
    throw ConfigError("gen_shape_image needs a triangle or circle spec");
  if (target_count < spec.count_range.lo || target_count > spec.count_range.hi)
    throw ConfigError("target_count outside count_range");

  for (int attempt = 0; attempt < kImageAttempts; ++attempt) {
    ShapeImage img{BitGrid(config.image_size, config.image_size), 0, {}};
    img.sizes.resize(static_cast<std::size_t>(target_count));
    for (auto& s : img.sizes)
      s = static_cast<int>(rng.uniform_int(spec.size_range.lo, spec.size_range.hi));
    if (!place_shapes(img.grid, spec.kind, img.sizes, config.allow_overlap, rng)) continue;
    img.label = num_components(img.grid);
    return img;
  }
  throw GenerationError("could not place " + std::to_string(target_count) +
                        " non-touching shapes (" + describe(config) + ")");
}

ShapeImage gen_fixed_budget_image(const GenConfig& config, std::int64_t target_count, Rng& rng) {
  if (!config.pixel_budget) throw ConfigError("gen_fixed_budget_image needs a pixel budget");
  if (target_count < 1) throw ConfigError("target_count must be >= 1");
  const auto& spec = config.shape;
  if (spec.kind == ShapeKind::random_pixels)
    throw ConfigError("pixel budgets apply to triangle or circle sets");

  const auto budget = static_cast<double>(config.pixel_budget->target);
  const double slack = config.pixel_budget->tolerance * budget;
  const auto n = static_cast<std::size_t>(target_count);
  const int max_size = static_cast<int>(config.image_size);
  auto area = [&](int s) { return static_cast<double>(shape_area(spec.kind, s)); };

  if (static_cast<double>(n) * area(2) > budget + slack)
    throw GenerationError("pixel budget too small for " + std::to_string(n) + " shapes");

  for (int attempt = 0; attempt < kImageAttempts; ++attempt) {
    // Relative sizes come from size_range; a common scale factor then brings
    // the total area to the budget.
    std::vector<double> raw(n);
    for (auto& r : raw)
      r = rng.uniform(static_cast<double>(spec.size_range.lo),
                      static_cast<double>(spec.size_range.hi));

    auto sizes_for = [&](double f) {
      std::vector<int> s(n);
      for (std::size_t i = 0; i < n; ++i)
        s[i] = std::clamp(static_cast<int>(std::lround(f * raw[i])), 2, max_size);
      return s;
    };
    auto total = [&](const std::vector<int>& s) {
      double t = 0;
      for (int v : s) t += area(v);
      return t;
    };

    // Smallest scale whose total reaches the budget (total is monotone in f).
    double lo = 0.0, hi = static_cast<double>(max_size) / spec.size_range.lo;
    if (total(sizes_for(hi)) < budget - slack) continue;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (total(sizes_for(mid)) >= budget ? hi : lo) = mid;
    }
    auto sizes = sizes_for(hi);
    if (std::abs(total(sizes) - budget) > std::abs(total(sizes_for(lo)) - budget))
      sizes = sizes_for(lo);

    // Greedy single-step corrections toward the budget. They continue past
    // the tolerance band so that the residual does not depend on how many
    // shapes share the budget.
    double t = total(sizes);
    for (std::size_t step = 0; step < 8 * n && t != budget; ++step) {
      double best_gap = std::abs(t - budget);
      std::size_t best_i = n;
      int best_delta = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (int delta : {-1, 1}) {
          const int s = sizes[i] + delta;
          if (s < 2 || s > max_size) continue;
          const double gap = std::abs(t - area(sizes[i]) + area(s) - budget);
          if (gap < best_gap) {
            best_gap = gap;
            best_i = i;
            best_delta = delta;
          }
        }
      }
      if (best_i == n) break;
      t += area(sizes[best_i] + best_delta) - area(sizes[best_i]);
      sizes[best_i] += best_delta;
    }
    if (std::abs(t - budget) > slack) continue;

    // Large shapes first: they are the hardest to fit.
    auto order = sizes;
    std::sort(order.begin(), order.end(), std::greater<>());
    ShapeImage img{BitGrid(config.image_size, config.image_size), 0, sizes};
    if (!place_shapes(img.grid, spec.kind, order, config.allow_overlap, rng)) continue;
    if (std::abs(static_cast<double>(count_ones(img.grid)) - budget) > slack) continue;
    img.label = num_components(img.grid);
    return img;
  }
  throw GenerationError("could not meet pixel budget " +
                        std::to_string(config.pixel_budget->target) + " with " +
                        std::to_string(n) + " shapes (" + describe(config) + ")");
}

ShapeImage gen_dataset_image(const GenConfig& config, std::uint64_t index) {
  Rng rng(child_seed(config.seed, index));
  const auto count = rng.uniform_int(config.shape.count_range.lo, config.shape.count_range.hi);
  if (config.shape.kind == ShapeKind::random_pixels) {
    ShapeImage img{gen_random_pixels(config.image_size, static_cast<std::uint64_t>(count), rng),
                   0, {}};
    img.label = num_components(img.grid);
    return img;
  }
  if (config.pixel_budget) return gen_fixed_budget_image(config, count, rng);
  return gen_shape_image(config, count, rng);
}

Dataset gen_dataset(const GenConfig& config) {
  config.validate();
  Dataset ds;
  ds.config = config;
  ds.images.reserve(config.n_images);
  ds.labels.reserve(config.n_images);
  for (std::uint64_t i = 0; i < config.n_images; ++i) {
    try {
      auto img = gen_dataset_image(config, i);
      ds.images.push_back(std::move(img.grid));
      ds.labels.push_back(img.label);
    } catch (const GenerationError& e) {
      throw GenerationError("image " + std::to_string(i) + ": " + e.what(), i);
    }
  }
  return ds;
}

}  // namespace cclab
