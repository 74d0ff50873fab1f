#include "cclab/bridge.hpp"

#include <set>

#include "cclab/error.hpp"
#include "cclab/rng.hpp"

namespace cclab {

namespace {

constexpr int kAttempts = 200;

// True if a shape at box origin (x0, y0) would overlap or 4-touch grid pixels.
bool touches(const BitGrid& grid, const std::vector<Point>& offsets, int x0, int y0) {
  const int w = static_cast<int>(grid.width());
  const int h = static_cast<int>(grid.height());
  auto on = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h &&
           grid.get(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
  };
  for (const auto& p : offsets) {
    const int x = x0 + p.x;
    const int y = y0 + p.y;
    if (on(x, y) || on(x - 1, y) || on(x + 1, y) || on(x, y - 1) || on(x, y + 1)) return true;
  }
  return false;
}

void stamp(BitGrid& grid, const std::vector<Point>& offsets, int x0, int y0) {
  for (const auto& p : offsets)
    grid.set(static_cast<std::uint32_t>(x0 + p.x), static_cast<std::uint32_t>(y0 + p.y));
}

// Slides a disk toward the existing content along one axis and stops at the
// last position that does not touch it, which leaves a one-pixel gap (or a
// diagonal contact) somewhere along the shared front.
bool place_adjacent(BitGrid& grid, const std::vector<Point>& offsets, int size, Rng& rng) {
  const int n = static_cast<int>(grid.width());
  const bool horizontal = rng.uniform_int(0, 1) == 0;
  const int cross = static_cast<int>(rng.uniform_int(0, n - size));
  const bool from_high = rng.uniform_int(0, 1) == 0;
  auto origin = [&](int along) { return horizontal ? Point{along, cross} : Point{cross, along}; };

  int pos = from_high ? n - size : 0;
  const int step = from_high ? -1 : 1;
  auto o = origin(pos);
  if (touches(grid, offsets, o.x, o.y)) return false;
  bool moved_to_contact = false;
  while (true) {
    const int next = pos + step;
    if (next < 0 || next > n - size) break;
    const auto no = origin(next);
    if (touches(grid, offsets, no.x, no.y)) {
      moved_to_contact = true;
      break;
    }
    pos = next;
  }
  if (!moved_to_contact) return false;
  o = origin(pos);
  stamp(grid, offsets, o.x, o.y);
  return true;
}

}  // namespace

BridgePair bridge_pair(std::uint64_t seed, std::uint32_t image_size, Range diameter_range,
                       int n_circles) {
  if (diameter_range.lo < 3 || diameter_range.hi < diameter_range.lo)
    throw ConfigError("bridge_pair needs 3 <= lo <= hi");
  if (n_circles < 2) throw ConfigError("bridge_pair needs at least two circles");
  if (diameter_range.hi > static_cast<std::int64_t>(image_size))
    throw ConfigError("bridge_pair: diameter exceeds image size");

  Rng rng(seed);
  const int n = static_cast<int>(image_size);
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    BitGrid grid(image_size, image_size);
    auto draw = [&] {
      const int s = static_cast<int>(rng.uniform_int(diameter_range.lo, diameter_range.hi));
      return std::pair{s, &shape_offsets(ShapeKind::circle, s)};
    };

    auto [sa, oa] = draw();
    stamp(grid, *oa, static_cast<int>(rng.uniform_int(0, n - sa)),
          static_cast<int>(rng.uniform_int(0, n - sa)));
    auto [sb, ob] = draw();
    if (!place_adjacent(grid, *ob, sb, rng)) continue;

    bool ok = true;
    for (int c = 2; c < n_circles && ok; ++c) {
      auto [s, o] = draw();
      ok = false;
      for (int tries = 0; tries < 1000 && !ok; ++tries) {
        const int x0 = static_cast<int>(rng.uniform_int(0, n - s));
        const int y0 = static_cast<int>(rng.uniform_int(0, n - s));
        if (touches(grid, *o, x0, y0)) continue;
        stamp(grid, *o, x0, y0);
        ok = true;
      }
    }
    if (!ok) continue;

    // Bridge candidates: background pixels with exactly two distinct
    // components among their 4-neighbours.
    const auto labels = label_components(grid);
    if (labels.num_components != static_cast<std::uint32_t>(n_circles)) continue;
    std::vector<Point> candidates;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (grid.get(x, y)) continue;
        std::set<std::uint32_t> ids;
        auto add = [&](int nx, int ny) {
          if (nx < 0 || ny < 0 || nx >= n || ny >= n) return;
          if (const auto id = labels.at(nx, ny); id != 0) ids.insert(id);
        };
        add(x - 1, y);
        add(x + 1, y);
        add(x, y - 1);
        add(x, y + 1);
        if (ids.size() == 2) candidates.push_back({x, y});
      }
    }
    if (candidates.empty()) continue;
    const auto bridge = candidates[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];
    BitGrid b = grid;
    b.set(static_cast<std::uint32_t>(bridge.x), static_cast<std::uint32_t>(bridge.y));
    return {std::move(grid), std::move(b), bridge};
  }
  throw GenerationError("bridge_pair: could not build a bridged configuration");
}

}  // namespace cclab
