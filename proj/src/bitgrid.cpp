#include "cclab/bitgrid.hpp"

#include <bit>
#include <deque>
#include <stdexcept>

#include "cclab/error.hpp"

namespace cclab {

BitGrid::BitGrid(std::uint32_t width, std::uint32_t height)
    : width_(width), height_(height), row_bytes_((std::size_t{width} + 7) / 8) {
  if (width == 0 || height == 0) throw ConfigError("BitGrid dimensions must be >= 1");
  bytes_.assign(row_bytes_ * height_, 0);
}

BitGrid BitGrid::from_packed(std::uint32_t width, std::uint32_t height,
                             std::vector<std::uint8_t> bytes) {
  BitGrid g(width, height);
  if (bytes.size() != g.bytes_.size())
    throw FormatError("packed payload has wrong size");
  const unsigned pad = static_cast<unsigned>(g.row_bytes_ * 8 - width);
  if (pad != 0) {
    const auto pad_mask = static_cast<std::uint8_t>((1u << pad) - 1);
    for (std::uint32_t y = 0; y < height; ++y) {
      if (bytes[(y + 1) * g.row_bytes_ - 1] & pad_mask)
        throw FormatError("nonzero padding bits in packed row");
    }
  }
  g.bytes_ = std::move(bytes);
  return g;
}

void BitGrid::to_values(std::span<double> out) const {
  if (out.size() != size()) throw ShapeError("to_values: output size mismatch");
  std::size_t i = 0;
  for (std::uint32_t y = 0; y < height_; ++y)
    for (std::uint32_t x = 0; x < width_; ++x) out[i++] = get(x, y) ? 1.0 : 0.0;
}

std::uint64_t count_ones(const BitGrid& grid) noexcept {
  std::uint64_t n = 0;
  for (auto b : grid.bytes()) n += static_cast<std::uint64_t>(std::popcount(b));
  return n;
}

std::uint64_t hamming_distance(const BitGrid& a, const BitGrid& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw ShapeError("hamming_distance: grid dimensions differ");
  std::uint64_t n = 0;
  const auto ab = a.bytes();
  const auto bb = b.bytes();
  for (std::size_t i = 0; i < ab.size(); ++i)
    n += static_cast<std::uint64_t>(std::popcount(static_cast<std::uint8_t>(ab[i] ^ bb[i])));
  return n;
}

BitGrid invert(const BitGrid& grid) {
  BitGrid out(grid.width(), grid.height());
  for (std::uint32_t y = 0; y < grid.height(); ++y)
    for (std::uint32_t x = 0; x < grid.width(); ++x) out.set(x, y, !grid.get(x, y));
  return out;
}

BitGrid transpose(const BitGrid& grid) {
  BitGrid out(grid.height(), grid.width());
  for (std::uint32_t y = 0; y < grid.height(); ++y)
    for (std::uint32_t x = 0; x < grid.width(); ++x)
      if (grid.get(x, y)) out.set(y, x);
  return out;
}

BitGrid flip_horizontal(const BitGrid& grid) {
  BitGrid out(grid.width(), grid.height());
  const auto w = grid.width();
  for (std::uint32_t y = 0; y < grid.height(); ++y)
    for (std::uint32_t x = 0; x < w; ++x)
      if (grid.get(x, y)) out.set(w - 1 - x, y);
  return out;
}

BitGrid flip_vertical(const BitGrid& grid) {
  BitGrid out(grid.width(), grid.height());
  const auto h = grid.height();
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < grid.width(); ++x)
      if (grid.get(x, y)) out.set(x, h - 1 - y);
  return out;
}

BitGrid rotate90(const BitGrid& grid) {
  // (x, y) -> (h - 1 - y, x) in a grid of width h, height w.
  BitGrid out(grid.height(), grid.width());
  const auto h = grid.height();
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < grid.width(); ++x)
      if (grid.get(x, y)) out.set(h - 1 - y, x);
  return out;
}

namespace {

class DisjointSets {
 public:
  std::uint32_t make_set() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    rank_.push_back(0);
    return parent_.back();
  }

  std::uint32_t find(std::uint32_t v) {
    std::uint32_t root = v;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[v] != root) {
      const auto next = parent_[v];
      parent_[v] = root;
      v = next;
    }
    return root;
  }

  std::size_t size() const noexcept { return parent_.size(); }

  void join(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
};

constexpr std::uint32_t kNone = UINT32_MAX;

LabelGrid label_union_find(const BitGrid& grid) {
  const auto w = grid.width();
  const auto h = grid.height();
  LabelGrid out{w, h, std::vector<std::uint32_t>(grid.size(), 0), 0};

  // First pass: provisional set ids, merging with the west and north
  // neighbours.
  std::vector<std::uint32_t> prov(grid.size(), kNone);
  DisjointSets sets;
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      if (!grid.get(x, y)) continue;
      const std::size_t i = std::size_t{y} * w + x;
      const auto west = x > 0 ? prov[i - 1] : kNone;
      const auto north = y > 0 ? prov[i - w] : kNone;
      if (west == kNone && north == kNone) {
        prov[i] = sets.make_set();
      } else if (west == kNone) {
        prov[i] = north;
      } else {
        prov[i] = west;
        if (north != kNone) sets.join(west, north);
      }
    }
  }

  // Second pass: renumber roots in raster first-encounter order.
  std::vector<std::uint32_t> final_id(sets.size(), 0);
  for (std::size_t i = 0; i < prov.size(); ++i) {
    if (prov[i] == kNone) continue;
    auto& id = final_id[sets.find(prov[i])];
    if (id == 0) id = ++out.num_components;
    out.labels[i] = id;
  }
  return out;
}

LabelGrid label_bfs(const BitGrid& grid) {
  const auto w = grid.width();
  const auto h = grid.height();
  LabelGrid out{w, h, std::vector<std::uint32_t>(grid.size(), 0), 0};
  std::deque<std::size_t> queue;

  for (std::uint32_t y0 = 0; y0 < h; ++y0) {
    for (std::uint32_t x0 = 0; x0 < w; ++x0) {
      const std::size_t start = std::size_t{y0} * w + x0;
      if (!grid.get(x0, y0) || out.labels[start] != 0) continue;
      const auto id = ++out.num_components;
      out.labels[start] = id;
      queue.push_back(start);
      while (!queue.empty()) {
        const auto i = queue.front();
        queue.pop_front();
        const auto x = static_cast<std::uint32_t>(i % w);
        const auto y = static_cast<std::uint32_t>(i / w);
        auto visit = [&](std::uint32_t nx, std::uint32_t ny) {
          const std::size_t j = std::size_t{ny} * w + nx;
          if (grid.get(nx, ny) && out.labels[j] == 0) {
            out.labels[j] = id;
            queue.push_back(j);
          }
        };
        if (x > 0) visit(x - 1, y);
        if (x + 1 < w) visit(x + 1, y);
        if (y > 0) visit(x, y - 1);
        if (y + 1 < h) visit(x, y + 1);
      }
    }
  }
  return out;
}

}  // namespace

LabelGrid label_components(const BitGrid& grid, LabelAlgorithm algorithm) {
  switch (algorithm) {
    case LabelAlgorithm::union_find:
      return label_union_find(grid);
    case LabelAlgorithm::bfs:
      return label_bfs(grid);
  }
  throw std::logic_error("unknown labeling algorithm");
}

bool same_partition(const LabelGrid& a, const LabelGrid& b) {
  if (a.width != b.width || a.height != b.height || a.num_components != b.num_components)
    return false;
  // A bijection between ids must exist.
  std::vector<std::uint32_t> fwd(a.num_components + 1, kNone), back(b.num_components + 1, kNone);
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const auto la = a.labels[i];
    const auto lb = b.labels[i];
    if ((la == 0) != (lb == 0)) return false;
    if (la == 0) continue;
    if (fwd[la] == kNone && back[lb] == kNone) {
      fwd[la] = lb;
      back[lb] = la;
    } else if (fwd[la] != lb || back[lb] != la) {
      return false;
    }
  }
  return true;
}

}  // namespace cclab
