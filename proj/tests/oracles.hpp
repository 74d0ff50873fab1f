#pragma once

// Reference implementations used only by the tests. They are deliberately
// naive and share no code with the library.

#include <cstdint>
#include <vector>

#include "cclab/bitgrid.hpp"
#include "cclab/rng.hpp"

namespace oracle {

using Pixels = std::vector<std::vector<bool>>;  // [y][x]

inline Pixels unpack(const cclab::BitGrid& g) {
  Pixels p(g.height(), std::vector<bool>(g.width()));
  for (std::uint32_t y = 0; y < g.height(); ++y)
    for (std::uint32_t x = 0; x < g.width(); ++x) p[y][x] = g.get(x, y);
  return p;
}

inline std::uint64_t popcount(const Pixels& p) {
  std::uint64_t n = 0;
  for (const auto& row : p)
    for (bool b : row) n += b ? 1 : 0;
  return n;
}

// Stack-based depth-first flood fill over 4-neighbours.
inline std::uint32_t components(const Pixels& p) {
  const auto h = p.size();
  const auto w = h ? p[0].size() : 0;
  std::vector<std::vector<bool>> seen(h, std::vector<bool>(w));
  std::uint32_t count = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (!p[y][x] || seen[y][x]) continue;
      ++count;
      stack.push_back({x, y});
      seen[y][x] = true;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        const long dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const long nx = static_cast<long>(cx) + dx[k], ny = static_cast<long>(cy) + dy[k];
          if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
          if (!p[ny][nx] || seen[ny][nx]) continue;
          seen[ny][nx] = true;
          stack.push_back({static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)});
        }
      }
    }
  return count;
}

inline std::uint32_t components(const cclab::BitGrid& g) { return components(unpack(g)); }

// Grid with each pixel on independently with probability `density`.
inline cclab::BitGrid random_grid(std::uint32_t w, std::uint32_t h, double density,
                                  cclab::Rng& rng) {
  cclab::BitGrid g(w, h);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x)
      if (rng.uniform01() < density) g.set(x, y);
  return g;
}

}  // namespace oracle
