#pragma once

#include <cstdint>

#include "cclab/bitgrid.hpp"
#include "cclab/synth.hpp"

namespace cclab {

/// Two grids that differ in a single bridge pixel. `a` holds n_circles
/// disjoint disks, two of which are separated by a one-pixel gap; `b` is `a`
/// with the gap filled, so num_components(b) == num_components(a) - 1.
struct BridgePair {
  BitGrid a;
  BitGrid b;
  Point bridge;
};

// Deterministic for a given seed. Requires 3 <= lo <= hi; throws
// GenerationError when the disks cannot be placed after bounded retries.
BridgePair bridge_pair(std::uint64_t seed, std::uint32_t image_size, Range diameter_range,
                       int n_circles = 2);

}  // namespace cclab
