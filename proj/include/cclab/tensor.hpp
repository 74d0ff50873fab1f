#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace cclab {

// Dense row-major array of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
      : shape(std::move(dims)), values(element_count(shape), fill) {}

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const noexcept { return values.size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace cclab
