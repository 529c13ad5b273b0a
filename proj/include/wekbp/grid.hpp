#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wekbp/error.hpp"

namespace wekbp {

// Row-major H×W raster.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), cells_(height * width, fill) {}
  Grid(std::size_t height, std::size_t width, std::vector<T> cells)
      : height_(height), width_(width), cells_(std::move(cells)) {
    if (cells_.size() != height_ * width_) {
      throw ShapeError("grid of " + std::to_string(height_) + "x" + std::to_string(width_) + " given " +
                       std::to_string(cells_.size()) + " cells");
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return cells_.size(); }

  T& operator()(std::size_t row, std::size_t col) { return cells_[row * width_ + col]; }
  const T& operator()(std::size_t row, std::size_t col) const { return cells_[row * width_ + col]; }

  std::span<T> row(std::size_t r) { return {cells_.data() + r * width_, width_}; }
  std::span<const T> row(std::size_t r) const { return {cells_.data() + r * width_, width_}; }

  std::span<const T> cells() const noexcept { return cells_; }
  std::span<T> cells() noexcept { return cells_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> cells_;
};

}  // namespace wekbp
