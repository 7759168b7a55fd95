#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "otssl/errors.hpp"
#include "otssl/gnss/grid.hpp"

namespace otssl {

// Pixel flattening, 1-based on both sides: (row, col) -> col + (row-1)*n.
inline std::size_t flatten_index(std::size_t row, std::size_t col, std::size_t n) {
  if (row < 1 || col < 1 || row > n || col > n)
    throw config_error("flatten_index: index out of range");
  return col + (row - 1) * n;
}

// Euclidean distances between grid pixels, in pixel units. Symmetric with a
// zero diagonal; computed once per grid and shared by every EMD solve.
class CostMatrix {
 public:
  CostMatrix() = default;

  explicit CostMatrix(const GridSpec& grid)
      : height_(grid.height), width_(grid.width), n_(grid.pixels()), entries_(n_ * n_) {
    grid.validate();
    for (std::size_t p = 0; p < height_; ++p)
      for (std::size_t q = 0; q < width_; ++q) {
        const std::size_t i = p * width_ + q;
        for (std::size_t k = 0; k < height_; ++k)
          for (std::size_t l = 0; l < width_; ++l) {
            const double dr = static_cast<double>(p) - static_cast<double>(k);
            const double dc = static_cast<double>(q) - static_cast<double>(l);
            const double dist = std::sqrt(dr * dr + dc * dc);
            entries_[i * n_ + (k * width_ + l)] = dist;
            max_entry_ = std::max(max_entry_, dist);
          }
      }
  }

  std::size_t n_pixels() const { return n_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  double at(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  const double* row(std::size_t i) const { return entries_.data() + i * n_; }
  const std::vector<double>& entries() const { return entries_; }

  double max_entry() const { return max_entry_; }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t n_ = 0;
  double max_entry_ = 0.0;
  std::vector<double> entries_;
};

inline CostMatrix build_cost_matrix(const GridSpec& grid) { return CostMatrix(grid); }

}  // namespace otssl
