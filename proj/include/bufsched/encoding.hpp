#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "bufsched/catalog.hpp"

namespace bufsched {

/// Dense row-major matrix with a fixed width, the downsized form of a
/// full-resolution block matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> cells;  // rows * cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), cells(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return cells[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Reduces a per-block row to a fixed width. Equal width copies; a longer row
/// is cut into `width` contiguous windows of near-equal size (remainders go
/// to the trailing windows) and each window is replaced by its mean; a
/// shorter row is copied into the leading cells and zero-padded.
inline std::vector<double> downsample(std::span<const double> full_row,
                                      std::size_t width) {
  if (full_row.empty()) {
    throw std::invalid_argument("downsample input row must be nonempty");
  }
  if (width == 0) {
    throw std::invalid_argument("downsample width must be >= 1");
  }
  const std::size_t n = full_row.size();
  std::vector<double> out(width, 0.0);
  if (n <= width) {
    for (std::size_t j = 0; j < n; ++j) out[j] = full_row[j];
    return out;
  }
  const std::size_t base = n / width;
  const std::size_t rem = n % width;
  std::size_t pos = 0;
  for (std::size_t j = 0; j < width; ++j) {
    const std::size_t len = base + (j >= width - rem ? 1 : 0);
    double sum = 0.0;
    for (std::size_t k = 0; k < len; ++k) sum += full_row[pos + k];
    out[j] = sum / static_cast<double>(len);
    pos += len;
  }
  return out;
}

inline Matrix downsample_matrix(const BlockMatrix& full, std::size_t width) {
  Matrix m(full.size(), width);
  for (std::size_t i = 0; i < full.size(); ++i) {
    const std::vector<double> row = downsample(full[i], width);
    for (std::size_t j = 0; j < width; ++j) m.at(i, j) = row[j];
  }
  return m;
}

/// Downsized pool occupancy: the state half of the Q-network input.
inline Matrix encode_buffer_state(const BlockMatrix& pool_snapshot,
                                  std::size_t width) {
  return downsample_matrix(pool_snapshot, width);
}

/// Downsized access probabilities: the action half of the Q-network input.
inline Matrix encode_query_action(const BlockMatrix& access,
                                  std::size_t width) {
  return downsample_matrix(access, width);
}

/// Network input: state cells row-major, then action cells row-major.
inline std::vector<double> feature_vector(const Matrix& state,
                                          const Matrix& action) {
  if (state.rows != action.rows || state.cols != action.cols) {
    throw std::invalid_argument("state/action shape mismatch");
  }
  std::vector<double> out;
  out.reserve(state.cells.size() + action.cells.size());
  out.insert(out.end(), state.cells.begin(), state.cells.end());
  out.insert(out.end(), action.cells.begin(), action.cells.end());
  return out;
}

}  // namespace bufsched
