// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sfod/core/error.hpp"

namespace sfod {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rs) {
    Matrix m(rs.size(), rs.empty() ? 0 : rs.front().size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (rs[i].size() != m.cols) throw DataError("ragged rows");
      std::copy(rs[i].begin(), rs[i].end(), m.data.begin() + i * m.cols);
    }
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const noexcept { return {data.data() + i * cols, cols}; }

  std::vector<double> row_vector(std::size_t i) const {
    auto r = row(i);
    return {r.begin(), r.end()};
  }

  bool same_shape(const Matrix& o) const noexcept { return rows == o.rows && cols == o.cols; }
  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace sfod
