#pragma once

#include <random>

#include "radiomap/core.hpp"

namespace testutil {

inline radiomap::Matrix uniform_matrix(std::mt19937_64& gen, int rows, int cols, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  radiomap::Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = u(gen);
  return m;
}

inline radiomap::Matrix normal_matrix(std::mt19937_64& gen, int rows, int cols, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  radiomap::Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = n(gen);
  return m;
}

inline double rel_error(const radiomap::Matrix& a, const radiomap::Matrix& b) {
  const double d = b.norm();
  return d > 0.0 ? (a - b).norm() / d : (a - b).norm();
}

}  // namespace testutil
