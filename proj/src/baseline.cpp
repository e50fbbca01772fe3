#include "radiomap/baseline.hpp"

#include <cmath>
#include <limits>

namespace radiomap {

double tps_kernel(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

double mean_nearest_spacing(const SensingMask& mask) {
  const auto& cells = mask.cells();
  if (cells.size() < 2) return 1.0;
  double total = 0.0;
  for (std::size_t a = 0; a < cells.size(); ++a) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < cells.size(); ++b) {
      if (a == b) continue;
      const double di = cells[a].i - cells[b].i, dj = cells[a].j - cells[b].j;
      best = std::min(best, di * di + dj * dj);
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(cells.size());
}

RadioMapTensor tps_interpolate(const FiberObservations& obs, const TpsOptions& options) {
  const GridSpec& grid = obs.grid();
  const auto& cells = obs.mask().cells();
  const int n = static_cast<int>(cells.size());
  if (n < 3) throw PreconditionError("thin-plate splines need at least 3 sensed cells, got " + std::to_string(n));

  Matrix P(n, 3);
  for (int a = 0; a < n; ++a) P.row(a) << 1.0, cells[a].i, cells[a].j;
  if (Eigen::FullPivLU<Matrix>(P).rank() < 3) {
    throw PreconditionError("slab 0: sensed cells are collinear, thin-plate spline is undetermined");
  }
  double lambda;
  if (options.smoothing) {
    lambda = *options.smoothing;
  } else {
    const double h = mean_nearest_spacing(obs.mask());
    lambda = 1e-3 * h * h;
  }
  if (!(lambda >= 0.0)) throw PreconditionError("TPS smoothing must be nonnegative");

  Matrix A = Matrix::Zero(n + 3, n + 3);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double di = cells[a].i - cells[b].i, dj = cells[a].j - cells[b].j;
      A(a, b) = tps_kernel(std::sqrt(di * di + dj * dj));
    }
    A(a, a) += lambda;
  }
  A.topRightCorner(n, 3) = P;
  A.bottomLeftCorner(3, n) = P.transpose();

  // Every slab shares the system matrix; one factorization serves all K.
  Matrix rhs = Matrix::Zero(n + 3, grid.bins);
  rhs.topRows(n) = obs.fibers().transpose();
  const Eigen::PartialPivLU<Matrix> lu(A);
  const Matrix coef = lu.solve(rhs);
  if (!coef.allFinite()) {
    for (int k = 0; k < grid.bins; ++k) {
      if (!coef.col(k).allFinite()) throw NumericalError("slab " + std::to_string(k) + ": TPS system is singular");
    }
  }

  const int cellsN = grid.cells();
  Matrix E(cellsN, n + 3);
  for (int q = 0; q < cellsN; ++q) {
    const Cell c = cell_of(grid.cols, q);
    for (int a = 0; a < n; ++a) {
      const double di = c.i - cells[a].i, dj = c.j - cells[a].j;
      E(q, a) = tps_kernel(std::sqrt(di * di + dj * dj));
    }
    E(q, n) = 1.0;
    E(q, n + 1) = c.i;
    E(q, n + 2) = c.j;
  }
  Matrix values = (E * coef).transpose();
  return RadioMapTensor(grid, values.cwiseMax(0.0));
}

}  // namespace radiomap
