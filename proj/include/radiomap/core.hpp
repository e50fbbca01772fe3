#pragma once

// Domain types shared by every module: grids, radio-map tensors, per-emitter
// factors, sensing masks and fiber observations.
//
// Indexing convention: cells are (i, j) with 0 <= i < rows, 0 <= j < cols.
// The flat column index used by unfoldings, vectorized SLFs and mask columns
// is q = cols * i + j (row-major). For square grids this is the usual
// q = I(i-1) + j written with one-based indices.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "radiomap/errors.hpp"

namespace radiomap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using GridMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GridSpec {
  int rows = 0;  // I
  int cols = 0;  // J
  int bins = 0;  // K

  int cells() const { return rows * cols; }
  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

struct Cell {
  int i = 0;
  int j = 0;
  bool operator==(const Cell&) const = default;
};

inline int flat_index(int cols, Cell c) { return cols * c.i + c.j; }
inline Cell cell_of(int cols, int q) { return Cell{q / cols, q % cols}; }

/// Dense I x J x K nonnegative power field. Stored unfolded as a K x IJ
/// matrix whose column q is the fiber X(i, j, :).
class RadioMapTensor {
 public:
  RadioMapTensor() = default;
  explicit RadioMapTensor(GridSpec grid);
  /// Throws ShapeError on a dimension mismatch and PreconditionError on
  /// negative or non-finite entries.
  RadioMapTensor(GridSpec grid, Matrix unfolded);

  const GridSpec& grid() const { return grid_; }
  double operator()(int i, int j, int k) const { return data_(k, flat_index(grid_.cols, {i, j})); }
  Vector fiber(Cell c) const { return data_.col(flat_index(grid_.cols, c)); }
  const Matrix& unfolded() const { return data_; }
  double squared_norm() const { return data_.squaredNorm(); }

 private:
  GridSpec grid_{};
  Matrix data_;
};

/// Spatial loss field of one emitter, I x J, nonnegative.
class Slf {
 public:
  Slf() = default;
  explicit Slf(GridMatrix values);
  static Slf from_vec(int rows, int cols, const Vector& v);

  int rows() const { return static_cast<int>(values_.rows()); }
  int cols() const { return static_cast<int>(values_.cols()); }
  const GridMatrix& values() const { return values_; }
  double operator()(int i, int j) const { return values_(i, j); }
  /// Row-major vectorization, entry q = cols * i + j.
  Vector vec() const;

 private:
  GridMatrix values_;
};

/// Power spectral density of one emitter, length K, nonnegative.
class Psd {
 public:
  Psd() = default;
  explicit Psd(Vector values);
  int bins() const { return static_cast<int>(values_.size()); }
  const Vector& values() const { return values_; }
  double operator()(int k) const { return values_(k); }

 private:
  Vector values_;
};

/// The sampled cell set. Cells are kept sorted by flat index so that the
/// column order of every derived matrix is reproducible.
class SensingMask {
 public:
  SensingMask() = default;
  SensingMask(int rows, int cols, std::vector<Cell> cells);
  static SensingMask full(int rows, int cols);
  static SensingMask from_flat(int rows, int cols, const std::vector<int>& flat);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return static_cast<int>(cells_.size()); }
  const std::vector<Cell>& cells() const { return cells_; }
  /// Flat indices of the sensed cells in mask order.
  const std::vector<int>& columns() const { return columns_; }
  bool contains(Cell c) const;
  /// Position of a cell within the mask order, if sensed.
  std::optional<int> position(Cell c) const;
  /// Dense 0/1 indicator, row-major I x J.
  GridMatrix indicator() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Cell> cells_;
  std::vector<int> columns_;
  std::vector<int> lookup_;  // flat index -> mask position or -1
};

/// Observed fibers Y(i, j, :) at the mask cells, stored K x |Omega| in mask
/// order.
class FiberObservations {
 public:
  FiberObservations() = default;
  FiberObservations(GridSpec grid, SensingMask mask, Matrix fibers);

  const GridSpec& grid() const { return grid_; }
  const SensingMask& mask() const { return mask_; }
  const Matrix& fibers() const { return fibers_; }

 private:
  GridSpec grid_{};
  SensingMask mask_;
  Matrix fibers_;
};

/// C (K x R) and S (R x IJ), both nonnegative.
struct FactorModel {
  Matrix C;
  Matrix S;

  int rank() const { return static_cast<int>(C.cols()); }
  void validate() const;
};

RadioMapTensor assemble(std::span<const Slf> slfs, std::span<const Psd> psds);
RadioMapTensor assemble(const GridSpec& grid, const FactorModel& factors);

Matrix unfold(const RadioMapTensor& x);
RadioMapTensor fold(const GridSpec& grid, const Matrix& unfolded);

/// Samples a tensor at the mask cells (noiseless sensing).
FiberObservations observe(const RadioMapTensor& x, const SensingMask& mask);

/// G = Y(:, Omega_col), K x |Omega|.
Matrix extract_G(const FiberObservations& obs);

/// Scatters the rows of H (R x |Omega|) back onto the grid; unsensed cells
/// are zero.
std::vector<Slf> scatter_rows(const Matrix& H, const SensingMask& mask);

std::vector<Slf> slfs_from_rows(const Matrix& S, int rows, int cols);
std::vector<Psd> psds_from_columns(const Matrix& C);

}  // namespace radiomap
