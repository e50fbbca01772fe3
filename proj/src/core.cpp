#include "radiomap/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace radiomap {

namespace {

template <typename Derived>
void require_nonnegative(const Eigen::DenseBase<Derived>& m, const char* what) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double v = m(r, c);
      if (!std::isfinite(v) || v < 0.0) {
        throw PreconditionError(std::string(what) + ": entry (" + std::to_string(r) + ", " +
                                std::to_string(c) + ") = " + std::to_string(v) +
                                " is negative or non-finite");
      }
    }
  }
}

}  // namespace

void GridSpec::validate() const {
  if (rows < 1 || cols < 1 || bins < 1) {
    throw ShapeError("grid dimensions must be positive, got " + std::to_string(rows) + "x" +
                     std::to_string(cols) + "x" + std::to_string(bins));
  }
}

RadioMapTensor::RadioMapTensor(GridSpec grid) : grid_(grid) {
  grid_.validate();
  data_ = Matrix::Zero(grid_.bins, grid_.cells());
}

RadioMapTensor::RadioMapTensor(GridSpec grid, Matrix unfolded) : grid_(grid), data_(std::move(unfolded)) {
  grid_.validate();
  if (data_.rows() != grid_.bins || data_.cols() != grid_.cells()) {
    throw ShapeError("unfolded tensor must be " + std::to_string(grid_.bins) + "x" +
                     std::to_string(grid_.cells()));
  }
  require_nonnegative(data_, "radio map tensor");
}

Slf::Slf(GridMatrix values) : values_(std::move(values)) { require_nonnegative(values_, "SLF"); }

Slf Slf::from_vec(int rows, int cols, const Vector& v) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw ShapeError("SLF vector length " + std::to_string(v.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Slf(Eigen::Map<const GridMatrix>(v.data(), rows, cols));
}

Vector Slf::vec() const { return Eigen::Map<const Vector>(values_.data(), values_.size()); }

Psd::Psd(Vector values) : values_(std::move(values)) { require_nonnegative(values_, "PSD"); }

SensingMask::SensingMask(int rows, int cols, std::vector<Cell> cells)
    : rows_(rows), cols_(cols), cells_(std::move(cells)) {
  if (rows_ < 1 || cols_ < 1) throw ShapeError("mask grid must be nonempty");
  if (cells_.empty()) throw PreconditionError("sensing mask must contain at least one cell");
  lookup_.assign(static_cast<size_t>(rows_) * cols_, -1);
  for (const Cell& c : cells_) {
    if (c.i < 0 || c.i >= rows_ || c.j < 0 || c.j >= cols_) {
      throw PreconditionError("mask cell (" + std::to_string(c.i) + ", " + std::to_string(c.j) +
                              ") outside the grid");
    }
  }
  std::sort(cells_.begin(), cells_.end(), [cols = cols_](const Cell& a, const Cell& b) {
    return flat_index(cols, a) < flat_index(cols, b);
  });
  columns_.reserve(cells_.size());
  for (size_t m = 0; m < cells_.size(); ++m) {
    const int q = flat_index(cols_, cells_[m]);
    if (lookup_[q] != -1) {
      throw PreconditionError("duplicate mask cell (" + std::to_string(cells_[m].i) + ", " +
                              std::to_string(cells_[m].j) + ")");
    }
    lookup_[q] = static_cast<int>(m);
    columns_.push_back(q);
  }
}

SensingMask SensingMask::full(int rows, int cols) {
  std::vector<Cell> cells;
  cells.reserve(static_cast<size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) cells.push_back({i, j});
  return SensingMask(rows, cols, std::move(cells));
}

SensingMask SensingMask::from_flat(int rows, int cols, const std::vector<int>& flat) {
  std::vector<Cell> cells;
  cells.reserve(flat.size());
  for (int q : flat) {
    if (q < 0 || q >= rows * cols) throw PreconditionError("flat index " + std::to_string(q) + " outside the grid");
    cells.push_back(cell_of(cols, q));
  }
  return SensingMask(rows, cols, std::move(cells));
}

bool SensingMask::contains(Cell c) const { return position(c).has_value(); }

std::optional<int> SensingMask::position(Cell c) const {
  if (c.i < 0 || c.i >= rows_ || c.j < 0 || c.j >= cols_) return std::nullopt;
  const int m = lookup_[flat_index(cols_, c)];
  if (m < 0) return std::nullopt;
  return m;
}

GridMatrix SensingMask::indicator() const {
  GridMatrix m = GridMatrix::Zero(rows_, cols_);
  for (const Cell& c : cells_) m(c.i, c.j) = 1.0;
  return m;
}

FiberObservations::FiberObservations(GridSpec grid, SensingMask mask, Matrix fibers)
    : grid_(grid), mask_(std::move(mask)), fibers_(std::move(fibers)) {
  grid_.validate();
  if (mask_.rows() != grid_.rows || mask_.cols() != grid_.cols) {
    throw ShapeError("mask grid does not match observation grid");
  }
  if (fibers_.rows() != grid_.bins || fibers_.cols() != mask_.size()) {
    throw ShapeError("observations must hold one length-" + std::to_string(grid_.bins) +
                     " fiber per mask cell (" + std::to_string(mask_.size()) + ")");
  }
  if (!fibers_.allFinite()) throw PreconditionError("observed fibers contain non-finite entries");
}

void FactorModel::validate() const {
  if (C.cols() != S.rows()) {
    throw ShapeError("factor rank mismatch: C has " + std::to_string(C.cols()) + " columns, S has " +
                     std::to_string(S.rows()) + " rows");
  }
  require_nonnegative(C, "factor C");
  require_nonnegative(S, "factor S");
}

RadioMapTensor assemble(std::span<const Slf> slfs, std::span<const Psd> psds) {
  if (slfs.empty() || slfs.size() != psds.size()) {
    throw ShapeError("assemble needs equal, nonzero numbers of SLFs and PSDs (got " +
                     std::to_string(slfs.size()) + " and " + std::to_string(psds.size()) + ")");
  }
  const GridSpec grid{slfs[0].rows(), slfs[0].cols(), psds[0].bins()};
  grid.validate();
  FactorModel f;
  f.C.resize(grid.bins, static_cast<Eigen::Index>(psds.size()));
  f.S.resize(static_cast<Eigen::Index>(slfs.size()), grid.cells());
  for (size_t r = 0; r < slfs.size(); ++r) {
    if (slfs[r].rows() != grid.rows || slfs[r].cols() != grid.cols) {
      throw ShapeError("SLF " + std::to_string(r) + " has inconsistent grid shape");
    }
    if (psds[r].bins() != grid.bins) throw ShapeError("PSD " + std::to_string(r) + " has inconsistent length");
    f.C.col(static_cast<Eigen::Index>(r)) = psds[r].values();
    f.S.row(static_cast<Eigen::Index>(r)) = slfs[r].vec().transpose();
  }
  return assemble(grid, f);
}

RadioMapTensor assemble(const GridSpec& grid, const FactorModel& factors) {
  if (factors.C.rows() != grid.bins || factors.S.cols() != grid.cells() || factors.C.cols() != factors.S.rows()) {
    throw ShapeError("factor shapes do not match the grid");
  }
  return RadioMapTensor(grid, factors.C * factors.S);
}

Matrix unfold(const RadioMapTensor& x) { return x.unfolded(); }

RadioMapTensor fold(const GridSpec& grid, const Matrix& unfolded) { return RadioMapTensor(grid, unfolded); }

FiberObservations observe(const RadioMapTensor& x, const SensingMask& mask) {
  const auto& cols = mask.columns();
  Matrix fibers(x.grid().bins, mask.size());
  for (int m = 0; m < mask.size(); ++m) fibers.col(m) = x.unfolded().col(cols[m]);
  return FiberObservations(x.grid(), mask, std::move(fibers));
}

Matrix extract_G(const FiberObservations& obs) { return obs.fibers(); }

std::vector<Slf> scatter_rows(const Matrix& H, const SensingMask& mask) {
  if (H.cols() != mask.size()) {
    throw ShapeError("H has " + std::to_string(H.cols()) + " columns but the mask has " +
                     std::to_string(mask.size()) + " cells");
  }
  std::vector<Slf> out;
  out.reserve(static_cast<size_t>(H.rows()));
  for (Eigen::Index r = 0; r < H.rows(); ++r) {
    GridMatrix p = GridMatrix::Zero(mask.rows(), mask.cols());
    for (int m = 0; m < mask.size(); ++m) {
      const Cell c = mask.cells()[m];
      p(c.i, c.j) = H(r, m);
    }
    out.emplace_back(std::move(p));
  }
  return out;
}

std::vector<Slf> slfs_from_rows(const Matrix& S, int rows, int cols) {
  std::vector<Slf> out;
  out.reserve(static_cast<size_t>(S.rows()));
  for (Eigen::Index r = 0; r < S.rows(); ++r) out.push_back(Slf::from_vec(rows, cols, S.row(r).transpose()));
  return out;
}

std::vector<Psd> psds_from_columns(const Matrix& C) {
  std::vector<Psd> out;
  out.reserve(static_cast<size_t>(C.cols()));
  for (Eigen::Index r = 0; r < C.cols(); ++r) out.emplace_back(C.col(r));
  return out;
}

}  // namespace radiomap
