#pragma once

// Separable NMF by successive projection, Lawson-Hanson NNLS and optimal
// column alignment.

#include <vector>

#include "radiomap/core.hpp"

namespace radiomap {

struct SpaOptions {
  enum class RankPolicy {
    kThrow,      // a numerically dependent selection raises NumericalError
    kZeroExtra,  // selections past the numerical rank get zero coefficients
  };
  RankPolicy rank_policy = RankPolicy::kThrow;
  /// A selection is dependent when its projected norm falls below
  /// rank_tolerance times the first selected norm.
  double rank_tolerance = 1e-9;
  /// Solve the coefficient step with NNLS instead of plain least squares.
  bool nonnegative_coefficients = false;
};

struct SpaResult {
  std::vector<int> indices;  // selected columns of F, in selection order
  Matrix A;                  // M x R, l1-normalized F(:, indices)
  Matrix B;                  // R x N with A * B ~= F (original column scaling)
  int numerical_rank = 0;
};

/// Successive projection on the l1-normalized columns of F (M x N, F >= 0).
SpaResult spa(const Matrix& F, int rank, const SpaOptions& options = {});

struct NnlsOptions {
  double ridge = 0.0;           // added to the Gram diagonal
  double rank_tolerance = 1e-12;  // relative pivot threshold for the row-rank check
};

struct NnlsResult {
  Matrix C;             // K x R, nonnegative
  double kkt_residual;  // max over rows of the KKT violation
  int iterations;       // largest active-set step count over rows
};

/// Raised when an active-set solve hits its iteration cap.
class NnlsError : public NumericalError {
 public:
  NnlsError(const std::string& what, Matrix best, double residual)
      : NumericalError(what), best_(std::move(best)), residual_(residual) {}
  const Matrix& best() const { return best_; }
  double residual() const { return residual_; }

 private:
  Matrix best_;
  double residual_;
};

/// Row-wise argmin_{c >= 0} ||g - H^T c||^2 for every row g of G (K x N),
/// H is R x N with full row rank.
NnlsResult nnls(const Matrix& G, const Matrix& H, const NnlsOptions& options = {});

/// KKT violation of x for min 0.5 ||A x - b||^2, x >= 0, written in Gram form
/// (gram = A^T A, rhs = A^T b).
double nnls_kkt_residual(const Matrix& gram, const Vector& rhs, const Vector& x);

/// Minimum-cost assignment of rows to columns for an n x m cost matrix with
/// n <= m. Returns the column assigned to each row.
std::vector<int> hungarian(const Matrix& cost);

struct Alignment {
  std::vector<int> permutation;  // estimate column matched to each true column
  std::vector<double> scales;    // ||hat_r||_1 / ||true_r||_1 for the matched pair
  double cost = 0.0;             // total l1 distance of the normalized columns
};

/// Matches columns of C_hat to columns of C_true by minimizing the total l1
/// distance between l1-normalized columns.
Alignment align_columns(const Matrix& C_hat, const Matrix& C_true);

}  // namespace radiomap
