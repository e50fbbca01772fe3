#include "radiomap/factor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace radiomap {

namespace {

Matrix orthonormal_basis(const Matrix& E) {
  Eigen::HouseholderQR<Matrix> qr(E);
  return qr.householderQ() * Matrix::Identity(E.rows(), E.cols());
}

}  // namespace

SpaResult spa(const Matrix& F, int rank, const SpaOptions& options) {
  const Eigen::Index M = F.rows();
  if (rank < 1 || rank > std::min<Eigen::Index>(M, F.cols())) {
    throw PreconditionError("SPA rank " + std::to_string(rank) + " must lie in [1, min(M, N)]");
  }
  if (!F.allFinite() || (F.array() < 0.0).any()) throw PreconditionError("SPA input must be finite and nonnegative");

  // Drop all-zero columns, remembering where the rest came from.
  std::vector<int> kept;
  std::vector<double> l1;
  for (Eigen::Index c = 0; c < F.cols(); ++c) {
    const double n = F.col(c).lpNorm<1>();
    if (n > 0.0) {
      kept.push_back(static_cast<int>(c));
      l1.push_back(n);
    }
  }
  const Eigen::Index N = static_cast<Eigen::Index>(kept.size());
  if (N < rank) {
    throw PreconditionError("SPA needs at least " + std::to_string(rank) + " nonzero columns, found " + std::to_string(N));
  }
  Matrix Fn(M, N);
  for (Eigen::Index c = 0; c < N; ++c) Fn.col(c) = F.col(kept[c]) / l1[c];

  std::vector<int> chosen;  // positions within Fn
  std::vector<char> taken(static_cast<size_t>(N), 0);
  Matrix residual = Fn;
  double first_norm = 0.0;
  int numerical_rank = rank;
  for (int r = 0; r < rank; ++r) {
    Eigen::Index best = -1;
    double best_norm = -1.0;
    for (Eigen::Index c = 0; c < N; ++c) {
      if (taken[c]) continue;
      const double v = residual.col(c).squaredNorm();
      if (v > best_norm) {
        best_norm = v;
        best = c;
      }
    }
    best_norm = std::sqrt(best_norm);
    if (r == 0) first_norm = best_norm;
    const bool dependent = first_norm == 0.0 || best_norm <= options.rank_tolerance * first_norm;
    if (dependent && numerical_rank == rank) {
      if (options.rank_policy == SpaOptions::RankPolicy::kThrow) {
        throw NumericalError("SPA iteration " + std::to_string(r + 1) + ": selected column " +
                             std::to_string(kept[best]) + " is numerically dependent on earlier selections " +
                             "(projected norm " + std::to_string(best_norm) + ", singular projection)");
      }
      numerical_rank = r;
    }
    chosen.push_back(static_cast<int>(best));
    taken[best] = 1;
    if (numerical_rank == rank) {
      Matrix E(M, r + 1);
      for (int t = 0; t <= r; ++t) E.col(t) = Fn.col(chosen[t]);
      const Matrix Q = orthonormal_basis(E);
      residual = Fn - Q * (Q.transpose() * Fn);
    }
  }

  SpaResult out;
  out.numerical_rank = numerical_rank;
  out.A.resize(M, rank);
  for (int r = 0; r < rank; ++r) {
    out.indices.push_back(kept[chosen[r]]);
    out.A.col(r) = Fn.col(chosen[r]);
  }

  const Matrix A_ind = out.A.leftCols(numerical_rank);
  Matrix B_norm;
  if (options.nonnegative_coefficients) {
    B_norm = nnls(Fn.transpose(), A_ind.transpose()).C.transpose();
  } else {
    B_norm = A_ind.colPivHouseholderQr().solve(Fn);
  }
  out.B = Matrix::Zero(rank, F.cols());
  for (Eigen::Index c = 0; c < N; ++c) out.B.col(kept[c]).head(numerical_rank) = B_norm.col(c) * l1[c];
  return out;
}

double nnls_kkt_residual(const Matrix& gram, const Vector& rhs, const Vector& x) {
  const Vector grad = gram * x - rhs;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double v = x(j) > 0.0 ? std::abs(grad(j)) : std::max(0.0, -grad(j));
    worst = std::max(worst, v);
  }
  return worst;
}

namespace {

struct RowSolve {
  Vector x;
  int steps = 0;
  bool converged = true;
};

// Lawson-Hanson active set in Gram form for one right-hand side.
RowSolve lawson_hanson(const Matrix& gram, const Vector& rhs, int max_steps, double tol) {
  const Eigen::Index n = rhs.size();
  RowSolve out;
  out.x = Vector::Zero(n);
  std::vector<char> passive(static_cast<size_t>(n), 0);

  auto solve_passive = [&](Vector& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(j);
    const Eigen::Index p = static_cast<Eigen::Index>(idx.size());
    Matrix sub(p, p);
    Vector b(p);
    for (Eigen::Index a = 0; a < p; ++a) {
      b(a) = rhs(idx[a]);
      for (Eigen::Index c = 0; c < p; ++c) sub(a, c) = gram(idx[a], idx[c]);
    }
    const Vector s = sub.ldlt().solve(b);
    z.setZero(n);
    for (Eigen::Index a = 0; a < p; ++a) z(idx[a]) = s(a);
  };

  Vector w = rhs;
  while (true) {
    Eigen::Index j_max = -1;
    double w_max = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w(j) > w_max) {
        w_max = w(j);
        j_max = j;
      }
    }
    if (j_max < 0) break;
    if (out.steps >= max_steps) {
      out.converged = false;
      break;
    }
    ++out.steps;
    passive[j_max] = 1;
    Vector z;
    solve_passive(z);
    int guard = 0;
    while (true) {
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && z(j) <= 0.0) feasible = false;
      if (feasible || ++guard > 4 * n + 4) break;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z(j) <= 0.0) alpha = std::min(alpha, out.x(j) / (out.x(j) - z(j)));
      }
      out.x += alpha * (z - out.x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && out.x(j) <= 1e-15 * (1.0 + std::abs(z(j)))) {
          passive[j] = 0;
          out.x(j) = 0.0;
        }
      }
      solve_passive(z);
    }
    out.x = z;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[j]) out.x(j) = 0.0;
    w = rhs - gram * out.x;
  }
  return out;
}

}  // namespace

NnlsResult nnls(const Matrix& G, const Matrix& H, const NnlsOptions& options) {
  if (G.cols() != H.cols()) {
    throw ShapeError("nnls: G has " + std::to_string(G.cols()) + " columns, H has " + std::to_string(H.cols()));
  }
  const Eigen::Index R = H.rows();
  if (R < 1) throw ShapeError("nnls: H has no rows");
  Matrix gram = H * H.transpose();
  if (options.ridge > 0.0) gram.diagonal().array() += options.ridge;

  Eigen::ColPivHouseholderQR<Matrix> rank_check(gram);
  rank_check.setThreshold(options.rank_tolerance);
  if (rank_check.rank() < R) {
    throw PreconditionError("nnls: H (" + std::to_string(R) + " rows) is not of full row rank (numerical rank " +
                            std::to_string(rank_check.rank()) + ")");
  }

  const Matrix rhs_all = H * G.transpose();  // R x K
  const double scale = std::max(1.0, rhs_all.cwiseAbs().maxCoeff());
  const double tol = 1e-14 * scale;
  const int cap = 3 * static_cast<int>(R);

  NnlsResult out{Matrix::Zero(G.rows(), R), 0.0, 0};
  bool failed = false;
  for (Eigen::Index k = 0; k < G.rows(); ++k) {
    const Vector rhs = rhs_all.col(k);
    RowSolve row = lawson_hanson(gram, rhs, cap, tol);
    out.C.row(k) = row.x.transpose();
    out.iterations = std::max(out.iterations, row.steps);
    out.kkt_residual = std::max(out.kkt_residual, nnls_kkt_residual(gram, rhs, row.x));
    failed = failed || !row.converged;
  }
  if (failed) {
    throw NnlsError("nnls: active-set iteration cap (" + std::to_string(cap) + ") reached; KKT residual " +
                        std::to_string(out.kkt_residual),
                    out.C, out.kkt_residual);
  }
  return out;
}

std::vector<int> hungarian(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) throw ShapeError("hungarian: more rows than columns");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

Alignment align_columns(const Matrix& C_hat, const Matrix& C_true) {
  if (C_hat.cols() != C_true.cols() || C_hat.rows() != C_true.rows()) {
    throw ShapeError("align_columns: estimate and truth must have equal shapes");
  }
  const Eigen::Index R = C_true.cols();
  Vector hat_l1(R), true_l1(R);
  for (Eigen::Index r = 0; r < R; ++r) {
    hat_l1(r) = C_hat.col(r).lpNorm<1>();
    true_l1(r) = C_true.col(r).lpNorm<1>();
  }
  Matrix cost(R, R);
  for (Eigen::Index t = 0; t < R; ++t) {
    for (Eigen::Index h = 0; h < R; ++h) {
      const Vector a = true_l1(t) > 0 ? Vector(C_true.col(t) / true_l1(t)) : Vector(C_true.col(t));
      const Vector b = hat_l1(h) > 0 ? Vector(C_hat.col(h) / hat_l1(h)) : Vector(C_hat.col(h));
      cost(t, h) = (a - b).lpNorm<1>();
    }
  }
  Alignment out;
  out.permutation = hungarian(cost);
  for (Eigen::Index t = 0; t < R; ++t) {
    const int h = out.permutation[t];
    out.cost += cost(t, h);
    out.scales.push_back(true_l1(t) > 0 ? hat_l1(h) / true_l1(t) : 0.0);
  }
  return out;
}

}  // namespace radiomap
