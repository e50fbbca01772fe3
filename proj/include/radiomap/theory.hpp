#pragma once

// Evaluators for the covering-number, generalization-gap and recovery-error
// bounds of the deep-prior completion criterion. All logarithms are natural.

#include <optional>
#include <string>
#include <vector>

namespace radiomap {

struct BoundInputs {
  int R = 1;
  int K = 1;
  int D = 1;
  double alpha = 1.0;    // bound on ||c_r||_2
  double beta = 1.0;     // bound on ||g(z_r)||_F
  double P = 1.0;        // Lipschitz product of the decoder
  double q = 1.0;        // latent radius
  double upsilon = 0.0;  // max |X| entry
  double nu = 0.0;       // max |N| entry
  double delta = 0.05;
  std::optional<double> c;  // defaults to 1 / R
  int omega = 1;            // |Omega|
  int I = 1;
  int J = 1;
  void validate() const;
  double c_value() const { return c ? *c : 1.0 / R; }
};

/// log N <= R(K+D) log(3R(alpha+beta)/eps) + RK log(alpha) + RD log(Pq).
double covering_log(const BoundInputs& in, double eps);

double gap_xi(const BoundInputs& in);
double gap_omega(const BoundInputs& in);

/// 2cR/sqrt|Omega| + (xi^2 omega / 2 (log 2 + log N(cR) - log delta))^(1/4),
/// with log N(cR) from covering_log floored at 0.
double gap_bound(const BoundInputs& in);

struct NoiseNorms {
  double full = 0.0;    // ||N||_F
  double sensed = 0.0;  // ||M * N||_F
};

struct BudgetTerm {
  std::string label;
  std::optional<double> value;
};

struct RecoveryBudget {
  std::vector<BudgetTerm> terms;  // noise, gap, representation
  std::optional<double> total;    // present only when every term is available
};

/// Right-hand side of the recovery bound for (1/sqrt(IJK)) ||X* - X||_F.
/// The representation term is unavailable when err_rep is not supplied.
RecoveryBudget recovery_budget(const BoundInputs& in, const NoiseNorms& noise, const std::optional<double>& err_rep);

}  // namespace radiomap
