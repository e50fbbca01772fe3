#include "radiomap/theory.hpp"

#include <cmath>

#include "radiomap/errors.hpp"

namespace radiomap {

void BoundInputs::validate() const {
  if (R < 1 || K < 1 || D < 1) throw PreconditionError("bound inputs: R, K and D must be positive");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw PreconditionError("bound inputs: alpha and beta must be positive");
  if (!(P > 0.0) || !(q > 0.0)) throw PreconditionError("bound inputs: P and q must be positive");
  if (!(upsilon >= 0.0) || !(nu >= 0.0)) throw PreconditionError("bound inputs: upsilon and nu must be nonnegative");
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("bound inputs: delta must lie in (0, 1)");
  if (c && !(*c > 0.0)) throw PreconditionError("bound inputs: c must be positive");
  if (I < 1 || J < 1) throw PreconditionError("bound inputs: I and J must be positive");
  if (omega < 1 || omega > I * J) throw PreconditionError("bound inputs: |Omega| must lie in [1, IJ]");
}

double covering_log(const BoundInputs& in, double eps) {
  in.validate();
  if (!(eps > 0.0)) throw PreconditionError("covering_log: eps must be positive");
  const double R = in.R, K = in.K, D = in.D;
  return R * (K + D) * std::log(3.0 * R * (in.alpha + in.beta) / eps) + R * K * std::log(in.alpha) +
         R * D * std::log(in.P * in.q);
}

double gap_xi(const BoundInputs& in) {
  const double t = std::sqrt(static_cast<double>(in.K)) * (in.upsilon + in.nu) + in.R * in.alpha * in.beta;
  return t * t / in.K;
}

double gap_omega(const BoundInputs& in) {
  const double n = in.omega, ij = static_cast<double>(in.I) * in.J;
  return 1.0 / n - 1.0 / ij + 1.0 / (ij * n);
}

double gap_bound(const BoundInputs& in) {
  in.validate();
  const double c = in.c_value();
  const double xi = gap_xi(in);
  // A covering number is at least 1, so its log bound is floored at 0.
  const double log_n = std::max(covering_log(in, c * in.R), 0.0);
  const double inner = xi * xi * gap_omega(in) / 2.0 * (std::log(2.0) + log_n - std::log(in.delta));
  return 2.0 * c * in.R / std::sqrt(static_cast<double>(in.omega)) + std::pow(inner, 0.25);
}

RecoveryBudget recovery_budget(const BoundInputs& in, const NoiseNorms& noise, const std::optional<double>& err_rep) {
  in.validate();
  const double full = std::sqrt(static_cast<double>(in.I) * in.J * in.K);
  const double sensed = std::sqrt(static_cast<double>(in.omega) * in.K);
  RecoveryBudget b;
  const NoiseNorms& n = noise;
  b.terms.push_back({"noise", n.full / full});
  b.terms.push_back({"gap", gap_bound(in)});
  if (err_rep) {
    b.terms.push_back({"representation", (n.sensed + *err_rep) / sensed});
  } else {
    b.terms.push_back({"representation", std::nullopt});
  }
  double total = 0.0;
  for (const BudgetTerm& t : b.terms) {
    if (!t.value) return b;
    total += *t.value;
  }
  b.total = total;
  return b;
}

}  // namespace radiomap
