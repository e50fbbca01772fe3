#pragma once

// Alternating optimization of PSDs C and decoder latent codes Z against the
// sensed fibers: min ||G - C H(Z)||_F^2 with H(r, :) = vec(g(z_r)) on Omega.

#include <iosfwd>
#include <string>
#include <vector>

#include "radiomap/nasdac.hpp"

namespace radiomap {

enum class LatentInit : std::uint8_t {
  kReencode = 0,    // z_r = p(S_r), the completed Nasdac SLF fed back through the encoder
  kCompletion = 1,  // z_r = latent Nasdac used to complete S_r
};

struct DowJonsConfig {
  int max_iterations = 10;  // outer AO iterations
  double tolerance = 0.003; // relative objective change
  int inner_steps = 10;     // Adam steps on Z per outer iteration
  double step = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_halvings = 5;
  double ridge = 1e-8;  // C-update fallback when H loses row rank
  // Re-encoding a fully observed map is outside the masks the encoder saw in
  // training, so the default keeps Nasdac's own latent.
  LatentInit init = LatentInit::kCompletion;
  void validate() const;
};

/// Sensed-fiber view used by every DowJons block: G (K x |Omega|) and the
/// mask columns to read decoder outputs at.
struct FitProblem {
  Matrix G;
  std::vector<int> columns;
  static FitProblem from(const FiberObservations& obs);
};

/// H(r, m) = g(z_r)[columns[m]], R x |Omega|.
Matrix sensed_slfs(const Network& decoder, const Matrix& Z, const std::vector<int>& columns);

/// f = ||G - C H(Z)||_F^2.
double objective(const Network& decoder, const Matrix& Z, const Matrix& C, const FitProblem& p);

/// grad_Z f, D x R.
Matrix objective_grad_z(const Network& decoder, const Matrix& Z, const Matrix& C, const FitProblem& p);

struct CUpdate {
  Matrix C;
  double kkt_residual = 0.0;
  bool regularized = false;
};

/// Exact NNLS minimizer over C; falls back to a ridge-regularized Gram when
/// H is rank deficient.
CUpdate update_C(const Network& decoder, const Matrix& Z, const FitProblem& p, double ridge = 1e-8);

struct AdamState {
  Matrix m, v;
  long step = 0;
};

struct ZUpdate {
  Matrix Z;
  double objective = 0.0;
  int accepted_steps = 0;
  bool stalled = false;  // some step found no decrease after every halving
};

/// T safeguarded Adam steps on Z with C fixed. Each step is accepted only if
/// the objective does not increase; otherwise the step is halved.
ZUpdate update_Z(const Network& decoder, const Matrix& Z, const Matrix& C, const FitProblem& p, const DowJonsConfig& cfg,
                 AdamState& adam);

struct Stationarity {
  double grad_z_norm = 0.0;     // ||grad_Z f||_F
  double c_kkt_residual = 0.0;  // KKT violation of the C-subproblem at C
};

Stationarity stationarity_report(const Network& decoder, const Matrix& Z, const Matrix& C, const FitProblem& p);

struct DowJonsTraceRow {
  int iteration = 0;  // 0 is the Nasdac initialization
  double objective = 0.0;
  double grad_z_norm = 0.0;
  double c_kkt_residual = 0.0;
  double seconds = 0.0;
};

struct DowJonsResult {
  CompletionResult completion;
  Matrix Z;  // D x R
  Matrix C;  // K x R
  std::vector<DowJonsTraceRow> trace;
  bool stalled = false;
};

DowJonsResult dowjons(const FiberObservations& obs, int rank, const Autoencoder& ae, const DowJonsConfig& cfg = {},
                      const NasdacOptions& nasdac_options = {});

/// Alternation starting from explicit (Z, C); used by dowjons after its
/// Nasdac initialization.
DowJonsResult dowjons_from(const FiberObservations& obs, const Network& decoder, Matrix Z, Matrix C,
                           const DowJonsConfig& cfg);

void write_trace_csv(std::ostream& os, const std::vector<DowJonsTraceRow>& trace);

}  // namespace radiomap
