#pragma once

// Two-stage completion: separable NMF of the sensed fibers followed by
// per-emitter SLF completion through the learned prior.

#include <string>
#include <vector>

#include "radiomap/core.hpp"
#include "radiomap/factor.hpp"
#include "radiomap/neural.hpp"

namespace radiomap {

struct CompletionDiagnostics {
  double disaggregation_seconds = 0.0;
  double completion_seconds = 0.0;
  double total_seconds = 0.0;
  std::vector<int> spa_indices;  // zero-based frequency bins picked by SPA
  int numerical_rank = 0;
  double fit_residual = 0.0;             // ||G - C H||_F / ||G||_F on the sensed fibers
  std::vector<double> rank_residuals;    // same residual for candidate ranks 1..n
  std::vector<double> completion_scales; // gain fitted to each incomplete SLF
  std::vector<std::string> warnings;
};

struct CompletionResult {
  RadioMapTensor estimate;
  std::vector<Slf> slfs;
  std::vector<Psd> psds;
  CompletionDiagnostics diagnostics;
};

struct NasdacOptions {
  /// Extra selections beyond the numerical rank get zero PSDs by default so
  /// that an overestimated R degrades gracefully.
  SpaOptions spa{SpaOptions::RankPolicy::kZeroExtra, 1e-9, false};
  /// When positive, also report the NMF residual for ranks 1..scan_max_rank.
  int scan_max_rank = 0;
};

/// Relative NMF residual of SPA at each rank 1..max_rank.
std::vector<double> model_order_residuals(const Matrix& G, int max_rank);

CompletionResult nasdac(const FiberObservations& obs, int rank, const Autoencoder& ae, const NasdacOptions& options = {});

/// Stage 1 only: C (K x R) and H (R x |Omega|) with G ~= C H.
struct Disaggregation {
  Matrix C;
  Matrix H;
  SpaResult spa;
};
Disaggregation disaggregate(const Matrix& G, int rank, const SpaOptions& options);

}  // namespace radiomap
