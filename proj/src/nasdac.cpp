#include "radiomap/nasdac.hpp"

#include <chrono>

namespace radiomap {

namespace {
using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }
}  // namespace

Disaggregation disaggregate(const Matrix& G, int rank, const SpaOptions& options) {
  // SPA runs on G^T so that the candidate columns are frequency bins: a bin
  // owned by one emitter is a scaled copy of that emitter's sensed SLF.
  Disaggregation d;
  d.spa = spa(G.transpose(), rank, options);
  d.H = d.spa.A.transpose();
  d.C = d.spa.B.transpose().cwiseMax(0.0);
  return d;
}

std::vector<double> model_order_residuals(const Matrix& G, int max_rank) {
  std::vector<double> out;
  const double norm = G.norm();
  const int cap = std::min<int>(max_rank, static_cast<int>(std::min(G.rows(), G.cols())));
  for (int r = 1; r <= cap; ++r) {
    const Disaggregation d = disaggregate(G, r, {SpaOptions::RankPolicy::kZeroExtra, 1e-9, false});
    out.push_back(norm > 0.0 ? (G - d.C * d.H).norm() / norm : 0.0);
  }
  return out;
}

CompletionResult nasdac(const FiberObservations& obs, int rank, const Autoencoder& ae, const NasdacOptions& options) {
  const auto t0 = Clock::now();
  const GridSpec& grid = obs.grid();
  const SensingMask& mask = obs.mask();
  if (rank < 1) throw PreconditionError("rank must be at least 1");
  if (mask.size() < rank) {
    throw PreconditionError("only " + std::to_string(mask.size()) + " sensed fibers for R = " + std::to_string(rank) +
                            " emitters; disaggregation needs |Omega| >= R");
  }
  if (rank > grid.bins) {
    throw PreconditionError("R = " + std::to_string(rank) + " exceeds the " + std::to_string(grid.bins) + " frequency bins");
  }
  if (grid.rows != ae.arch.rows || grid.cols != ae.arch.cols) {
    throw ShapeError("network grid " + std::to_string(ae.arch.rows) + "x" + std::to_string(ae.arch.cols) +
                     " does not match observation grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
  }

  CompletionResult out;
  CompletionDiagnostics& diag = out.diagnostics;
  const Matrix G = extract_G(obs);
  const Disaggregation d = disaggregate(G, rank, options.spa);
  diag.spa_indices = d.spa.indices;
  diag.numerical_rank = d.spa.numerical_rank;
  const double gnorm = G.norm();
  diag.fit_residual = gnorm > 0.0 ? (G - d.C * d.H).norm() / gnorm : 0.0;
  if (d.spa.numerical_rank < rank) {
    diag.warnings.push_back("numerical rank " + std::to_string(d.spa.numerical_rank) + " below R = " + std::to_string(rank) +
                            "; extra components set to zero");
  }
  if (options.scan_max_rank > 0) diag.rank_residuals = model_order_residuals(G, options.scan_max_rank);
  diag.disaggregation_seconds = seconds_since(t0);

  const auto t1 = Clock::now();
  const std::vector<Slf> incomplete = scatter_rows(d.H.cwiseMax(0.0), mask);
  std::vector<Slf> slfs;
  std::vector<Psd> psds;
  for (int r = 0; r < rank; ++r) {
    const SlfCompletion c = complete_slf(ae, incomplete[r], mask);
    slfs.push_back(c.scaled());
    psds.emplace_back(Vector(d.C.col(r)));
    diag.completion_scales.push_back(c.scale);
  }
  diag.completion_seconds = seconds_since(t1);

  out.estimate = assemble(slfs, psds);
  out.slfs = std::move(slfs);
  out.psds = std::move(psds);
  diag.total_seconds = seconds_since(t0);
  return out;
}

}  // namespace radiomap
