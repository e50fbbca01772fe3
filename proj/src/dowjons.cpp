#include "radiomap/dowjons.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace radiomap {

namespace {
using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void check_shapes(const Network& decoder, const Matrix& Z, const Matrix& C, const FitProblem& p) {
  if (Z.rows() != decoder.input_shape().size()) throw ShapeError("latent codes do not match the decoder input size");
  if (C.cols() != Z.cols()) throw ShapeError("C and Z disagree on R");
  if (C.rows() != p.G.rows()) throw ShapeError("C rows do not match the number of frequency bins");
}

double max_kkt(const Matrix& G, const Matrix& H, const Matrix& C) {
  const Matrix gram = H * H.transpose();
  const Matrix rhs = H * G.transpose();  // R x K
  double worst = 0.0;
  for (Eigen::Index k = 0; k < C.rows(); ++k) {
    worst = std::max(worst, nnls_kkt_residual(gram, rhs.col(k), C.row(k).transpose()));
  }
  return worst;
}
}  // namespace

void DowJonsConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("dowjons.max_iterations must be >= 1");
  if (inner_steps < 1) throw ConfigError("dowjons.inner_steps must be >= 1");
  if (!(tolerance > 0.0)) throw ConfigError("dowjons.tolerance must be positive");
  if (!(step > 0.0)) throw ConfigError("dowjons.step must be positive");
  if (max_halvings < 0) throw ConfigError("dowjons.max_halvings must be >= 0");
  if (!(ridge >= 0.0)) throw ConfigError("dowjons.ridge must be nonnegative");
}

FitProblem FitProblem::from(const FiberObservations& obs) { return {extract_G(obs), obs.mask().columns()}; }

Matrix sensed_slfs(const Network& decoder, const Matrix& Z, const std::vector<int>& columns) {
  const Matrix out = decoder.forward(Z);  // IJ x R
  Matrix H(Z.cols(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t m = 0; m < columns.size(); ++m) H.col(static_cast<Eigen::Index>(m)) = out.row(columns[m]).transpose();
  return H;
}

double objective(const Network& decoder, const Matrix& Z, const Matrix& C, const FitProblem& p) {
  check_shapes(decoder, Z, C, p);
  return (p.G - C * sensed_slfs(decoder, Z, p.columns)).squaredNorm();
}

Matrix objective_grad_z(const Network& decoder, const Matrix& Z, const Matrix& C, const FitProblem& p) {
  check_shapes(decoder, Z, C, p);
  Tape tape;
  const Matrix out = decoder.forward(Z, tape);
  Matrix H(Z.cols(), static_cast<Eigen::Index>(p.columns.size()));
  for (std::size_t m = 0; m < p.columns.size(); ++m) H.col(static_cast<Eigen::Index>(m)) = out.row(p.columns[m]).transpose();
  const Matrix dH = -2.0 * C.transpose() * (p.G - C * H);  // R x |Omega|
  Matrix cot = Matrix::Zero(out.rows(), out.cols());
  for (std::size_t m = 0; m < p.columns.size(); ++m) cot.row(p.columns[m]) = dH.col(static_cast<Eigen::Index>(m)).transpose();
  return decoder.backward(tape, cot, nullptr);
}

CUpdate update_C(const Network& decoder, const Matrix& Z, const FitProblem& p, double ridge) {
  const Matrix H = sensed_slfs(decoder, Z, p.columns);
  CUpdate out;
  try {
    const NnlsResult r = nnls(p.G, H);
    out.C = r.C;
    out.kkt_residual = r.kkt_residual;
  } catch (const PreconditionError&) {
    NnlsOptions opts;
    opts.ridge = ridge;
    opts.rank_tolerance = 0.0;
    const NnlsResult r = nnls(p.G, H, opts);
    out.C = r.C;
    out.kkt_residual = r.kkt_residual;
    out.regularized = true;
  }
  return out;
}

ZUpdate update_Z(const Network& decoder, const Matrix& Z, const Matrix& C, const FitProblem& p, const DowJonsConfig& cfg,
                 AdamState& adam) {
  if (adam.m.rows() != Z.rows() || adam.m.cols() != Z.cols()) {
    adam.m = Matrix::Zero(Z.rows(), Z.cols());
    adam.v = Matrix::Zero(Z.rows(), Z.cols());
    adam.step = 0;
  }
  ZUpdate out;
  out.Z = Z;
  out.objective = objective(decoder, Z, C, p);
  for (int t = 0; t < cfg.inner_steps; ++t) {
    const Matrix grad = objective_grad_z(decoder, out.Z, C, p);
    if (grad.squaredNorm() == 0.0) break;
    ++adam.step;
    adam.m = cfg.beta1 * adam.m + (1.0 - cfg.beta1) * grad;
    adam.v = cfg.beta2 * adam.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.step));
    const Matrix direction = ((adam.m / c1).array() / ((adam.v / c2).array().sqrt() + cfg.epsilon)).matrix();
    double lr = cfg.step;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h, lr *= 0.5) {
      const Matrix trial = out.Z - lr * direction;
      const double f = objective(decoder, trial, C, p);
      if (f <= out.objective) {
        out.Z = trial;
        out.objective = f;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Stale moments can point uphill; a fresh first step is sign(grad), a
      // descent direction, so retry once from reset moments before giving up.
      if (adam.step > 1) {
        adam.m.setZero();
        adam.v.setZero();
        adam.step = 0;
        --t;
        continue;
      }
      out.stalled = true;
      break;
    }
    ++out.accepted_steps;
  }
  return out;
}

Stationarity stationarity_report(const Network& decoder, const Matrix& Z, const Matrix& C, const FitProblem& p) {
  Stationarity s;
  s.grad_z_norm = objective_grad_z(decoder, Z, C, p).norm();
  s.c_kkt_residual = max_kkt(p.G, sensed_slfs(decoder, Z, p.columns), C);
  return s;
}

DowJonsResult dowjons_from(const FiberObservations& obs, const Network& decoder, Matrix Z, Matrix C,
                           const DowJonsConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  const FitProblem p = FitProblem::from(obs);
  DowJonsResult out;
  double f = objective(decoder, Z, C, p);
  {
    const Stationarity s = stationarity_report(decoder, Z, C, p);
    out.trace.push_back({0, f, s.grad_z_norm, s.c_kkt_residual, seconds_since(t0)});
  }
  AdamState adam;
  bool warned = false;
  for (int k = 1; k <= cfg.max_iterations; ++k) {
    const double f_prev = f;
    CUpdate cu = update_C(decoder, Z, p, cfg.ridge);
    if (cu.regularized && !warned) {
      out.completion.diagnostics.warnings.push_back("decoder outputs lost row rank on Omega; ridge-regularized C-update used");
      warned = true;
    }
    const double f_c = objective(decoder, Z, cu.C, p);
    if (f_c <= f) {
      C = std::move(cu.C);
      f = f_c;
    }
    ZUpdate zu = update_Z(decoder, Z, C, p, cfg, adam);
    Z = std::move(zu.Z);
    f = zu.objective;
    out.stalled = out.stalled || zu.stalled;
    const Stationarity s = stationarity_report(decoder, Z, C, p);
    out.trace.push_back({k, f, s.grad_z_norm, s.c_kkt_residual, seconds_since(t0)});
    if (std::abs(f_prev - f) / std::max(f_prev, 1e-12) < cfg.tolerance) break;
  }

  const GridSpec& grid = obs.grid();
  const Matrix maps = decoder.forward(Z);
  for (Eigen::Index r = 0; r < Z.cols(); ++r) {
    out.completion.slfs.push_back(Slf::from_vec(grid.rows, grid.cols, maps.col(r)));
    out.completion.psds.emplace_back(Vector(C.col(r)));
  }
  out.completion.estimate = assemble(out.completion.slfs, out.completion.psds);
  const double gnorm = p.G.norm();
  out.completion.diagnostics.fit_residual = gnorm > 0.0 ? std::sqrt(f) / gnorm : 0.0;
  out.completion.diagnostics.total_seconds = seconds_since(t0);
  out.Z = std::move(Z);
  out.C = std::move(C);
  return out;
}

DowJonsResult dowjons(const FiberObservations& obs, int rank, const Autoencoder& ae, const DowJonsConfig& cfg,
                      const NasdacOptions& nasdac_options) {
  cfg.validate();
  const auto t0 = Clock::now();
  const CompletionResult init = nasdac(obs, rank, ae, nasdac_options);
  const int D = ae.arch.latent_dim;
  const GridSpec& grid = obs.grid();
  Matrix Z(D, rank);
  Matrix C(grid.bins, rank);
  const SensingMask full = SensingMask::full(grid.rows, grid.cols);
  const SensingMask& mask = obs.mask();
  for (int r = 0; r < rank; ++r) {
    SlfCompletion c = cfg.init == LatentInit::kReencode ? complete_slf(ae, init.slfs[r], full)
                                                        : complete_slf(ae, init.slfs[r], mask);
    Z.col(r) = c.latent;
    // Fold the completion gain into C so that g(z_r) c_r starts at Nasdac's fit.
    C.col(r) = init.psds[r].values() * c.scale;
  }
  DowJonsResult out = dowjons_from(obs, ae.decoder, std::move(Z), std::move(C), cfg);
  CompletionDiagnostics& diag = out.completion.diagnostics;
  const CompletionDiagnostics& d0 = init.diagnostics;
  diag.spa_indices = d0.spa_indices;
  diag.numerical_rank = d0.numerical_rank;
  diag.rank_residuals = d0.rank_residuals;
  diag.disaggregation_seconds = d0.disaggregation_seconds;
  diag.completion_seconds = d0.completion_seconds;
  diag.warnings.insert(diag.warnings.begin(), d0.warnings.begin(), d0.warnings.end());
  diag.total_seconds = seconds_since(t0);
  return out;
}

void write_trace_csv(std::ostream& os, const std::vector<DowJonsTraceRow>& trace) {
  os << "iteration,objective,grad_z_norm,c_kkt_residual,seconds\n";
  os.precision(17);
  for (const DowJonsTraceRow& r : trace) {
    os << r.iteration << ',' << r.objective << ',' << r.grad_z_norm << ',' << r.c_kkt_residual << ',' << r.seconds << '\n';
  }
}

}  // namespace radiomap
