#include "radiomap/metrics.hpp"

#include <cmath>
#include <limits>

#include "radiomap/factor.hpp"

namespace radiomap {

namespace {

Matrix l1_normalized_columns(const Matrix& F, const char* what) {
  Matrix out = F;
  for (Eigen::Index c = 0; c < F.cols(); ++c) {
    const double s = F.col(c).lpNorm<1>();
    if (!(s > 0.0)) throw PreconditionError(std::string(what) + " column " + std::to_string(c) + " has zero l1 norm");
    out.col(c) /= s;
  }
  return out;
}

Matrix distance_matrix(const Matrix& truth_n, const Matrix& est_n) {
  Matrix cost(truth_n.cols(), est_n.cols());
  for (Eigen::Index a = 0; a < truth_n.cols(); ++a)
    for (Eigen::Index b = 0; b < est_n.cols(); ++b) cost(a, b) = (truth_n.col(a) - est_n.col(b)).lpNorm<1>();
  return cost;
}

}  // namespace

double sre(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) throw ShapeError("sre: shape mismatch");
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw PreconditionError("sre: ground truth is zero");
  return (estimate - truth).squaredNorm() / denom;
}

double sre(const RadioMapTensor& estimate, const RadioMapTensor& truth) {
  if (!(estimate.grid() == truth.grid())) throw ShapeError("sre: grid mismatch");
  return sre(estimate.unfolded(), truth.unfolded());
}

double nae(const Matrix& estimate, const Matrix& truth) {
  if (estimate.cols() != truth.cols() || estimate.rows() != truth.rows()) throw ShapeError("nae: shape mismatch");
  if (truth.cols() == 0) return 0.0;
  const Matrix cost = distance_matrix(l1_normalized_columns(truth, "reference"), l1_normalized_columns(estimate, "estimate"));
  const std::vector<int> match = hungarian(cost);
  double total = 0.0;
  for (Eigen::Index a = 0; a < cost.rows(); ++a) total += cost(a, match[a]);
  return total / static_cast<double>(truth.cols());
}

FactorErrors factor_errors(const Matrix& C_hat, const Matrix& S_hat, const Matrix& C_true, const Matrix& S_true) {
  if (C_hat.cols() != C_true.cols() || S_hat.rows() != S_true.rows() || C_true.cols() != S_true.rows() ||
      C_hat.rows() != C_true.rows() || S_hat.cols() != S_true.cols()) {
    throw ShapeError("factor_errors: shape mismatch");
  }
  const Matrix cc = distance_matrix(l1_normalized_columns(C_true, "reference PSD"), l1_normalized_columns(C_hat, "estimate PSD"));
  const Matrix cs = distance_matrix(l1_normalized_columns(S_true.transpose(), "reference SLF"),
                                    l1_normalized_columns(S_hat.transpose(), "estimate SLF"));
  FactorErrors out;
  out.permutation = hungarian(cc + cs);
  const double R = static_cast<double>(C_true.cols());
  for (Eigen::Index a = 0; a < cc.rows(); ++a) {
    out.nae_c += cc(a, out.permutation[a]) / R;
    out.nae_s += cs(a, out.permutation[a]) / R;
  }
  return out;
}

double misdetection(const RadioMapTensor& estimate, const RadioMapTensor& truth, const std::vector<Cell>& locations,
                    const std::vector<Psd>& psds, double threshold, double occupancy) {
  if (!(estimate.grid() == truth.grid())) throw ShapeError("misdetection: grid mismatch");
  if (locations.size() != psds.size()) throw ShapeError("misdetection: one PSD per emitter location required");
  const GridSpec& g = truth.grid();
  long pairs = 0, missed = 0;
  for (std::size_t r = 0; r < locations.size(); ++r) {
    const Cell c = locations[r];
    if (c.i < 0 || c.i >= g.rows || c.j < 0 || c.j >= g.cols) throw PreconditionError("misdetection: emitter outside grid");
    if (psds[r].bins() != g.bins) throw ShapeError("misdetection: PSD length mismatch");
    const double peak = psds[r].values().maxCoeff();
    for (int k = 0; k < g.bins; ++k) {
      if (!(psds[r](k) > occupancy * peak)) continue;
      ++pairs;
      if (estimate(c.i, c.j, k) < threshold * truth(c.i, c.j, k)) ++missed;
    }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(missed) / static_cast<double>(pairs);
}

double snr_realized(const Matrix& signal, const Matrix& noise) {
  const double n = noise.squaredNorm();
  if (n == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal.squaredNorm() / n);
}

}  // namespace radiomap
