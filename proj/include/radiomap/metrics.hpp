#pragma once

// Reconstruction and factor-recovery metrics.

#include <vector>

#include "radiomap/core.hpp"

namespace radiomap {

/// ||X_hat - X||_F^2 / ||X||_F^2.
double sre(const RadioMapTensor& estimate, const RadioMapTensor& truth);
double sre(const Matrix& estimate, const Matrix& truth);

/// Mean l1 distance between l1-normalized columns after optimal matching.
double nae(const Matrix& estimate, const Matrix& truth);

struct FactorErrors {
  double nae_c = 0.0;
  double nae_s = 0.0;
  std::vector<int> permutation;  // estimate component matched to each true component
};

/// NAE of C (columns) and S (rows, R x IJ) under one shared matching whose
/// cost sums the C and S distances.
FactorErrors factor_errors(const Matrix& C_hat, const Matrix& S_hat, const Matrix& C_true, const Matrix& S_true);

/// Fraction of (emitter, occupied bin) pairs where the reconstruction at the
/// emitter's cell falls below threshold times the true power there. A bin is
/// occupied when the emitter's PSD exceeds occupancy times its peak.
double misdetection(const RadioMapTensor& estimate, const RadioMapTensor& truth, const std::vector<Cell>& locations,
                    const std::vector<Psd>& psds, double threshold = 0.25, double occupancy = 0.01);

/// 10 log10(||X||^2 / ||N||^2); +infinity for zero noise.
double snr_realized(const Matrix& signal, const Matrix& noise);

}  // namespace radiomap
