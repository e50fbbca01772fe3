#pragma once

// Scene generation under the path-loss plus correlated log-normal shadowing
// model, sinc-squared PSDs, random sensing masks and additive uniform noise.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "radiomap/core.hpp"

namespace radiomap {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  void validate(const char* name) const;
};

struct ShadowParams {
  std::array<double, 2> location{0.0, 0.0};  // (row, col) in cell units
  double pathloss = 2.0;                     // gamma
  double shadow_variance = 0.0;              // eta, dB^2
  double decorrelation = 50.0;               // d_corr, cells
  void validate() const;
};

struct PsdParams {
  std::vector<double> centers;  // one-based bin positions in [1, K]
  std::vector<double> widths;
  std::vector<double> amplitudes;
  int subbands() const { return static_cast<int>(centers.size()); }
  void validate(int bins) const;
};

struct SceneConfig {
  GridSpec grid{32, 32, 64};
  int emitters = 7;
  Range pathloss{2.0, 2.5};
  Range shadow_variance{3.0, 8.0};
  Range decorrelation{30.0, 100.0};
  Range psd_width{2.0, 4.0};
  Range psd_amplitude{0.5, 2.5};
  int subbands = 16;             // M, upper bound on subbands per emitter
  bool sparse_occupancy = true;  // every emitter owns one exclusive bin
  double sampling_fraction = 0.1;
  std::optional<double> snr_db;
  double min_distance = 0.5;  // path-loss clamp, cells
  bool off_grid = false;      // continuous emitter positions
  double off_grid_margin = 0.0;
  std::uint64_t seed = 1;
  void validate() const;
};

struct Scene {
  RadioMapTensor truth;  // noiseless X
  Matrix noise;          // K x IJ unfolded N (zeros when noiseless)
  FiberObservations observations;
  std::vector<ShadowParams> emitters;
  std::vector<PsdParams> psd_params;
  FactorModel factors;
  std::vector<int> exclusive_bins;  // zero-based, sparse occupancy only
  std::vector<std::string> warnings;
};

/// Zero-mean Gaussian field with covariance eta * exp(-||y - y'|| / d_corr)
/// between cell centers. Dense Cholesky, cached per (grid, d_corr).
GridMatrix gen_shadow_field(int rows, int cols, double eta, double decorrelation, std::uint64_t seed);

/// Drops every cached covariance factor.
void clear_shadow_cache();

/// S(y) = max(||y - r||, d_min)^(-gamma) * 10^(v(y) / 10).
Slf gen_slf(int rows, int cols, const ShadowParams& params, std::uint64_t seed, double min_distance = 0.5);

/// c(k) = sum_i a_i sinc^2((k - f_i) / w_i) for one-based k = 1..K.
Psd gen_psd(int bins, const PsdParams& params);

double sinc(double x);

Scene gen_scene(const SceneConfig& cfg);

/// Adds uniform [0, 1] noise scaled to an exact SNR in dB and returns it.
Matrix scaled_uniform_noise(const RadioMapTensor& x, double snr_db, std::uint64_t seed);

struct CorpusConfig {
  int rows = 32;
  int cols = 32;
  Range pathloss{2.0, 2.5};
  Range shadow_variance{3.0, 8.0};
  Range decorrelation{30.0, 100.0};
  Range mask_fraction{0.01, 0.2};
  double min_distance = 0.5;
  bool off_grid = false;
  double off_grid_margin = 0.0;
  double decorrelation_step = 0.5;  // d_corr lattice used to share factorizations
  std::uint64_t seed = 7;
  void validate() const;
};

struct TrainingSample {
  std::vector<std::uint8_t> mask;  // row-major I x J indicator
  Slf slf;                         // full single-emitter SLF Q
  ShadowParams params;
};

/// Independent single-emitter samples with their own random masks. Sample n
/// depends only on (seed, n).
std::vector<TrainingSample> gen_training_corpus(const CorpusConfig& cfg, int count, int first_index = 0);

}  // namespace radiomap
