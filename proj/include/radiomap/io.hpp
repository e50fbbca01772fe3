#pragma once

// File formats: scene directories, training corpora, observation CSVs,
// grayscale map exports and result tables.
//
// Scene directory (all float payloads little-endian 32-bit):
//   truth.f32         noiseless X, I*J*K values, index ((i * J) + j) * K + k
//   noise.f32         additive noise N, same layout
//   observations.csv  sensed fibers in the observation CSV format below
//   factors.f32       C (K x R, column-major) followed by S (R x IJ, row-major)
//   scene.meta        key-value text: [scene] config, [emitters] parameters
//
// Observation CSV:
//   dims,I,J,K
//   i,j,k,value
//   <zero-based i>,<j>,<k>,<value>   one row per entry, every sensed fiber complete

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "radiomap/core.hpp"
#include "radiomap/simulate.hpp"
#include "radiomap/theory.hpp"

namespace radiomap {

void write_f32(const std::string& path, const std::vector<float>& values);
std::vector<float> read_f32(const std::string& path, std::size_t expected_count);

/// Tensor as I*J*K floats with k fastest.
std::vector<float> tensor_to_f32(const Matrix& unfolded);
Matrix tensor_from_f32(const std::vector<float>& values, const GridSpec& grid);

void write_observations_csv(std::ostream& os, const FiberObservations& obs);
FiberObservations read_observations_csv(std::istream& is);
FiberObservations load_observations_csv(const std::string& path);

struct SceneFiles {
  SceneConfig config;
  RadioMapTensor truth;
  Matrix noise;
  FiberObservations observations;
  FactorModel factors;
  std::vector<ShadowParams> emitters;
  std::vector<int> exclusive_bins;
};

void write_scene(const std::string& dir, const Scene& scene, const SceneConfig& cfg);
SceneFiles read_scene(const std::string& dir);

/// Binary corpus: "RMCP" header with version, count; then per record I, J
/// (int32), Q row-major float32 and the mask as a row-major bitset.
void write_corpus(const std::string& path, const std::vector<TrainingSample>& corpus);
std::vector<TrainingSample> read_corpus(const std::string& path);

/// 8-bit grayscale PGM of a map, linearly scaled to its own range (or in dB
/// when requested), plus a raw float sidecar with the exact values.
void write_pgm(const std::string& path, const GridMatrix& map, bool decibels = false);

struct MetricsRow {
  std::string method;
  std::uint64_t seed = 0;
  double rho = 0.0;
  double eta = 0.0;
  double dcorr = 0.0;
  int rank = 0;      // true number of emitters
  int rank_hat = 0;  // rank given to the method
  std::optional<double> snr_db;
  double sre = 0.0;
  double nae_c = 0.0;
  double nae_s = 0.0;
  double misdetection = 0.0;
  double runtime = 0.0;
  std::string status = "ok";
};

inline constexpr const char* kMetricsSchema = "# radiomap-metrics v1";
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

void write_epoch_csv_header(std::ostream& os);

/// Key-value bound report.
void write_bound_report(std::ostream& os, const BoundInputs& in, const RecoveryBudget& budget,
                        const std::map<std::string, std::string>& extra);

}  // namespace radiomap
