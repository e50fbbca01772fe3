#include "radiomap/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <tuple>

#include "radiomap/rng.hpp"

namespace radiomap {

namespace {

constexpr std::uint64_t kStreamEmitters = 1;
constexpr std::uint64_t kStreamPsd = 2;
constexpr std::uint64_t kStreamMask = 3;
constexpr std::uint64_t kStreamNoise = 4;
constexpr std::uint64_t kStreamShadowBase = 1000;

constexpr std::size_t kCacheBudgetBytes = std::size_t{512} << 20;

// Lower Cholesky factor of the unit-variance exponential correlation matrix.
class CorrelationCache {
 public:
  std::shared_ptr<const Matrix> get(int rows, int cols, double decorrelation) {
    const Key key{rows, cols, decorrelation};
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    auto factor = std::make_shared<const Matrix>(factorize(rows, cols, decorrelation));
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = entries_.emplace(key, factor);
    if (inserted) {
      order_.push_back(key);
      bytes_ += bytes_of(*factor);
      while (bytes_ > kCacheBudgetBytes && order_.size() > 1) {
        auto victim = entries_.find(order_.front());
        bytes_ -= bytes_of(*victim->second);
        entries_.erase(victim);
        order_.pop_front();
      }
    }
    return it->second;
  }

  void clear() {
    std::lock_guard<std::mutex> lock(mu_);
    entries_.clear();
    order_.clear();
    bytes_ = 0;
  }

 private:
  using Key = std::tuple<int, int, double>;

  static std::size_t bytes_of(const Matrix& m) { return static_cast<std::size_t>(m.size()) * sizeof(double); }

  static Matrix factorize(int rows, int cols, double decorrelation) {
    const int n = rows * cols;
    Matrix cov(n, n);
    for (int a = 0; a < n; ++a) {
      const double ai = a / cols, aj = a % cols;
      for (int b = 0; b <= a; ++b) {
        const double di = ai - b / cols, dj = aj - b % cols;
        const double v = std::exp(-std::sqrt(di * di + dj * dj) / decorrelation);
        cov(a, b) = v;
        cov(b, a) = v;
      }
    }
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
      constexpr double kJitter = 1e-8;
      cov.diagonal().array() += kJitter;
      llt.compute(cov);
      if (llt.info() != Eigen::Success) {
        throw NumericalError("shadowing covariance Cholesky failed for " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " grid, d_corr=" + std::to_string(decorrelation) +
                             " (retried with diagonal jitter 1e-8*eta)");
      }
    }
    return llt.matrixL();
  }

  std::mutex mu_;
  std::map<Key, std::shared_ptr<const Matrix>> entries_;
  std::deque<Key> order_;
  std::size_t bytes_ = 0;
};

CorrelationCache& correlation_cache() {
  static CorrelationCache cache;
  return cache;
}

std::array<double, 2> draw_location(Rng& rng, int rows, int cols, bool off_grid, double margin) {
  if (off_grid) {
    return {rng.uniform(-margin, rows - 1 + margin), rng.uniform(-margin, cols - 1 + margin)};
  }
  return {static_cast<double>(rng.uniform_int(0, rows - 1)), static_cast<double>(rng.uniform_int(0, cols - 1))};
}

}  // namespace

void Range::validate(const char* name) const {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ConfigError(std::string("range ") + name + " must satisfy lo <= hi");
  }
}

void ShadowParams::validate() const {
  if (!(pathloss > 0.0)) throw PreconditionError("path-loss exponent must be positive");
  if (!(shadow_variance >= 0.0)) throw PreconditionError("shadowing variance must be nonnegative");
  if (!(decorrelation > 0.0)) throw PreconditionError("decorrelation distance must be positive");
}

void PsdParams::validate(int bins) const {
  if (centers.empty()) throw PreconditionError("PSD needs at least one subband");
  if (widths.size() != centers.size() || amplitudes.size() != centers.size()) {
    throw ShapeError("PSD parameter lists must have equal lengths");
  }
  for (size_t i = 0; i < centers.size(); ++i) {
    if (!(widths[i] > 0.0)) throw PreconditionError("PSD subband width must be positive");
    if (!(amplitudes[i] > 0.0)) throw PreconditionError("PSD subband amplitude must be positive");
    if (centers[i] < 1.0 || centers[i] > bins) {
      throw PreconditionError("PSD subband center " + std::to_string(centers[i]) + " outside [1, " +
                              std::to_string(bins) + "]");
    }
  }
}

void SceneConfig::validate() const {
  grid.validate();
  if (emitters < 1) throw ConfigError("emitters must be >= 1");
  pathloss.validate("pathloss");
  shadow_variance.validate("shadow_variance");
  decorrelation.validate("decorrelation");
  psd_width.validate("psd_width");
  psd_amplitude.validate("psd_amplitude");
  if (pathloss.lo <= 0.0) throw ConfigError("pathloss range must be positive");
  if (shadow_variance.lo < 0.0) throw ConfigError("shadow_variance range must be nonnegative");
  if (decorrelation.lo <= 0.0) throw ConfigError("decorrelation range must be positive");
  if (psd_width.lo <= 0.0 || psd_amplitude.lo <= 0.0) throw ConfigError("PSD width and amplitude must be positive");
  if (subbands < 1) throw ConfigError("subbands must be >= 1");
  if (!(sampling_fraction > 0.0 && sampling_fraction <= 1.0)) throw ConfigError("sampling_fraction must be in (0, 1]");
  if (sparse_occupancy && emitters > grid.bins) {
    throw ConfigError("sparse occupancy needs at least one bin per emitter");
  }
  if (!(min_distance > 0.0)) throw ConfigError("min_distance must be positive");
}

void CorpusConfig::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("corpus grid must be nonempty");
  pathloss.validate("pathloss");
  shadow_variance.validate("shadow_variance");
  decorrelation.validate("decorrelation");
  mask_fraction.validate("mask_fraction");
  if (pathloss.lo <= 0.0 || decorrelation.lo <= 0.0 || shadow_variance.lo < 0.0) {
    throw ConfigError("corpus shadowing ranges out of domain");
  }
  if (!(mask_fraction.lo > 0.0 && mask_fraction.hi <= 1.0)) throw ConfigError("mask_fraction must lie in (0, 1]");
  if (!(decorrelation_step >= 0.0)) throw ConfigError("decorrelation_step must be nonnegative");
}

GridMatrix gen_shadow_field(int rows, int cols, double eta, double decorrelation, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw ShapeError("shadow field grid must be nonempty");
  if (!(eta >= 0.0)) throw PreconditionError("shadowing variance must be nonnegative");
  if (!(decorrelation > 0.0)) throw PreconditionError("decorrelation distance must be positive");
  GridMatrix field = GridMatrix::Zero(rows, cols);
  if (eta == 0.0) return field;
  const auto factor = correlation_cache().get(rows, cols, decorrelation);
  Rng rng(seed);
  Vector w(rows * cols);
  for (Eigen::Index n = 0; n < w.size(); ++n) w(n) = rng.normal();
  Vector v = factor->triangularView<Eigen::Lower>() * w;
  v *= std::sqrt(eta);
  return Eigen::Map<const GridMatrix>(v.data(), rows, cols);
}

void clear_shadow_cache() { correlation_cache().clear(); }

Slf gen_slf(int rows, int cols, const ShadowParams& params, std::uint64_t seed, double min_distance) {
  params.validate();
  if (!(min_distance > 0.0)) throw PreconditionError("min_distance must be positive");
  const GridMatrix v = gen_shadow_field(rows, cols, params.shadow_variance, params.decorrelation, seed);
  GridMatrix s(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double di = i - params.location[0], dj = j - params.location[1];
      const double d = std::max(std::sqrt(di * di + dj * dj), min_distance);
      s(i, j) = std::pow(d, -params.pathloss) * std::pow(10.0, v(i, j) / 10.0);
    }
  }
  return Slf(std::move(s));
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

Psd gen_psd(int bins, const PsdParams& params) {
  if (bins < 1) throw ShapeError("PSD needs at least one bin");
  params.validate(bins);
  Vector c = Vector::Zero(bins);
  for (int k = 1; k <= bins; ++k) {
    double acc = 0.0;
    for (int i = 0; i < params.subbands(); ++i) {
      const double s = sinc((k - params.centers[i]) / params.widths[i]);
      acc += params.amplitudes[i] * s * s;
    }
    c(k - 1) = acc;
  }
  return Psd(std::move(c));
}

Matrix scaled_uniform_noise(const RadioMapTensor& x, double snr_db, std::uint64_t seed) {
  Rng rng(seed);
  Matrix n(x.grid().bins, x.grid().cells());
  for (Eigen::Index c = 0; c < n.cols(); ++c)
    for (Eigen::Index r = 0; r < n.rows(); ++r) n(r, c) = rng.uniform();
  const double raw = n.squaredNorm();
  if (raw == 0.0) return n;
  const double scale = std::sqrt(x.squared_norm() / (raw * std::pow(10.0, snr_db / 10.0)));
  return n * scale;
}

Scene gen_scene(const SceneConfig& cfg) {
  cfg.validate();
  const GridSpec& g = cfg.grid;
  Scene scene;

  Rng emitter_rng = Rng::substream(cfg.seed, kStreamEmitters);
  for (int r = 0; r < cfg.emitters; ++r) {
    ShadowParams p;
    p.location = draw_location(emitter_rng, g.rows, g.cols, cfg.off_grid, cfg.off_grid_margin);
    p.pathloss = emitter_rng.uniform(cfg.pathloss.lo, cfg.pathloss.hi);
    p.shadow_variance = emitter_rng.uniform(cfg.shadow_variance.lo, cfg.shadow_variance.hi);
    p.decorrelation = emitter_rng.uniform(cfg.decorrelation.lo, cfg.decorrelation.hi);
    scene.emitters.push_back(p);
  }

  Rng psd_rng = Rng::substream(cfg.seed, kStreamPsd);
  std::vector<char> reserved(static_cast<size_t>(g.bins), 0);
  if (cfg.sparse_occupancy) {
    scene.exclusive_bins = psd_rng.sample_without_replacement(g.bins, cfg.emitters);
    for (int b : scene.exclusive_bins) reserved[b] = 1;
  }
  std::vector<int> free_bins;
  for (int k = 0; k < g.bins; ++k)
    if (!reserved[k]) free_bins.push_back(k);

  for (int r = 0; r < cfg.emitters; ++r) {
    PsdParams pp;
    std::vector<int> centers;
    if (cfg.sparse_occupancy) {
      centers.push_back(scene.exclusive_bins[r]);
      const int extra = std::min(psd_rng.uniform_int(0, cfg.subbands - 1), static_cast<int>(free_bins.size()));
      for (int idx : psd_rng.sample_without_replacement(static_cast<int>(free_bins.size()), extra)) {
        centers.push_back(free_bins[idx]);
      }
    } else {
      const int count = std::min(cfg.subbands, g.bins);
      centers = psd_rng.sample_without_replacement(g.bins, count);
    }
    for (int b : centers) {
      pp.centers.push_back(b + 1.0);
      pp.widths.push_back(psd_rng.uniform(cfg.psd_width.lo, cfg.psd_width.hi));
      pp.amplitudes.push_back(psd_rng.uniform(cfg.psd_amplitude.lo, cfg.psd_amplitude.hi));
    }
    scene.psd_params.push_back(std::move(pp));
  }

  FactorModel f;
  f.C.resize(g.bins, cfg.emitters);
  f.S.resize(cfg.emitters, g.cells());
  for (int r = 0; r < cfg.emitters; ++r) {
    f.C.col(r) = gen_psd(g.bins, scene.psd_params[r]).values();
    const Slf s = gen_slf(g.rows, g.cols, scene.emitters[r], splitmix64(cfg.seed ^ (kStreamShadowBase + r)),
                          cfg.min_distance);
    f.S.row(r) = s.vec().transpose();
  }
  if (cfg.sparse_occupancy) {
    for (int r = 0; r < cfg.emitters; ++r)
      for (int other = 0; other < cfg.emitters; ++other)
        if (other != r) f.C(scene.exclusive_bins[r], other) = 0.0;
  }
  scene.factors = f;
  scene.truth = assemble(g, f);

  Rng mask_rng = Rng::substream(cfg.seed, kStreamMask);
  const int n_sensed = std::max(1, static_cast<int>(std::lround(cfg.sampling_fraction * g.cells())));
  const SensingMask mask = SensingMask::from_flat(g.rows, g.cols, mask_rng.sample_without_replacement(g.cells(), n_sensed));
  if (n_sensed < cfg.emitters) {
    scene.warnings.push_back("|Omega| = " + std::to_string(n_sensed) + " < R = " + std::to_string(cfg.emitters) +
                             ": separable disaggregation needs at least R sensed cells");
  }

  if (cfg.snr_db) {
    scene.noise = scaled_uniform_noise(scene.truth, *cfg.snr_db, Rng::substream(cfg.seed, kStreamNoise).next_u64());
  } else {
    scene.noise = Matrix::Zero(g.bins, g.cells());
  }
  Matrix fibers(g.bins, mask.size());
  for (int m = 0; m < mask.size(); ++m) {
    const int q = mask.columns()[m];
    fibers.col(m) = scene.truth.unfolded().col(q) + scene.noise.col(q);
  }
  scene.observations = FiberObservations(g, mask, std::move(fibers));
  return scene;
}

std::vector<TrainingSample> gen_training_corpus(const CorpusConfig& cfg, int count, int first_index) {
  cfg.validate();
  if (count < 1) throw PreconditionError("corpus count must be >= 1");
  struct Draw {
    ShadowParams params;
    std::vector<int> sensed;
    std::uint64_t field_seed;
  };
  const int cells = cfg.rows * cfg.cols;
  std::vector<Draw> draws(static_cast<size_t>(count));
  for (int n = 0; n < count; ++n) {
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(first_index + n));
    Draw& d = draws[n];
    d.params.location = draw_location(rng, cfg.rows, cfg.cols, cfg.off_grid, cfg.off_grid_margin);
    d.params.pathloss = rng.uniform(cfg.pathloss.lo, cfg.pathloss.hi);
    d.params.shadow_variance = rng.uniform(cfg.shadow_variance.lo, cfg.shadow_variance.hi);
    double dc = rng.uniform(cfg.decorrelation.lo, cfg.decorrelation.hi);
    if (cfg.decorrelation_step > 0.0) {
      dc = cfg.decorrelation.lo + cfg.decorrelation_step * std::round((dc - cfg.decorrelation.lo) / cfg.decorrelation_step);
      dc = std::clamp(dc, cfg.decorrelation.lo, cfg.decorrelation.hi);
    }
    d.params.decorrelation = dc;
    const double frac = rng.uniform(cfg.mask_fraction.lo, cfg.mask_fraction.hi);
    const int n_sensed = std::clamp(static_cast<int>(std::lround(frac * cells)), 1, cells);
    d.sensed = rng.sample_without_replacement(cells, n_sensed);
    d.field_seed = rng.next_u64();
  }

  // Visit samples grouped by d_corr so each covariance factor is built once.
  std::vector<int> order(static_cast<size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return draws[a].params.decorrelation < draws[b].params.decorrelation;
  });

  std::vector<TrainingSample> out(static_cast<size_t>(count));
  for (int n : order) {
    const Draw& d = draws[n];
    TrainingSample& s = out[n];
    s.params = d.params;
    s.slf = gen_slf(cfg.rows, cfg.cols, d.params, d.field_seed, cfg.min_distance);
    s.mask.assign(static_cast<size_t>(cells), 0);
    for (int q : d.sensed) s.mask[q] = 1;
  }
  return out;
}

}  // namespace radiomap
