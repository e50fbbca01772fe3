#pragma once

// Scenes whose SLFs lie exactly in the range of a given autoencoder: each S_r
// is a fixed point of the completion map S -> g(p(M * S)) for the scene mask,
// so S_r = g(z_r) with a known latent z_r.

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>

#include "radiomap/neural.hpp"
#include "radiomap/simulate.hpp"

namespace testutil {

struct FixedPoint {
  radiomap::GridMatrix slf;
  radiomap::Vector latent;
};

inline std::optional<FixedPoint> completion_fixed_point(const radiomap::Autoencoder& ae,
                                                        const radiomap::SensingMask& mask, radiomap::GridMatrix start,
                                                        int max_iter = 2000, double tol = 1e-15) {
  radiomap::GridMatrix s = std::move(start);
  for (int it = 0; it < max_iter; ++it) {
    const radiomap::SlfCompletion c = radiomap::complete_slf(ae, radiomap::Slf(s), mask);
    const double change = (c.shape.values() - s).cwiseAbs().maxCoeff();
    s = c.shape.values();
    if (change <= tol) {
      const radiomap::SlfCompletion last = radiomap::complete_slf(ae, radiomap::Slf(s), mask);
      return FixedPoint{last.shape.values(), last.latent};
    }
  }
  return std::nullopt;
}

inline radiomap::SensingMask random_mask(int rows, int cols, double rho, std::mt19937_64& gen) {
  std::vector<int> flat(static_cast<size_t>(rows * cols));
  std::iota(flat.begin(), flat.end(), 0);
  std::shuffle(flat.begin(), flat.end(), gen);
  const int n = std::max(1, static_cast<int>(std::lround(rho * rows * cols)));
  flat.resize(static_cast<size_t>(n));
  return radiomap::SensingMask::from_flat(rows, cols, flat);
}

struct InModelScene {
  radiomap::GridSpec grid;
  radiomap::SensingMask mask;
  radiomap::Matrix C;  // K x R
  radiomap::Matrix Z;  // D x R
  std::vector<radiomap::Slf> slfs;
  radiomap::RadioMapTensor truth;
  radiomap::FiberObservations obs;
};

/// separable: every emitter owns one bin; otherwise every C entry is drawn
/// from [0.2, 1] so all emitters overlap in every bin.
inline std::optional<InModelScene> in_model_scene(const radiomap::Autoencoder& ae, int bins, int R, double rho,
                                                  bool separable, std::uint64_t seed) {
  using namespace radiomap;
  std::mt19937_64 gen(seed);
  InModelScene sc;
  sc.grid = GridSpec{ae.arch.rows, ae.arch.cols, bins};
  sc.mask = random_mask(ae.arch.rows, ae.arch.cols, rho, gen);
  sc.Z.resize(ae.decoder.input_shape().size(), R);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Distinct fixed points: a contractive prior maps many starts to the same one.
  for (int attempt = 0; attempt < 40 * R && static_cast<int>(sc.slfs.size()) < R; ++attempt) {
    ShadowParams p;
    p.location = {std::floor(u(gen) * ae.arch.rows), std::floor(u(gen) * ae.arch.cols)};
    p.pathloss = 2.0 + 0.5 * u(gen);
    p.shadow_variance = 3.0 + 5.0 * u(gen);
    p.decorrelation = 30.0 + 70.0 * u(gen);
    const Slf start = gen_slf(ae.arch.rows, ae.arch.cols, p, gen());
    const auto fp = completion_fixed_point(ae, sc.mask, start.values() / start.values().maxCoeff());
    if (!fp) continue;
    bool distinct = true;
    for (const Slf& other : sc.slfs)
      distinct = distinct && (other.values() - fp->slf).norm() > 0.2 * fp->slf.norm();
    if (!distinct) continue;
    sc.Z.col(static_cast<Eigen::Index>(sc.slfs.size())) = fp->latent;
    sc.slfs.emplace_back(fp->slf);
  }
  if (static_cast<int>(sc.slfs.size()) < R) return std::nullopt;
  sc.C.resize(bins, R);
  for (int k = 0; k < bins; ++k)
    for (int r = 0; r < R; ++r) sc.C(k, r) = separable ? u(gen) : 0.2 + 0.8 * u(gen);
  if (separable) {
    std::vector<int> rows(static_cast<size_t>(bins));
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), gen);
    for (int r = 0; r < R; ++r) sc.C.row(rows[r]) = Vector::Unit(R, r).transpose();
  }
  sc.truth = assemble(sc.slfs, psds_from_columns(sc.C));
  sc.obs = observe(sc.truth, sc.mask);
  return sc;
}

}  // namespace testutil
