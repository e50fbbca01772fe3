#pragma once

// Slab-by-slab thin-plate-spline interpolation of the sensed fibers.

#include <optional>

#include "radiomap/core.hpp"

namespace radiomap {

struct TpsOptions {
  /// Smoothing added to the kernel diagonal. When unset it defaults to
  /// 1e-3 times the squared mean nearest-neighbor spacing of the sensed cells.
  std::optional<double> smoothing;
};

/// Mean distance (in cells) from each sensed cell to its nearest sensed
/// neighbor.
double mean_nearest_spacing(const SensingMask& mask);

double tps_kernel(double r);

/// Fits U(r) = r^2 log r plus an affine term to every frequency slab
/// independently and evaluates it on the whole grid; negatives clamp to 0.
RadioMapTensor tps_interpolate(const FiberObservations& obs, const TpsOptions& options = {});

}  // namespace radiomap
