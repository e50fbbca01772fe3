#pragma once

// Monte-Carlo trials: one simulated scene, one completion method, one
// metrics row. Sweeps expand the cartesian product of their axes.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "radiomap/dowjons.hpp"
#include "radiomap/io.hpp"
#include "radiomap/simulate.hpp"

namespace radiomap {

class Config;

enum class Method : std::uint8_t { kNasdac = 0, kDowJons = 1, kTps = 2 };

Method parse_method(const std::string& name);
const char* method_name(Method m);

struct MethodOutput {
  CompletionResult completion;        // factors empty for tps
  std::vector<DowJonsTraceRow> trace; // dowjons only
};

/// Runs a method on observations. Learned methods require ae.
MethodOutput run_method(Method m, const FiberObservations& obs, int rank, const Autoencoder* ae,
                        const DowJonsConfig& dj = {});

/// Metrics of an estimate against a scene's ground truth. nae_c / nae_s are
/// computed when the estimate carries factors of the true rank.
MetricsRow score(const std::string& method, const MethodOutput& out, const SceneFiles& truth);
MetricsRow score(const std::string& method, const MethodOutput& out, const Scene& scene, const SceneConfig& cfg);

struct SweepConfig {
  SceneConfig base;
  std::vector<Method> methods{Method::kNasdac, Method::kDowJons, Method::kTps};
  int trials = 30;
  std::uint64_t seed = 1;
  std::vector<double> sampling_fraction{0.1};
  std::vector<double> eta{6.0};
  std::vector<double> dcorr{50.0};
  std::vector<int> emitters{7};
  std::vector<int> rank_offsets{0};  // R_hat = R + offset
  std::vector<std::optional<double>> snr_db{std::nullopt};
  DowJonsConfig dowjons;
};

/// [scene] keys give the base scene, [bench] the axes, [dowjons] the solver.
SweepConfig sweep_config_from(const Config& cfg);

/// Every (setting, seed, method) row, sorted by setting, seed and method.
/// Trials run on workers threads; a failing trial records its error in
/// status and the sweep continues.
std::vector<MetricsRow> run_sweep(const SweepConfig& sweep, const Autoencoder* ae, int workers,
                                  const std::function<void(const MetricsRow&)>& on_row = {});

/// Mean of every metric per (method, setting), status "ok" rows only.
std::vector<MetricsRow> aggregate(const std::vector<MetricsRow>& rows);

/// Worker count from RADIOMAP_WORKERS, else the hardware concurrency.
int default_workers();

}  // namespace radiomap
