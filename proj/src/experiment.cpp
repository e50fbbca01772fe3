#include "radiomap/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "radiomap/baseline.hpp"
#include "radiomap/config.hpp"
#include "radiomap/metrics.hpp"
#include "radiomap/rng.hpp"

namespace radiomap {

Method parse_method(const std::string& name) {
  if (name == "nasdac") return Method::kNasdac;
  if (name == "dowjons") return Method::kDowJons;
  if (name == "tps") return Method::kTps;
  throw ConfigError("unknown method '" + name + "'; allowed: nasdac, dowjons, tps");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kNasdac:
      return "nasdac";
    case Method::kDowJons:
      return "dowjons";
    case Method::kTps:
      return "tps";
  }
  return "?";
}

MethodOutput run_method(Method m, const FiberObservations& obs, int rank, const Autoencoder* ae, const DowJonsConfig& dj) {
  MethodOutput out;
  if (m == Method::kTps) {
    const auto t0 = std::chrono::steady_clock::now();
    out.completion.estimate = tps_interpolate(obs);
    out.completion.diagnostics.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }
  if (!ae) throw PreconditionError(std::string(method_name(m)) + " needs trained autoencoder weights");
  if (m == Method::kNasdac) {
    out.completion = nasdac(obs, rank, *ae);
    return out;
  }
  DowJonsResult r = dowjons(obs, rank, *ae, dj);
  out.completion = std::move(r.completion);
  out.trace = std::move(r.trace);
  return out;
}

namespace {

struct Truth {
  const RadioMapTensor* tensor;
  const Matrix* C;
  const Matrix* S;
  std::vector<Cell> locations;
  std::vector<Psd> psds;
};

Truth truth_view(const RadioMapTensor& x, const FactorModel& f, const std::vector<ShadowParams>& emitters) {
  Truth t{&x, &f.C, &f.S, {}, psds_from_columns(f.C)};
  const GridSpec& g = x.grid();
  for (const ShadowParams& e : emitters) {
    const int i = std::clamp(static_cast<int>(std::lround(e.location[0])), 0, g.rows - 1);
    const int j = std::clamp(static_cast<int>(std::lround(e.location[1])), 0, g.cols - 1);
    t.locations.push_back({i, j});
  }
  return t;
}

// Axis value of a sweep setting; ranged scene parameters have none.
double fixed_or_nan(const Range& r) { return r.lo == r.hi ? r.lo : std::numeric_limits<double>::quiet_NaN(); }

MetricsRow score_against(const std::string& method, const MethodOutput& out, const Truth& t) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  MetricsRow row;
  row.method = method;
  row.rank = static_cast<int>(t.C->cols());
  row.rank_hat = out.completion.psds.empty() ? row.rank : static_cast<int>(out.completion.psds.size());
  row.sre = sre(out.completion.estimate, *t.tensor);
  row.misdetection = misdetection(out.completion.estimate, *t.tensor, t.locations, t.psds);
  row.runtime = out.completion.diagnostics.total_seconds;
  row.nae_c = row.nae_s = nan;
  const auto& psds = out.completion.psds;
  if (!psds.empty() && row.rank_hat == row.rank) {
    const int R = row.rank;
    Matrix C(t.C->rows(), R), S(R, t.S->cols());
    for (int r = 0; r < R; ++r) {
      C.col(r) = psds[r].values();
      S.row(r) = Eigen::Map<const Eigen::RowVectorXd>(out.completion.slfs[r].values().data(), S.cols());
    }
    try {
      const FactorErrors e = factor_errors(C, S, *t.C, *t.S);
      row.nae_c = e.nae_c;
      row.nae_s = e.nae_s;
    } catch (const PreconditionError&) {
      // an all-zero estimated component has no normalized shape
    }
  }
  return row;
}

}  // namespace

MetricsRow score(const std::string& method, const MethodOutput& out, const SceneFiles& files) {
  MetricsRow row = score_against(method, out, truth_view(files.truth, files.factors, files.emitters));
  row.seed = files.config.seed;
  row.rho = files.config.sampling_fraction;
  row.eta = fixed_or_nan(files.config.shadow_variance);
  row.dcorr = fixed_or_nan(files.config.decorrelation);
  row.snr_db = files.config.snr_db;
  return row;
}

MetricsRow score(const std::string& method, const MethodOutput& out, const Scene& scene, const SceneConfig& cfg) {
  MetricsRow row = score_against(method, out, truth_view(scene.truth, scene.factors, scene.emitters));
  row.seed = cfg.seed;
  row.rho = cfg.sampling_fraction;
  row.eta = fixed_or_nan(cfg.shadow_variance);
  row.dcorr = fixed_or_nan(cfg.decorrelation);
  row.snr_db = cfg.snr_db;
  return row;
}

SweepConfig sweep_config_from(const Config& c) {
  SweepConfig s;
  s.base = scene_config_from(c);
  if (c.has("bench.methods")) {
    s.methods.clear();
    std::string list = c.get_string("bench.methods", "");
    std::replace(list.begin(), list.end(), ',', ' ');
    std::istringstream is(list);
    for (std::string name; is >> name;) s.methods.push_back(parse_method(name));
    if (s.methods.empty()) throw ConfigError("key 'bench.methods' lists no method");
  }
  s.trials = c.get_int("bench.trials", s.trials);
  s.seed = c.get_u64("bench.seed", s.seed);
  s.sampling_fraction = c.get_doubles("bench.sampling_fraction", s.sampling_fraction);
  s.eta = c.get_doubles("bench.eta", s.eta);
  s.dcorr = c.get_doubles("bench.dcorr", s.dcorr);
  s.emitters = c.get_ints("bench.emitters", s.emitters);
  s.rank_offsets = c.get_ints("bench.rank_offsets", s.rank_offsets);
  if (c.has("bench.snr_db")) {
    s.snr_db.clear();
    std::string list = c.get_string("bench.snr_db", "");
    std::replace(list.begin(), list.end(), ',', ' ');
    std::istringstream is(list);
    for (std::string v; is >> v;) {
      if (v == "inf") {
        s.snr_db.push_back(std::nullopt);
      } else {
        try {
          s.snr_db.push_back(std::stod(v));
        } catch (const std::exception&) {
          throw ConfigError("key 'bench.snr_db': '" + v + "' is not a number or inf");
        }
      }
    }
  }
  s.dowjons = dowjons_config_from(c);
  if (s.trials < 1) throw ConfigError("key 'bench.trials' must be >= 1");
  return s;
}

namespace {

struct Job {
  SceneConfig scene;
  int trial = 0;
};

// NaN axis values sort first and compare equal.
double key_value(double v) { return std::isnan(v) ? -INFINITY : v; }

auto sort_key(const MetricsRow& r) {
  return std::make_tuple(r.rho, key_value(r.eta), key_value(r.dcorr), r.rank, r.rank_hat, r.snr_db.value_or(INFINITY), r.seed,
                         std::string(r.method));
}

}  // namespace

std::vector<MetricsRow> run_sweep(const SweepConfig& sweep, const Autoencoder* ae, int workers,
                                  const std::function<void(const MetricsRow&)>& on_row) {
  std::vector<Job> jobs;
  for (double rho : sweep.sampling_fraction)
    for (double eta : sweep.eta)
      for (double dcorr : sweep.dcorr)
        for (int emitters : sweep.emitters)
          for (const auto& snr : sweep.snr_db)
            for (int t = 0; t < sweep.trials; ++t) {
              Job j;
              j.scene = sweep.base;
              j.scene.sampling_fraction = rho;
              j.scene.shadow_variance = {eta, eta};
              j.scene.decorrelation = {dcorr, dcorr};
              j.scene.emitters = emitters;
              j.scene.snr_db = snr;
              // Trial t sees the same seed in every setting so settings compare paired scenes.
              j.scene.seed = splitmix64(sweep.seed + static_cast<std::uint64_t>(t));
              j.trial = t;
              jobs.push_back(j);
            }

  std::vector<MetricsRow> rows;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto emit = [&](MetricsRow r) {
    std::lock_guard<std::mutex> lock(mu);
    if (on_row) on_row(r);
    rows.push_back(std::move(r));
  };
  auto work = [&] {
    for (std::size_t n = next++; n < jobs.size(); n = next++) {
      const Job& job = jobs[n];
      Scene scene;
      try {
        job.scene.validate();
        scene = gen_scene(job.scene);
      } catch (const std::exception& e) {
        for (Method m : sweep.methods) {
          MetricsRow r;
          r.method = method_name(m);
          r.seed = job.scene.seed;
          r.rho = job.scene.sampling_fraction;
          r.eta = job.scene.shadow_variance.lo;
          r.dcorr = job.scene.decorrelation.lo;
          r.rank = r.rank_hat = job.scene.emitters;
          r.snr_db = job.scene.snr_db;
          r.status = std::string("scene failed: ") + e.what();
          emit(r);
        }
        continue;
      }
      for (int offset : sweep.rank_offsets)
        for (Method m : sweep.methods) {
          if (m == Method::kTps && offset != 0) continue;  // rank-free baseline
          const int rank_hat = job.scene.emitters + offset;
          MetricsRow r;
          try {
            const MethodOutput out = run_method(m, scene.observations, rank_hat, ae, sweep.dowjons);
            r = score(method_name(m), out, scene, job.scene);
            r.rank_hat = rank_hat;
          } catch (const std::exception& e) {
            r.method = method_name(m);
            r.seed = job.scene.seed;
            r.rho = job.scene.sampling_fraction;
            r.eta = job.scene.shadow_variance.lo;
            r.dcorr = job.scene.decorrelation.lo;
            r.snr_db = job.scene.snr_db;
            r.rank = job.scene.emitters;
            r.rank_hat = rank_hat;
            r.sre = std::numeric_limits<double>::quiet_NaN();
            r.status = std::string("error: ") + e.what();
          }
          emit(r);
        }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) { return sort_key(a) < sort_key(b); });
  return rows;
}

std::vector<MetricsRow> aggregate(const std::vector<MetricsRow>& rows) {
  using Key = std::tuple<double, double, double, int, int, double, std::string>;
  std::map<Key, std::pair<MetricsRow, int>> acc;
  for (const MetricsRow& r : rows) {
    if (r.status != "ok") continue;
    const Key k{r.rho, key_value(r.eta), key_value(r.dcorr), r.rank, r.rank_hat, r.snr_db.value_or(INFINITY), r.method};
    auto [it, fresh] = acc.try_emplace(k, r, 0);
    MetricsRow& m = it->second.first;
    if (fresh) {
      m.sre = m.nae_c = m.nae_s = m.misdetection = m.runtime = 0.0;
    }
    m.sre += r.sre;
    m.nae_c += r.nae_c;
    m.nae_s += r.nae_s;
    m.misdetection += r.misdetection;
    m.runtime += r.runtime;
    ++it->second.second;
  }
  std::vector<MetricsRow> out;
  for (auto& [k, v] : acc) {
    MetricsRow m = v.first;
    const double n = v.second;
    m.sre /= n;
    m.nae_c /= n;
    m.nae_s /= n;
    m.misdetection /= n;
    m.runtime /= n;
    m.seed = static_cast<std::uint64_t>(v.second);
    m.status = "mean";
    out.push_back(m);
  }
  return out;
}

int default_workers() {
  if (const char* env = std::getenv("RADIOMAP_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace radiomap
