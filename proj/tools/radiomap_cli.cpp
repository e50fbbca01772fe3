// radiomap: scene simulation, training, completion, evaluation sweeps and
// bound reports. Settings come from sectioned key-value config files.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "radiomap/config.hpp"
#include "radiomap/experiment.hpp"
#include "radiomap/io.hpp"
#include "radiomap/metrics.hpp"
#include "radiomap/theory.hpp"

using namespace radiomap;
namespace fs = std::filesystem;

namespace {

Config load_checked(const std::string& path, const std::vector<std::string>& sections) {
  if (path.empty()) return Config{};
  Config c = Config::load(path);
  c.check_keys(sections, known_keys());
  return c;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  return os;
}

int cmd_simulate(const std::string& config, const std::string& out, bool corpus) {
  if (corpus) {
    const Config c = load_checked(config, {"corpus"});
    const CorpusConfig cc = corpus_config_from(c);
    const int count = c.get_int("corpus.count", 1000);
    write_corpus(out, gen_training_corpus(cc, count));
    std::cout << "wrote " << count << " samples to " << out << "\n";
    return 0;
  }
  const Config c = load_checked(config, {"scene"});
  const SceneConfig cfg = scene_config_from(c);
  const Scene scene = gen_scene(cfg);
  write_scene(out, scene, cfg);
  for (const auto& w : scene.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote scene " << cfg.grid.rows << "x" << cfg.grid.cols << "x" << cfg.grid.bins << " R=" << cfg.emitters
            << " |Omega|=" << scene.observations.mask().size() << " to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& config, const std::string& out, bool resume) {
  const Config c = load_checked(config, {"arch", "train"});
  const std::vector<TrainingSample> corpus = read_corpus(corpus_path);
  const std::string state_path = out + ".state";
  Autoencoder ae;
  TrainState state;
  if (resume && fs::exists(out) && fs::exists(state_path)) {
    ae = load_autoencoder(out);
    state = load_train_state(state_path);
    std::cout << "resuming after epoch " << state.epoch << "\n";
  } else {
    ae = autoencoder_from(c);
  }
  TrainConfig tc = train_config_from(c);
  const std::string loss_path = out + ".loss.csv";
  const bool append = resume && state.epoch > 0 && fs::exists(loss_path);
  std::ofstream loss(loss_path, append ? std::ios::app : std::ios::trunc);
  if (!loss) throw IoError("cannot write " + loss_path);
  if (!append) write_epoch_csv_header(loss);
  try {
    train_autoencoder(corpus, ae, tc, state, [&](const EpochStats& s) {
      loss << s.epoch << ',' << s.train_loss << ',' << s.validation_loss << "\n" << std::flush;
      std::cout << "epoch " << s.epoch << " train " << s.train_loss << " validation " << s.validation_loss << std::endl;
      save_autoencoder(ae, out);
      save_train_state(state, state_path);
    });
  } catch (const TrainingDiverged& e) {
    save_autoencoder(e.last_finite(), out);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  save_autoencoder(ae, out);
  save_train_state(state, state_path);
  return 0;
}

int cmd_complete(const std::string& scene_dir, const std::string& observations, const std::string& method_name_arg,
                 const std::string& weights, int rank, const std::string& config, const std::string& out) {
  const Method m = parse_method(method_name_arg);
  const Config c = load_checked(config, {"dowjons"});
  std::optional<SceneFiles> files;
  FiberObservations obs;
  if (!scene_dir.empty()) {
    files = read_scene(scene_dir);
    obs = files->observations;
    if (rank <= 0) rank = files->factors.rank();
  } else {
    obs = load_observations_csv(observations);
  }
  if (m != Method::kTps && rank <= 0) throw ConfigError("--rank is required without a scene directory");
  if (m != Method::kTps && weights.empty()) throw ConfigError(std::string(method_name(m)) + " needs --weights");
  std::optional<Autoencoder> ae;
  if (!weights.empty() && m != Method::kTps) ae = load_autoencoder(weights);
  const MethodOutput res = run_method(m, obs, rank, ae ? &*ae : nullptr, dowjons_config_from(c));

  fs::create_directories(out);
  write_f32(out + "/estimate.f32", tensor_to_f32(res.completion.estimate.unfolded()));
  const GridSpec& g = obs.grid();
  if (!res.completion.psds.empty()) {
    std::vector<float> v;
    for (const Psd& p : res.completion.psds)
      for (int k = 0; k < g.bins; ++k) v.push_back(static_cast<float>(p(k)));
    for (const Slf& s : res.completion.slfs)
      for (Eigen::Index q = 0; q < s.values().size(); ++q) v.push_back(static_cast<float>(s.values().data()[q]));
    write_f32(out + "/factors.f32", v);
  }
  {
    std::ofstream os = open_out(out + "/diagnostics.txt");
    const CompletionDiagnostics& d = res.completion.diagnostics;
    os << "method = " << method_name(m) << "\nrank = " << rank << "\nseconds = " << d.total_seconds
       << "\nnumerical_rank = " << d.numerical_rank << "\nfit_residual = " << d.fit_residual << "\n";
    for (const auto& w : d.warnings) os << "warning = " << w << "\n";
  }
  if (!res.trace.empty()) {
    std::ofstream os = open_out(out + "/trace.csv");
    write_trace_csv(os, res.trace);
  }
  // Band-summed power map for viewing.
  GridMatrix power(g.rows, g.cols);
  const Vector total = res.completion.estimate.unfolded().colwise().sum();
  for (int q = 0; q < g.cells(); ++q) power(q / g.cols, q % g.cols) = total(q);
  write_pgm(out + "/power.pgm", power, true);
  for (const auto& w : res.completion.diagnostics.warnings) std::cerr << "warning: " << w << "\n";
  if (files) {
    const MetricsRow row = score(method_name(m), res, *files);
    std::ofstream os = open_out(out + "/metrics.csv");
    write_metrics_header(os);
    write_metrics_row(os, row);
    write_metrics_row(std::cout, row);
  } else {
    std::cout << method_name(m) << " done in " << res.completion.diagnostics.total_seconds << " s\n";
  }
  return 0;
}

int cmd_eval(const std::string& scene_dir, const std::string& estimate, const std::string& method) {
  const SceneFiles files = read_scene(scene_dir);
  const GridSpec g = files.truth.grid();
  MethodOutput out;
  out.completion.estimate =
      RadioMapTensor(g, tensor_from_f32(read_f32(estimate, static_cast<std::size_t>(g.cells()) * g.bins), g));
  write_metrics_header(std::cout);
  write_metrics_row(std::cout, score(method, out, files));
  return 0;
}

int cmd_bench(const std::string& config, const std::string& weights, const std::string& out) {
  const Config c = load_checked(config, {"scene", "bench", "dowjons"});
  const SweepConfig sweep = sweep_config_from(c);
  std::optional<Autoencoder> ae;
  if (!weights.empty()) ae = load_autoencoder(weights);
  const int workers = default_workers();
  std::cerr << "bench: " << workers << " workers\n";
  const auto rows = run_sweep(sweep, ae ? &*ae : nullptr, workers, [](const MetricsRow& r) {
    if (r.status != "ok") std::cerr << r.method << " seed " << r.seed << ": " << r.status << "\n";
  });
  {
    std::ofstream os = open_out(out);
    write_metrics_header(os);
    for (const auto& r : rows) write_metrics_row(os, r);
  }
  std::ofstream os = open_out(out + ".mean.csv");
  write_metrics_header(os);
  write_metrics_header(std::cout);
  for (const auto& r : aggregate(rows)) {
    write_metrics_row(os, r);
    write_metrics_row(std::cout, r);
  }
  return 0;
}

int cmd_bound(const std::string& config, const std::string& weights) {
  const Config c = load_checked(config, {"bound"});
  BoundInputs in = bound_inputs_from(c);
  std::map<std::string, std::string> extra;
  if (!weights.empty()) {
    const Autoencoder ae = load_autoencoder(weights);
    const LipschitzReport lip = lipschitz_product(ae.decoder);
    in.P = lip.product;
    in.D = ae.decoder.input_shape().size();
    extra["P_source"] = "decoder weights " + weights;
    extra["P"] = std::to_string(lip.product);
  }
  NoiseNorms noise{c.get_double("bound.noise_full", 0.0), c.get_double("bound.noise_sensed", 0.0)};
  const RecoveryBudget b = recovery_budget(in, noise, c.get_optional_double("bound.err_rep"));
  if (!in.c) extra["note"] = "c defaults to 1/R by convention";
  write_bound_report(std::cout, in, b, extra);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radio map completion experiments"};
  app.require_subcommand(1);

  std::string config, out, corpus, weights, scene, observations, method = "nasdac", estimate;
  bool corpus_mode = false, resume = false;
  int rank = 0;

  auto* sim = app.add_subcommand("simulate", "generate a scene directory or a training corpus");
  sim->add_option("--config", config, "config file ([scene] or [corpus])");
  sim->add_option("--out", out, "scene directory, or corpus file with --corpus")->required();
  sim->add_flag("--corpus", corpus_mode, "write a training corpus instead of a scene");

  auto* train = app.add_subcommand("train", "train the completion autoencoder");
  train->add_option("--corpus", corpus, "corpus file")->required()->check(CLI::ExistingFile);
  train->add_option("--config", config, "config file ([arch], [train])");
  train->add_option("--out", out, "weight file; .loss.csv and .state are written next to it")->required();
  train->add_flag("--resume", resume, "continue from <out> and <out>.state");

  auto* complete = app.add_subcommand("complete", "complete one scene");
  auto* scene_opt = complete->add_option("--scene", scene, "scene directory")->check(CLI::ExistingDirectory);
  complete->add_option("--observations", observations, "observation CSV (no ground truth)")
      ->check(CLI::ExistingFile)
      ->excludes(scene_opt);
  complete->add_option("--method", method, "nasdac | dowjons | tps")
      ->check(CLI::IsMember({"nasdac", "dowjons", "tps"}));
  complete->add_option("--weights", weights, "autoencoder file");
  complete->add_option("--rank", rank, "number of emitters (default: from the scene)");
  complete->add_option("--config", config, "config file ([dowjons])");
  complete->add_option("--out", out, "result directory")->required();

  auto* eval = app.add_subcommand("eval", "score an estimate against a scene");
  eval->add_option("--scene", scene, "scene directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--estimate", estimate, "estimate.f32")->required()->check(CLI::ExistingFile);
  eval->add_option("--method", method, "label for the metrics row");

  auto* bench = app.add_subcommand("bench", "Monte-Carlo sweep; worker count from RADIOMAP_WORKERS");
  bench->add_option("--config", config, "sweep config ([scene], [bench], [dowjons])");
  bench->add_option("--weights", weights, "autoencoder file (required for learned methods)");
  bench->add_option("--out", out, "per-trial CSV; the mean table goes to <out>.mean.csv")->required();

  auto* bound = app.add_subcommand("bound", "recovery-bound report");
  bound->add_option("--config", config, "inputs file ([bound])")->required()->check(CLI::ExistingFile);
  bound->add_option("--weights", weights, "decoder whose Lipschitz product replaces bound.P");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(config, out, corpus_mode);
    if (*train) return cmd_train(corpus, config, out, resume);
    if (*complete) {
      if (scene.empty() && observations.empty()) throw ConfigError("complete needs --scene or --observations");
      return cmd_complete(scene, observations, method, weights, rank, config, out);
    }
    if (*eval) return cmd_eval(scene, estimate, method);
    if (*bench) return cmd_bench(config, weights, out);
    if (*bound) return cmd_bound(config, weights);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
