#include "radiomap/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace radiomap {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace

Config Config::parse(std::istream& is, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
    cfg.values_[full] = trim(line.substr(eq + 1));
  }
  return cfg;
}

Config Config::parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  return parse(is, path);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const long long v = parse_integer(key, it->second);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("key '" + key + "': integer out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t out = 0;
  const std::string& v = it->second;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': expected one of true, false, got '" + v + "'");
}

std::optional<double> Config::get_optional_double(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second == "none" || it->second.empty()) return std::nullopt;
  return parse_double(key, it->second);
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

std::vector<int> Config::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(it->second)) out.push_back(static_cast<int>(parse_integer(key, item)));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

std::string Config::get_choice(const std::string& key, const std::vector<std::string>& choices,
                               const std::string& fallback) const {
  const std::string v = get_string(key, fallback);
  if (std::find(choices.begin(), choices.end(), v) == choices.end()) {
    throw ConfigError("key '" + key + "': '" + v + "' is not one of " + join(choices));
  }
  return v;
}

void Config::check_keys(const std::vector<std::string>& sections, const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
      std::vector<std::string> names;
      for (const auto& s : sections) names.push_back("[" + s + "]");
      throw ConfigError("key '" + key + "' is in an unsupported section; allowed sections: " + join(names));
    }
    if (!allowed.count(key)) {
      std::vector<std::string> same;
      for (const auto& a : allowed)
        if (a.rfind(section + ".", 0) == 0) same.push_back(a.substr(section.size() + 1));
      throw ConfigError("unknown key '" + key + "'; allowed keys in [" + section + "]: " + join(same));
    }
  }
}

void Config::write(std::ostream& os) const {
  std::string current = "\x01";
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    if (section != current) {
      if (!section.empty()) os << "[" << section << "]\n";
      current = section;
    }
    os << (dot == std::string::npos ? key : key.substr(dot + 1)) << " = " << value << "\n";
  }
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "scene.rows", "scene.cols", "scene.bins", "scene.emitters", "scene.pathloss_min", "scene.pathloss_max",
      "scene.eta_min", "scene.eta_max", "scene.dcorr_min", "scene.dcorr_max", "scene.psd_width_min",
      "scene.psd_width_max", "scene.psd_amplitude_min", "scene.psd_amplitude_max", "scene.subbands",
      "scene.sparse_occupancy", "scene.sampling_fraction", "scene.snr_db", "scene.min_distance", "scene.off_grid",
      "scene.off_grid_margin", "scene.seed",
      "corpus.rows", "corpus.cols", "corpus.count", "corpus.pathloss_min", "corpus.pathloss_max", "corpus.eta_min",
      "corpus.eta_max", "corpus.dcorr_min", "corpus.dcorr_max", "corpus.mask_fraction_min", "corpus.mask_fraction_max",
      "corpus.min_distance", "corpus.off_grid", "corpus.off_grid_margin", "corpus.dcorr_step", "corpus.seed",
      "arch.preset", "arch.rows", "arch.cols", "arch.latent_dim", "arch.mask_channel", "arch.input_transform",
      "arch.log_decades", "arch.hidden",
      "train.epochs", "train.batch_size", "train.learning_rate", "train.beta1", "train.beta2", "train.epsilon",
      "train.validation_fraction", "train.seed",
      "dowjons.max_iterations", "dowjons.tolerance", "dowjons.inner_steps", "dowjons.step", "dowjons.beta1",
      "dowjons.beta2", "dowjons.epsilon", "dowjons.max_halvings", "dowjons.ridge", "dowjons.init",
      "tps.smoothing",
      "bound.R", "bound.K", "bound.D", "bound.alpha", "bound.beta", "bound.P", "bound.q", "bound.upsilon", "bound.nu",
      "bound.delta", "bound.c", "bound.omega", "bound.I", "bound.J", "bound.err_rep", "bound.noise_full",
      "bound.noise_sensed",
      "bench.methods", "bench.trials", "bench.seed", "bench.rank", "bench.rank_offsets", "bench.sampling_fraction",
      "bench.eta", "bench.dcorr", "bench.emitters", "bench.snr_db",
  };
  return keys;
}

SceneConfig scene_config_from(const Config& c) {
  SceneConfig s;
  s.grid.rows = c.get_int("scene.rows", s.grid.rows);
  s.grid.cols = c.get_int("scene.cols", s.grid.cols);
  s.grid.bins = c.get_int("scene.bins", s.grid.bins);
  s.emitters = c.get_int("scene.emitters", s.emitters);
  s.pathloss = {c.get_double("scene.pathloss_min", s.pathloss.lo), c.get_double("scene.pathloss_max", s.pathloss.hi)};
  s.shadow_variance = {c.get_double("scene.eta_min", s.shadow_variance.lo), c.get_double("scene.eta_max", s.shadow_variance.hi)};
  s.decorrelation = {c.get_double("scene.dcorr_min", s.decorrelation.lo), c.get_double("scene.dcorr_max", s.decorrelation.hi)};
  s.psd_width = {c.get_double("scene.psd_width_min", s.psd_width.lo), c.get_double("scene.psd_width_max", s.psd_width.hi)};
  s.psd_amplitude = {c.get_double("scene.psd_amplitude_min", s.psd_amplitude.lo),
                     c.get_double("scene.psd_amplitude_max", s.psd_amplitude.hi)};
  s.subbands = c.get_int("scene.subbands", s.subbands);
  s.sparse_occupancy = c.get_bool("scene.sparse_occupancy", s.sparse_occupancy);
  s.sampling_fraction = c.get_double("scene.sampling_fraction", s.sampling_fraction);
  s.snr_db = c.get_optional_double("scene.snr_db");
  s.min_distance = c.get_double("scene.min_distance", s.min_distance);
  s.off_grid = c.get_bool("scene.off_grid", s.off_grid);
  s.off_grid_margin = c.get_double("scene.off_grid_margin", s.off_grid_margin);
  s.seed = c.get_u64("scene.seed", s.seed);
  try {
    s.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("[scene]: ") + e.what());
  }
  return s;
}

CorpusConfig corpus_config_from(const Config& c) {
  CorpusConfig s;
  s.rows = c.get_int("corpus.rows", s.rows);
  s.cols = c.get_int("corpus.cols", s.cols);
  s.pathloss = {c.get_double("corpus.pathloss_min", s.pathloss.lo), c.get_double("corpus.pathloss_max", s.pathloss.hi)};
  s.shadow_variance = {c.get_double("corpus.eta_min", s.shadow_variance.lo), c.get_double("corpus.eta_max", s.shadow_variance.hi)};
  s.decorrelation = {c.get_double("corpus.dcorr_min", s.decorrelation.lo), c.get_double("corpus.dcorr_max", s.decorrelation.hi)};
  s.mask_fraction = {c.get_double("corpus.mask_fraction_min", s.mask_fraction.lo),
                     c.get_double("corpus.mask_fraction_max", s.mask_fraction.hi)};
  s.min_distance = c.get_double("corpus.min_distance", s.min_distance);
  s.off_grid = c.get_bool("corpus.off_grid", s.off_grid);
  s.off_grid_margin = c.get_double("corpus.off_grid_margin", s.off_grid_margin);
  s.decorrelation_step = c.get_double("corpus.dcorr_step", s.decorrelation_step);
  s.seed = c.get_u64("corpus.seed", s.seed);
  try {
    s.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("[corpus]: ") + e.what());
  }
  return s;
}

ArchConfig arch_config_from(const Config& c) {
  ArchConfig a;
  a.rows = c.get_int("arch.rows", a.rows);
  a.cols = c.get_int("arch.cols", a.cols);
  a.latent_dim = c.get_int("arch.latent_dim", a.latent_dim);
  a.mask_channel = c.get_bool("arch.mask_channel", a.mask_channel);
  a.input_transform = c.get_choice("arch.input_transform", {"linear", "log"}, "linear") == "log" ? InputTransform::kLog
                                                                                                : InputTransform::kLinear;
  a.log_decades = c.get_double("arch.log_decades", a.log_decades);
  return a;
}

TrainConfig train_config_from(const Config& c) {
  TrainConfig t;
  t.epochs = c.get_int("train.epochs", t.epochs);
  t.batch_size = c.get_int("train.batch_size", t.batch_size);
  t.learning_rate = c.get_double("train.learning_rate", t.learning_rate);
  t.beta1 = c.get_double("train.beta1", t.beta1);
  t.beta2 = c.get_double("train.beta2", t.beta2);
  t.epsilon = c.get_double("train.epsilon", t.epsilon);
  t.validation_fraction = c.get_double("train.validation_fraction", t.validation_fraction);
  t.seed = c.get_u64("train.seed", t.seed);
  if (t.epochs < 0) throw ConfigError("key 'train.epochs' must be >= 0");
  if (t.batch_size < 1) throw ConfigError("key 'train.batch_size' must be >= 1");
  if (!(t.learning_rate > 0.0)) throw ConfigError("key 'train.learning_rate' must be positive");
  return t;
}

DowJonsConfig dowjons_config_from(const Config& c) {
  DowJonsConfig d;
  d.max_iterations = c.get_int("dowjons.max_iterations", d.max_iterations);
  d.tolerance = c.get_double("dowjons.tolerance", d.tolerance);
  d.inner_steps = c.get_int("dowjons.inner_steps", d.inner_steps);
  d.step = c.get_double("dowjons.step", d.step);
  d.beta1 = c.get_double("dowjons.beta1", d.beta1);
  d.beta2 = c.get_double("dowjons.beta2", d.beta2);
  d.epsilon = c.get_double("dowjons.epsilon", d.epsilon);
  d.max_halvings = c.get_int("dowjons.max_halvings", d.max_halvings);
  d.ridge = c.get_double("dowjons.ridge", d.ridge);
  d.init = c.get_choice("dowjons.init", {"reencode", "completion"}, d.init == LatentInit::kReencode ? "reencode" : "completion") ==
                   "reencode"
               ? LatentInit::kReencode
               : LatentInit::kCompletion;
  d.validate();
  return d;
}

Autoencoder autoencoder_from(const Config& c) {
  const std::string preset = c.get_choice("arch.preset", {"desk", "full", "dense"}, "desk");
  ArchConfig a = arch_config_from(c);
  if (preset == "full") {
    if (!c.has("arch.rows")) a.rows = 50;
    if (!c.has("arch.cols")) a.cols = 50;
    if (!c.has("arch.latent_dim")) a.latent_dim = 256;
    return make_full_autoencoder(a);
  }
  if (preset == "dense") return make_dense_autoencoder(a, c.get_ints("arch.hidden", {256}));
  return make_desk_autoencoder(a);
}

BoundInputs bound_inputs_from(const Config& c) {
  BoundInputs b;
  b.R = c.get_int("bound.R", b.R);
  b.K = c.get_int("bound.K", b.K);
  b.D = c.get_int("bound.D", b.D);
  b.alpha = c.get_double("bound.alpha", b.alpha);
  b.beta = c.get_double("bound.beta", b.beta);
  b.P = c.get_double("bound.P", b.P);
  b.q = c.get_double("bound.q", b.q);
  b.upsilon = c.get_double("bound.upsilon", b.upsilon);
  b.nu = c.get_double("bound.nu", b.nu);
  b.delta = c.get_double("bound.delta", b.delta);
  b.c = c.get_optional_double("bound.c");
  b.omega = c.get_int("bound.omega", b.omega);
  b.I = c.get_int("bound.I", b.I);
  b.J = c.get_int("bound.J", b.J);
  try {
    b.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("[bound]: ") + e.what());
  }
  return b;
}

void write_scene_config(std::ostream& os, const SceneConfig& s) {
  os.precision(17);
  os << "[scene]\n";
  os << "rows = " << s.grid.rows << "\ncols = " << s.grid.cols << "\nbins = " << s.grid.bins << "\n";
  os << "emitters = " << s.emitters << "\n";
  os << "pathloss_min = " << s.pathloss.lo << "\npathloss_max = " << s.pathloss.hi << "\n";
  os << "eta_min = " << s.shadow_variance.lo << "\neta_max = " << s.shadow_variance.hi << "\n";
  os << "dcorr_min = " << s.decorrelation.lo << "\ndcorr_max = " << s.decorrelation.hi << "\n";
  os << "psd_width_min = " << s.psd_width.lo << "\npsd_width_max = " << s.psd_width.hi << "\n";
  os << "psd_amplitude_min = " << s.psd_amplitude.lo << "\npsd_amplitude_max = " << s.psd_amplitude.hi << "\n";
  os << "subbands = " << s.subbands << "\n";
  os << "sparse_occupancy = " << (s.sparse_occupancy ? "true" : "false") << "\n";
  os << "sampling_fraction = " << s.sampling_fraction << "\n";
  os << "snr_db = ";
  if (s.snr_db) {
    os << *s.snr_db;
  } else {
    os << "none";
  }
  os << "\nmin_distance = " << s.min_distance << "\n";
  os << "off_grid = " << (s.off_grid ? "true" : "false") << "\noff_grid_margin = " << s.off_grid_margin << "\n";
  os << "seed = " << s.seed << "\n";
}

}  // namespace radiomap
