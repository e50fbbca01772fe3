#pragma once

// Sectioned key-value configuration files:
//
//   # comment
//   [scene]
//   rows = 32
//   snr_db = 30
//
// Keys are addressed as "section.key". Keys before any section header live
// in the unnamed section and are addressed by their bare name.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "radiomap/dowjons.hpp"
#include "radiomap/neural.hpp"
#include "radiomap/simulate.hpp"
#include "radiomap/theory.hpp"

namespace radiomap {

class Config {
 public:
  static Config parse(std::istream& is, const std::string& origin = "<config>");
  static Config parse_string(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::optional<double> get_optional_double(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  /// Value must be one of choices.
  std::string get_choice(const std::string& key, const std::vector<std::string>& choices, const std::string& fallback) const;

  /// Throws ConfigError naming the first key of a listed section that is
  /// not in allowed, together with the allowed keys of that section.
  void check_keys(const std::vector<std::string>& sections, const std::set<std::string>& allowed) const;

  void write(std::ostream& os) const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

SceneConfig scene_config_from(const Config& cfg);
CorpusConfig corpus_config_from(const Config& cfg);
ArchConfig arch_config_from(const Config& cfg);
TrainConfig train_config_from(const Config& cfg);
DowJonsConfig dowjons_config_from(const Config& cfg);
BoundInputs bound_inputs_from(const Config& cfg);

/// Untrained autoencoder for arch.preset in {desk, full, dense}; the dense
/// preset takes its widths from arch.hidden.
Autoencoder autoencoder_from(const Config& cfg);

/// Keys accepted in each documented section.
const std::set<std::string>& known_keys();

/// Writes a SceneConfig back in the same format.
void write_scene_config(std::ostream& os, const SceneConfig& cfg);

}  // namespace radiomap
