#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "volfilter/dual_value.hpp"
#include "volfilter/models.hpp"
#include "volfilter/time_grid.hpp"

namespace volfilter {

// Parsed value of the TOML subset used for run configuration: strings,
// integers, floats, booleans and single-type arrays of those.
struct ConfigValue {
  enum class Kind { String, Integer, Float, Bool, Array };
  Kind kind = Kind::String;
  std::string text;  // raw lexeme or unescaped string
  std::int64_t integer = 0;
  double number = 0.0;
  bool boolean = false;
  std::vector<ConfigValue> items;
  int line = 0;

  double as_double(const std::string& key) const;
  std::uint64_t as_u64(const std::string& key) const;
  std::string as_string(const std::string& key) const;
  bool as_bool(const std::string& key) const;
  std::vector<std::string> as_string_list(const std::string& key) const;
};

// table name -> key -> value. Keys before the first header live in table "".
using ConfigDocument = std::map<std::string, std::map<std::string, ConfigValue>>;

// ConfigError with the line number on malformed input or duplicate keys.
ConfigDocument parse_config_document(std::string_view text);

// Names accepted in [run] checks, in execution order.
const std::vector<std::string>& known_checks();

struct ExperimentConfig {
  ModelParams model = canonical_params();
  TimeGrid grid = TimeGrid{0.0, 1.0, 1000};
  UtilitySpec utility = UtilitySpec::power(0.5);
  std::size_t n_paths = 1000;
  std::size_t n_particles = 1000;
  std::uint64_t seed = 0;
  ThetaMode theta_mode = ThetaMode::Stationary;
  double pi_max = 10.0;
  double x0 = 1.0;
  std::string output_dir = "volfilter_out";
  std::vector<std::string> checks = known_checks();  // an explicit [] runs nothing
  std::size_t export_paths = 10;  // paths written to paths.csv and filters/
  bool plots = false;
};

// Unknown tables or keys, wrong value types and unknown check names are
// ConfigError; parameter invariants are ValidationError.
ExperimentConfig parse_experiment_config(std::string_view text);
ExperimentConfig load_experiment_config(const std::string& path);
// Round-trips through parse_experiment_config.
std::string render_experiment_config(const ExperimentConfig& config);

}  // namespace volfilter
