#include "volfilter/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "volfilter/csv_io.hpp"
#include "volfilter/errors.hpp"

namespace volfilter {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class ValueParser {
 public:
  ValueParser(std::string_view text, int line) : s_(text), line_(line) {}

  ConfigValue parse_all() {
    ConfigValue v = parse_value();
    skip_space();
    if (pos_ != s_.size()) fail(line_, "unexpected trailing characters");
    return v;
  }

 private:
  void skip_space() {
    while (pos_ < s_.size() && (std::isspace(static_cast<unsigned char>(s_[pos_])))) ++pos_;
  }

  ConfigValue parse_value() {
    skip_space();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    const char c = s_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    return parse_scalar();
  }

  ConfigValue parse_string() {
    ConfigValue v;
    v.kind = ConfigValue::Kind::String;
    v.line = line_;
    ++pos_;
    while (true) {
      if (pos_ >= s_.size()) fail(line_, "unterminated string");
      const char c = s_[pos_++];
      if (c == '"') break;
      if (c == '\\') {
        if (pos_ >= s_.size()) fail(line_, "dangling escape");
        const char e = s_[pos_++];
        switch (e) {
          case '"': v.text += '"'; break;
          case '\\': v.text += '\\'; break;
          case 'n': v.text += '\n'; break;
          case 't': v.text += '\t'; break;
          default: fail(line_, std::string("unsupported escape \\") + e);
        }
      } else {
        v.text += c;
      }
    }
    return v;
  }

  ConfigValue parse_array() {
    ConfigValue v;
    v.kind = ConfigValue::Kind::Array;
    v.line = line_;
    ++pos_;
    while (true) {
      skip_space();
      if (pos_ >= s_.size()) fail(line_, "unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        break;
      }
      v.items.push_back(parse_value());
      if (v.items.back().kind != v.items.front().kind) fail(line_, "mixed-type array");
      skip_space();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
      } else if (pos_ < s_.size() && s_[pos_] != ']') {
        fail(line_, "expected ',' or ']' in array");
      }
    }
    return v;
  }

  ConfigValue parse_scalar() {
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[end]))) {
      ++end;
    }
    const std::string_view tok = s_.substr(pos_, end - pos_);
    pos_ = end;
    ConfigValue v;
    v.line = line_;
    v.text = std::string(tok);
    if (tok == "true" || tok == "false") {
      v.kind = ConfigValue::Kind::Bool;
      v.boolean = tok == "true";
      return v;
    }
    std::string digits;
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (tok[i] == '_') {
        const bool ok = i > 0 && i + 1 < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i - 1])) &&
                        std::isdigit(static_cast<unsigned char>(tok[i + 1]));
        if (!ok) fail(line_, "misplaced '_' in number");
        continue;
      }
      digits += tok[i];
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos ||
                          digits == "inf" || digits == "+inf" || digits == "-inf" || digits == "nan";
    const char* first = digits.data();
    const char* last = digits.data() + digits.size();
    if (!digits.empty() && digits.front() == '+') ++first;
    if (is_float) {
      double x = 0.0;
      const auto res = std::from_chars(first, last, x);
      if (res.ec != std::errc() || res.ptr != last) fail(line_, "malformed number '" + v.text + "'");
      v.kind = ConfigValue::Kind::Float;
      v.number = x;
    } else {
      std::int64_t x = 0;
      const auto res = std::from_chars(first, last, x);
      if (res.ec != std::errc() || res.ptr != last) fail(line_, "malformed value '" + v.text + "'");
      v.kind = ConfigValue::Kind::Integer;
      v.integer = x;
      v.number = static_cast<double>(x);
    }
    return v;
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

int bracket_balance(std::string_view s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (in_string && s[i] == '\\') {
      ++i;
    } else if (s[i] == '"') {
      in_string = !in_string;
    } else if (!in_string && s[i] == '[') {
      ++depth;
    } else if (!in_string && s[i] == ']') {
      --depth;
    }
  }
  return depth;
}

}  // namespace

double ConfigValue::as_double(const std::string& key) const {
  if (kind != Kind::Float && kind != Kind::Integer) fail(line, key + " must be a number");
  return number;
}

std::uint64_t ConfigValue::as_u64(const std::string& key) const {
  if (kind != Kind::Integer) fail(line, key + " must be an integer");
  if (integer < 0) fail(line, key + " must be nonnegative");
  return static_cast<std::uint64_t>(integer);
}

std::string ConfigValue::as_string(const std::string& key) const {
  if (kind != Kind::String) fail(line, key + " must be a string");
  return text;
}

bool ConfigValue::as_bool(const std::string& key) const {
  if (kind != Kind::Bool) fail(line, key + " must be true or false");
  return boolean;
}

std::vector<std::string> ConfigValue::as_string_list(const std::string& key) const {
  if (kind != Kind::Array) fail(line, key + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : items) out.push_back(item.as_string(key));
  return out;
}

ConfigDocument parse_config_document(std::string_view text) {
  ConfigDocument doc;
  std::string table;
  doc[table];
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const int start_line = line_no;
    std::string line = strip_comment(raw);
    // Arrays may continue over several lines.
    while (bracket_balance(line) > 0 && std::getline(in, raw)) {
      ++line_no;
      line += ' ' + strip_comment(raw);
    }
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.size() < 3 || body.back() != ']') fail(start_line, "malformed table header");
      const std::string_view name = trim(body.substr(1, body.size() - 2));
      if (name.empty() || !std::all_of(name.begin(), name.end(), bare_key_char)) {
        fail(start_line, "malformed table name");
      }
      table = std::string(name);
      if (doc.count(table) != 0 && table != "") fail(start_line, "duplicate table [" + table + "]");
      doc[table];
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) fail(start_line, "expected key = value");
    const std::string_view key = trim(body.substr(0, eq));
    if (key.empty() || !std::all_of(key.begin(), key.end(), bare_key_char)) {
      fail(start_line, "malformed key");
    }
    ConfigValue value = ValueParser(body.substr(eq + 1), start_line).parse_all();
    auto& entries = doc[table];
    if (!entries.emplace(std::string(key), std::move(value)).second) {
      fail(start_line, "duplicate key '" + std::string(key) + "'");
    }
  }
  return doc;
}

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names = {
      "riccati",          "pde_residual",      "hamiltonian",       "filter_consistency",
      "particle_vs_kb",   "duality_gap_log",   "duality_gap_power", "optimality_power",
      "optimality_log",   "degenerate",        "determinism"};
  return names;
}

namespace {

using Table = std::map<std::string, ConfigValue>;

template <class Fn>
void for_each_entry(const Table& table, const std::string& table_name, Fn&& fn) {
  for (const auto& [key, value] : table) {
    if (!fn(key, value)) {
      fail(value.line, "unknown key '" + key + "' in [" + table_name + "]");
    }
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text) {
  const ConfigDocument doc = parse_config_document(text);
  ExperimentConfig cfg;
  ModelParams& m = cfg.model;
  double p = cfg.utility.p;
  std::string utility_kind = "Power";
  double t0 = cfg.grid.t0;
  double T = cfg.grid.T;
  std::size_t n_steps = cfg.grid.n_steps;

  for (const auto& [name, table] : doc) {
    if (name.empty()) {
      if (!table.empty()) fail(table.begin()->second.line, "keys must live inside a table");
    } else if (name == "model") {
      for_each_entry(table, name, [&](const std::string& key, const ConfigValue& v) {
        if (key == "kind") {
          m.kind = model_kind_from_string(v.as_string(key));
          return true;
        }
        const std::pair<const char*, double*> fields[] = {
            {"lambda_V", &m.lambda_V},     {"theta", &m.theta},       {"sigma_V", &m.sigma_V},
            {"lambda_mu", &m.lambda_mu},   {"theta_mu", &m.theta_mu}, {"sigma_mu", &m.sigma_mu},
            {"lambda_beta", &m.lambda_beta}, {"sigma_beta", &m.sigma_beta}, {"rho", &m.rho},
            {"m0", &m.m0},                 {"sigma0", &m.sigma0},     {"m1", &m.m1},
            {"sigma1", &m.sigma1},         {"S0", &m.S0},             {"V0", &m.V0}};
        for (const auto& [field, target] : fields) {
          if (key == field) {
            *target = v.as_double(key);
            return true;
          }
        }
        return false;
      });
    } else if (name == "grid") {
      for_each_entry(table, name, [&](const std::string& key, const ConfigValue& v) {
        if (key == "t0") {
          t0 = v.as_double(key);
        } else if (key == "T") {
          T = v.as_double(key);
        } else if (key == "n_steps") {
          n_steps = v.as_u64(key);
        } else {
          return false;
        }
        return true;
      });
    } else if (name == "utility") {
      for_each_entry(table, name, [&](const std::string& key, const ConfigValue& v) {
        if (key == "kind") {
          utility_kind = v.as_string(key);
        } else if (key == "p") {
          p = v.as_double(key);
        } else {
          return false;
        }
        return true;
      });
    } else if (name == "run") {
      for_each_entry(table, name, [&](const std::string& key, const ConfigValue& v) {
        if (key == "n_paths") {
          cfg.n_paths = v.as_u64(key);
        } else if (key == "n_particles") {
          cfg.n_particles = v.as_u64(key);
        } else if (key == "seed") {
          cfg.seed = v.as_u64(key);
        } else if (key == "theta_mode") {
          cfg.theta_mode = theta_mode_from_string(v.as_string(key));
        } else if (key == "pi_max") {
          cfg.pi_max = v.as_double(key);
        } else if (key == "x0") {
          cfg.x0 = v.as_double(key);
        } else if (key == "output_dir") {
          cfg.output_dir = v.as_string(key);
        } else if (key == "checks") {
          cfg.checks = v.as_string_list(key);
        } else if (key == "export_paths") {
          cfg.export_paths = v.as_u64(key);
        } else if (key == "plots") {
          cfg.plots = v.as_bool(key);
        } else {
          return false;
        }
        return true;
      });
    } else {
      fail(table.empty() ? 0 : table.begin()->second.line, "unknown table [" + name + "]");
    }
  }

  cfg.grid = TimeGrid::make(t0, T, n_steps);
  const UtilityKind uk = utility_kind_from_string(utility_kind);
  cfg.utility = uk == UtilityKind::Log ? UtilitySpec::log_utility() : UtilitySpec::power(p);
  validate_params(cfg.model);
  if (cfg.n_paths < 1) throw ConfigError("n_paths must be at least 1");
  if (cfg.n_particles < 1) throw ConfigError("n_particles must be at least 1");
  if (!(cfg.pi_max > 0.0)) throw ConfigError("pi_max must be positive");
  if (!(cfg.x0 > 0.0)) throw ConfigError("x0 must be positive");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  for (const auto& check : cfg.checks) {
    if (std::find(known_checks().begin(), known_checks().end(), check) == known_checks().end()) {
      throw ConfigError("unknown check '" + check + "'");
    }
  }
  for (std::size_t i = 0; i < cfg.checks.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.checks.size(); ++j) {
      if (cfg.checks[i] == cfg.checks[j]) throw ConfigError("check '" + cfg.checks[i] + "' listed twice");
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::string render_experiment_config(const ExperimentConfig& c) {
  auto num = [](double x) { return format_double(x, true); };
  auto str = [](const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"' || ch == '\\') out += '\\';
      out += ch;
    }
    return out + "\"";
  };
  const ModelParams& m = c.model;
  std::ostringstream out;
  out << "[model]\n"
      << "kind = " << str(std::string(to_string(m.kind))) << "\n"
      << "lambda_V = " << num(m.lambda_V) << "\n"
      << "theta = " << num(m.theta) << "\n"
      << "sigma_V = " << num(m.sigma_V) << "\n"
      << "lambda_mu = " << num(m.lambda_mu) << "\n"
      << "theta_mu = " << num(m.theta_mu) << "\n"
      << "sigma_mu = " << num(m.sigma_mu) << "\n"
      << "lambda_beta = " << num(m.lambda_beta) << "\n"
      << "sigma_beta = " << num(m.sigma_beta) << "\n"
      << "rho = " << num(m.rho) << "\n"
      << "m0 = " << num(m.m0) << "\n"
      << "sigma0 = " << num(m.sigma0) << "\n"
      << "m1 = " << num(m.m1) << "\n"
      << "sigma1 = " << num(m.sigma1) << "\n"
      << "S0 = " << num(m.S0) << "\n"
      << "V0 = " << num(m.V0) << "\n\n"
      << "[grid]\n"
      << "t0 = " << num(c.grid.t0) << "\n"
      << "T = " << num(c.grid.T) << "\n"
      << "n_steps = " << c.grid.n_steps << "\n\n"
      << "[utility]\n"
      << "kind = " << str(std::string(to_string(c.utility.kind))) << "\n";
  if (c.utility.kind == UtilityKind::Power) out << "p = " << num(c.utility.p) << "\n";
  out << "\n[run]\n"
      << "n_paths = " << c.n_paths << "\n"
      << "n_particles = " << c.n_particles << "\n"
      << "seed = " << c.seed << "\n"
      << "theta_mode = " << str(std::string(to_string(c.theta_mode))) << "\n"
      << "pi_max = " << num(c.pi_max) << "\n"
      << "x0 = " << num(c.x0) << "\n"
      << "output_dir = " << str(c.output_dir) << "\n"
      << "export_paths = " << c.export_paths << "\n"
      << "plots = " << (c.plots ? "true" : "false") << "\n"
      << "checks = [";
  for (std::size_t i = 0; i < c.checks.size(); ++i) out << (i ? ", " : "") << str(c.checks[i]);
  out << "]\n";
  return out.str();
}

}  // namespace volfilter
