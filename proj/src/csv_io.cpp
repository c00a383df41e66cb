#include "volfilter/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "volfilter/errors.hpp"

namespace volfilter {

std::string format_double(double x, bool as_float_literal) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, res.ptr);
  if (as_float_literal && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

void row(std::ostream& out, std::initializer_list<double> cells) {
  bool first = true;
  for (double c : cells) {
    if (!first) out << ',';
    out << format_double(c);
    first = false;
  }
  out << '\n';
}

}  // namespace

void write_paths_csv(std::ostream& out, const PathSet& set) {
  out << "path_id,t,S,V,mu,beta,dW1,dW2,dW3,dW4\n";
  const std::size_t n = set.grid.n_steps;
  for (std::size_t id = 0; id < set.paths.size(); ++id) {
    const MarketPath& p = set.paths[id];
    for (std::size_t i = 0; i <= n; ++i) {
      out << id << ',' << format_double(set.grid.time(i)) << ',' << format_double(p.S(i)) << ','
          << format_double(p.V[i]) << ',' << format_double(p.mu[i]) << ','
          << format_double(p.beta[i]);
      if (i < n) {
        out << ',' << format_double(p.dW1[i]) << ',' << format_double(p.dW2[i]) << ','
            << format_double(p.dW3[i]) << ',' << format_double(p.dW4[i]) << '\n';
      } else {
        out << ",,,,\n";
      }
    }
  }
}

void write_filter_csv(std::ostream& out, const FilterOutput& f) {
  out << "t,mu_bar,beta_bar,theta11,theta12,theta22,dWbar1,dWbar2\n";
  const std::size_t n = f.grid.n_steps;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i <= n; ++i) {
    const Mat2 th = f.theta ? f.theta->Theta[i] : Mat2::Constant(nan);
    out << format_double(f.grid.time(i)) << ',' << format_double(f.mu_bar[i]) << ','
        << format_double(f.beta_bar[i]) << ',' << format_double(th(0, 0)) << ','
        << format_double(th(0, 1)) << ',' << format_double(th(1, 1));
    if (i < n) {
      out << ',' << format_double(f.dWbar1[i]) << ',' << format_double(f.dWbar2[i]) << '\n';
    } else {
      out << ",,\n";
    }
  }
}

void write_coeffs_csv(std::ostream& out, const ValueCoeffs& c) {
  out << "t,A_tilde,B_tilde,A_bar,B_bar,C_bar\n";
  for (std::size_t i = 0; i < c.grid.nodes(); ++i) {
    row(out, {c.grid.time(i), c.A_tilde[i], c.B_tilde[i], c.A_bar[i], c.B_bar[i], c.C_bar[i]});
  }
}

void write_wealth_csv(std::ostream& out, std::span<const double> terminal_wealth,
                      const UtilitySpec& utility) {
  out << "path_id,R_T,U\n";
  for (std::size_t i = 0; i < terminal_wealth.size(); ++i) {
    out << i << ',' << format_double(terminal_wealth[i]) << ','
        << format_double(utility.U(terminal_wealth[i])) << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DimensionError("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DimensionError("'" + path + "' is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      const std::string_view cell(line.data() + start, end - start);
      double x = nan;
      if (!cell.empty()) {
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
          throw DimensionError("'" + path + "' line " + std::to_string(line_no) + ": bad number");
        }
      }
      values.push_back(x);
      start = end + 1;
    }
    if (values.size() != table.header.size()) {
      throw DimensionError("'" + path + "' line " + std::to_string(line_no) + ": wrong column count");
    }
    table.rows.push_back(std::move(values));
  }
  return table;
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace volfilter
