#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "volfilter/dual_value.hpp"
#include "volfilter/filtering.hpp"
#include "volfilter/models.hpp"
#include "volfilter/sde_sim.hpp"

namespace volfilter {

// Shortest decimal that parses back to the same double. With as_float_literal
// the text always contains '.', 'e', "inf" or "nan".
std::string format_double(double x, bool as_float_literal = false);

// path_id,t,S,V,mu,beta,dW1,dW2,dW3,dW4. Increment columns are empty on the last node.
void write_paths_csv(std::ostream& out, const PathSet& paths);
// t,mu_bar,beta_bar,theta11,theta12,theta22,dWbar1,dWbar2
void write_filter_csv(std::ostream& out, const FilterOutput& filter);
// t,A_tilde,B_tilde,A_bar,B_bar,C_bar
void write_coeffs_csv(std::ostream& out, const ValueCoeffs& coeffs);
// path_id,R_T,U
void write_wealth_csv(std::ostream& out, std::span<const double> terminal_wealth,
                      const UtilitySpec& utility);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // empty cells read as NaN

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace volfilter
