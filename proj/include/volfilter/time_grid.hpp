#pragma once

#include <cstddef>

namespace volfilter {

// Uniform grid t0 < t0 + dt < ... < T with n_steps intervals.
struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  std::size_t n_steps = 1;

  static TimeGrid make(double t0, double T, std::size_t n_steps);

  double dt() const { return (T - t0) / static_cast<double>(n_steps); }
  std::size_t nodes() const { return n_steps + 1; }
  // Exact endpoints; interior nodes as t0 + i dt.
  double time(std::size_t i) const {
    return i == n_steps ? T : t0 + static_cast<double>(i) * dt();
  }
  bool contains(double t) const { return t >= t0 && t <= T; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

}  // namespace volfilter
