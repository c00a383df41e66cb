#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "volfilter/time_grid.hpp"

namespace volfilter {

// Cubic Hermite basis on the grid cell containing t. Values and time
// derivatives stored at the nodes give an O(dt^4) interpolant.
struct HermiteWeights {
  std::size_t i;  // left node
  double h00, h10, h01, h11;  // h10/h11 already multiplied by dt
};

inline HermiteWeights hermite_weights(const TimeGrid& grid, double t) {
  const double dt = grid.dt();
  const double x = (t - grid.t0) / dt;
  const auto last = static_cast<double>(grid.n_steps - 1);
  const std::size_t i = static_cast<std::size_t>(std::clamp(std::floor(x), 0.0, last));
  const double s = x - static_cast<double>(i);
  const double s2 = s * s;
  const double s3 = s2 * s;
  return {i, 2 * s3 - 3 * s2 + 1, (s3 - 2 * s2 + s) * dt, -2 * s3 + 3 * s2, (s3 - s2) * dt};
}

template <class T, class Values, class Derivs>
T hermite_eval(const HermiteWeights& w, const Values& y, const Derivs& dy) {
  return w.h00 * y[w.i] + w.h10 * dy[w.i] + w.h01 * y[w.i + 1] + w.h11 * dy[w.i + 1];
}

}  // namespace volfilter
