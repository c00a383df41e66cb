#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "volfilter/errors.hpp"

namespace volfilter {

// Fixed-point accumulator with 80 fractional bits. Integer addition is
// associative, so the result does not depend on the order of the terms.
// Terms below 2^-80 in magnitude are truncated toward zero.
class ExactSum {
 public:
  void add(double x) {
    if (x == 0.0) return;
    if (!std::isfinite(x) || std::abs(x) >= 0x1p32) throw RangeError("ExactSum term out of range");
    int e = 0;
    const double m = std::frexp(std::abs(x), &e);
    const auto mant = static_cast<__int128>(std::ldexp(m, 53));
    const int shift = e - 53 + kFracBits;
    __int128 v = 0;
    if (shift >= 0) {
      v = mant << shift;
    } else if (shift > -64) {
      v = mant >> -shift;
    }
    acc_ += x < 0.0 ? -v : v;
  }

  double value() const { return std::ldexp(static_cast<double>(acc_), -kFracBits); }

  static double of(std::span<const double> xs) {
    ExactSum s;
    for (double x : xs) s.add(x);
    return s.value();
  }

 private:
  static constexpr int kFracBits = 80;
  __int128 acc_ = 0;
};

// Pairwise summation over index order with a fixed tree shape.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace volfilter
