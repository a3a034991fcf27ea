#pragma once

#include <cmath>
#include <numbers>

namespace bfc {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// sin(x)/x with the removable singularity filled by its series.
inline double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

inline double sinc_sq(double x) {
  const double s = sinc(x);
  return s * s;
}

// dB of optical loss -> power transmission in (0, 1].
inline double db_to_transmission(double loss_db) { return std::pow(10.0, -loss_db / 10.0); }

}  // namespace bfc
