#pragma once
// Independent reference computations used by the unit and acceptance tests.

#include <array>
#include <cmath>
#include <functional>

namespace oracle {

/// Composite 5-point Gauss-Legendre on [a,b] with `pieces` sub-intervals (exact for degree <= 9 per piece).
inline double gauss_1d(const std::function<double(double)>& f, double a, double b, int pieces = 1) {
  static constexpr std::array<double, 5> x = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                              0.9061798459386640};
  static constexpr std::array<double, 5> w = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                              0.2369268850561891, 0.2369268850561891};
  const double step = (b - a) / pieces;
  double acc = 0.0;
  for (int p = 0; p < pieces; ++p) {
    const double lo = a + p * step;
    const double mid = lo + 0.5 * step;
    for (int k = 0; k < 5; ++k) acc += w[k] * f(mid + 0.5 * step * x[k]);
  }
  return 0.5 * step * acc;
}

inline double gauss_2d(const std::function<double(double, double)>& f, double x0, double x1, double y0, double y1,
                       int pieces = 1) {
  return gauss_1d([&](double y) { return gauss_1d([&](double x) { return f(x, y); }, x0, x1, pieces); }, y0, y1,
                  pieces);
}

/// First zero of the Bessel function J0, by Newton iteration on the series.
inline double bessel_j0(double x) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= -(x * x) / (4.0 * k * k);
    sum += term;
  }
  return sum;
}

inline double bessel_j0_first_zero() {
  double x = 2.4;
  for (int it = 0; it < 50; ++it) {
    const double d = 1e-7;
    const double fp = (bessel_j0(x + d) - bessel_j0(x - d)) / (2 * d);
    x -= bessel_j0(x) / fp;
  }
  return x;
}

}  // namespace oracle
