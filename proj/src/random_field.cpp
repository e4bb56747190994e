#include "maglab/random_field.hpp"

#include <cmath>
#include <random>

#include "maglab/field.hpp"

namespace maglab {

FourierField::FourierField(std::uint64_t seed, FourierOptions opt) : seed_(seed), opt_(opt), n_(2 * opt.K + 1) {
  if (opt_.K < 1) throw Error("fourier field: K must be at least 1");
  coef_.assign(static_cast<std::size_t>(n_) * n_, Complex{});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k2 = -opt_.K; k2 <= opt_.K; ++k2) {
    for (int k1 = -opt_.K; k1 <= opt_.K; ++k1) {
      const double r = std::hypot(k1, k2);
      if (r == 0.0 || r > opt_.K) continue;
      const double w = opt_.amplitude * std::pow(1.0 + r, -(1.0 + opt_.epsilon));
      const double a = normal(rng);
      const double b = normal(rng);
      // Re[(a - i b) e^{i k.x}] = a cos + b sin
      coef_[static_cast<std::size_t>(k2 + opt_.K) * n_ + (k1 + opt_.K)] = w * Complex(a, -b);
    }
  }
}

namespace {

void powers(double x, int K, std::vector<Complex>& out) {
  out.resize(2 * K + 1);
  const Complex e(std::cos(x), std::sin(x));
  out[K] = 1.0;
  for (int k = 1; k <= K; ++k) {
    out[K + k] = out[K + k - 1] * e;
    out[K - k] = std::conj(out[K + k]);
  }
}

}  // namespace

double FourierField::operator()(Point p) const {
  std::vector<Complex> ex, ey;
  powers(p.x, opt_.K, ex);
  powers(p.y, opt_.K, ey);
  Complex acc{};
  for (int b = 0; b < n_; ++b) {
    Complex row{};
    const Complex* c = &coef_[static_cast<std::size_t>(b) * n_];
    for (int a = 0; a < n_; ++a) row += c[a] * ex[a];
    acc += row * ey[b];
  }
  return opt_.offset + acc.real();
}

Vec2 FourierField::gradient(Point p) const {
  std::vector<Complex> ex, ey;
  powers(p.x, opt_.K, ex);
  powers(p.y, opt_.K, ey);
  Complex gx{}, gy{};
  for (int b = 0; b < n_; ++b) {
    const double k2 = b - opt_.K;
    Complex row{}, row_k1{};
    const Complex* c = &coef_[static_cast<std::size_t>(b) * n_];
    for (int a = 0; a < n_; ++a) {
      const Complex t = c[a] * ex[a];
      row += t;
      row_k1 += static_cast<double>(a - opt_.K) * t;
    }
    gx += row_k1 * ey[b];
    gy += k2 * row * ey[b];
  }
  const Complex i(0.0, 1.0);
  return {(i * gx).real(), (i * gy).real()};
}

ScalarField FourierField::sample(const GridPtr& grid) const {
  const Grid& g = *grid;
  ScalarField out(grid);
  std::vector<std::vector<Complex>> ex(g.nx());
  for (int i = 0; i < g.nx(); ++i) powers(g.node(i, 0).x, opt_.K, ex[i]);
  std::vector<Complex> ey, s(n_);
  for (int j = 0; j < g.ny(); ++j) {
    powers(g.node(0, j).y, opt_.K, ey);
    // s[a] = sum_b c[a, b] e^{i k2 y}
    for (int a = 0; a < n_; ++a) s[a] = 0.0;
    for (int b = 0; b < n_; ++b) {
      const Complex* c = &coef_[static_cast<std::size_t>(b) * n_];
      for (int a = 0; a < n_; ++a) s[a] += c[a] * ey[b];
    }
    for (int i = 0; i < g.nx(); ++i) {
      Complex acc{};
      for (int a = 0; a < n_; ++a) acc += s[a] * ex[i][a];
      out.at(i, j) = opt_.offset + acc.real();
    }
  }
  return out;
}

void FourierField::shift_to_floor(double c, const GridPtr& probe) {
  const ScalarField s = sample(probe);
  double m = s[0];
  for (double v : s.values()) m = std::min(m, v);
  opt_.offset += c - m;
}

}  // namespace maglab
