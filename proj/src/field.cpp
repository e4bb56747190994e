#include "maglab/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace maglab {

double Cell::diameter() const { return shape == Shape::square ? std::numbers::sqrt2 * size : 2.0 * size; }

double Cell::area() const { return shape == Shape::square ? size * size : std::numbers::pi * size * size; }

Box Cell::bounds() const {
  const double r = shape == Shape::square ? 0.5 * size : size;
  return {center.x - r, center.x + r, center.y - r, center.y + r};
}

bool Cell::contains(Point p) const {
  if (shape == Shape::square) {
    const double r = 0.5 * size;
    return std::abs(p.x - center.x) < r && std::abs(p.y - center.y) < r;
  }
  return norm(p - center) < size;
}

Domain Cell::as_domain(double h) const {
  if (!(size > 0.0)) throw Error("cell: size must be positive");
  return shape == Shape::square ? Domain::rectangle(bounds(), h) : Domain::disk(center, size, h);
}

namespace {

struct NodeRange {
  int i0, i1, j0, j1;  // inclusive
  bool empty() const { return i1 < i0 || j1 < j0; }
};

NodeRange nodes_in(const Grid& g, const Box& b) {
  const double eps = 1e-9;
  NodeRange r{static_cast<int>(std::ceil((b.x_min - g.x0()) / g.h() - eps)),
              static_cast<int>(std::floor((b.x_max - g.x0()) / g.h() + eps)),
              static_cast<int>(std::ceil((b.y_min - g.y0()) / g.h() - eps)),
              static_cast<int>(std::floor((b.y_max - g.y0()) / g.h() + eps))};
  r.i0 = std::max(r.i0, 0);
  r.j0 = std::max(r.j0, 0);
  r.i1 = std::min(r.i1, g.nx() - 1);
  r.j1 = std::min(r.j1, g.ny() - 1);
  return r;
}

Box widen(Box b, double m) { return {b.x_min - m, b.x_max + m, b.y_min - m, b.y_max + m}; }

/// Bilinear interpolation without bounds checks (caller guarantees p is in the extent).
double bilinear(const Grid& g, const std::vector<double>& v, double px, double py) {
  const double fx = (px - g.x0()) / g.h();
  const double fy = (py - g.y0()) / g.h();
  const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, g.nx() - 2);
  const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, g.ny() - 2);
  const double tx = fx - i;
  const double ty = fy - j;
  const std::size_t k = g.index(i, j);
  const std::size_t nx = static_cast<std::size_t>(g.nx());
  return (1 - ty) * ((1 - tx) * v[k] + tx * v[k + 1]) + ty * ((1 - tx) * v[k + nx] + tx * v[k + nx + 1]);
}

void require_in_extent(const Grid& g, Point p) {
  if (!g.extent().contains(p, 1e-9 * g.h()))
    throw Error("field support insufficient: the ray from the centre leaves the sampled box");
}

/// 2 int_0^1 f(s) s ds by composite Simpson, doubling the node count until converged.
double simpson_doubling(const std::function<double(double)>& f, const RayOptions& opt) {
  auto rule = [&](int n) {
    const double d = 1.0 / n;
    double acc = f(1.0) * 1.0;  // f(0)*0 vanishes
    for (int k = 1; k < n; ++k) {
      const double s = k * d;
      acc += (k % 2 ? 4.0 : 2.0) * f(s) * s;
    }
    return 2.0 * acc * d / 3.0;
  };
  int n = std::max(2, opt.simpson_nodes + opt.simpson_nodes % 2);
  double prev = rule(n);
  for (int k = 0; k < opt.max_doublings; ++k) {
    n *= 2;
    const double cur = rule(n);
    if (std::abs(cur - prev) <= opt.rel_tol * std::abs(cur) + 1e-300) return cur;
    prev = cur;
  }
  return prev;
}

/// 2 int_0^1 B(o + s d) s ds for the bilinear interpolant, exact up to rounding.
double ray_piecewise(const Grid& g, const std::vector<double>& v, Point o, Point x, std::vector<double>& cuts) {
  const double dx = x.x - o.x;
  const double dy = x.y - o.y;
  cuts.clear();
  cuts.push_back(0.0);
  auto crossings = [&](double from, double to, double origin) {
    const double f0 = (from - origin) / g.h();
    const double f1 = (to - origin) / g.h();
    if (f0 == f1) return;
    const double lo = std::min(f0, f1);
    const double hi = std::max(f0, f1);
    for (double m = std::floor(lo) + 1.0; m < hi; m += 1.0) {
      const double s = (m - f0) / (f1 - f0);
      if (s > 0.0 && s < 1.0) cuts.push_back(s);
    }
  };
  crossings(o.x, x.x, g.x0());
  crossings(o.y, x.y, g.y0());
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.push_back(1.0);
  auto f = [&](double s) { return s * bilinear(g, v, o.x + s * dx, o.y + s * dy); };
  double acc = 0.0;
  double fa = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k];
    const double b = cuts[k + 1];
    if (b <= a) continue;
    const double fb = f(b);
    acc += (b - a) / 6.0 * (fa + 4.0 * f(0.5 * (a + b)) + fb);
    fa = fb;
  }
  return 2.0 * acc;
}

double ray_integral(const Grid& g, const std::vector<double>& v, Point o, Point x, const RayOptions& opt,
                    std::vector<double>& cuts) {
  if (opt.rule == RayRule::piecewise_exact) return ray_piecewise(g, v, o, x, cuts);
  return simpson_doubling([&](double s) { return bilinear(g, v, o.x + s * (x.x - o.x), o.y + s * (x.y - o.y)); },
                          opt);
}

void fill_potential(const ScalarField& B, Point o, const NodeRange& r, const RayOptions& opt, VectorField& A) {
  const Grid& g = B.g();
  std::vector<double> cuts;
  for (int j = r.j0; j <= r.j1; ++j) {
    for (int i = r.i0; i <= r.i1; ++i) {
      const Point x = g.node(i, j);
      const double w = ray_integral(g, B.values(), o, x, opt, cuts);
      const Vec2 a0 = canonical_potential(x - o);
      A.set(g.index(i, j), {w * a0.x, w * a0.y});
    }
  }
}

}  // namespace

Quadrature cell_quadrature(const Grid& g, const Cell& cell) {
  const double h = g.h();
  const Domain d = cell.as_domain(h);
  const NodeRange r = nodes_in(g, widen(cell.bounds(), 0.5 * h));
  Quadrature q;
  for (int j = r.j0; j <= r.j1; ++j) {
    for (int i = r.i0; i <= r.i1; ++i) {
      const double w = h * h * square_fraction_in(d, g.node(i, j), h);
      if (w > 0.0) q.emplace_back(g.index(i, j), w);
    }
  }
  if (q.empty()) throw Error("cell does not meet the sampled grid");
  return q;
}

Vec2 canonical_potential(Point x) { return {-0.5 * x.y, 0.5 * x.x}; }

VectorField potential_from_field(const ScalarField& B, Point origin, const RayOptions& opt) {
  const Grid& g = B.g();
  require_in_extent(g, origin);
  VectorField A(B.grid());
  fill_potential(B, origin, {0, g.nx() - 1, 0, g.ny() - 1}, opt, A);
  return A;
}

VectorField potential_from_function(const std::function<double(Point)>& B, const GridPtr& grid, Point origin,
                                    const RayOptions& opt) {
  VectorField A(grid);
  const Grid& g = *grid;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point x = g.node(k);
    const double w = simpson_doubling(
        [&](double s) { return B({origin.x + s * (x.x - origin.x), origin.y + s * (x.y - origin.y)}); }, opt);
    const Vec2 a0 = canonical_potential(x - origin);
    A.set(k, {w * a0.x, w * a0.y});
  }
  return A;
}

VectorField recentered_potential(const ScalarField& B, const Cell& cell, const RayOptions& opt) {
  const Grid& g = B.g();
  require_in_extent(g, cell.center);
  VectorField A(B.grid());
  const NodeRange r = nodes_in(g, widen(cell.bounds(), g.h() * (1.0 + 1e-9)));
  if (r.empty()) throw Error("cell does not meet the sampled grid");
  fill_potential(B, cell.center, r, opt, A);
  return A;
}

VectorField averaged_potential(const GridPtr& grid, double b_av, const Cell& cell) {
  VectorField A(grid);
  for (std::size_t k = 0; k < grid->size(); ++k) {
    const Vec2 a = canonical_potential(grid->node(k) - cell.center);
    A.set(k, {b_av * a.x, b_av * a.y});
  }
  return A;
}

double cell_average(const ScalarField& B, const Cell& cell) {
  const Quadrature q = cell_quadrature(B.g(), cell);
  double num = 0.0;
  double den = 0.0;
  for (const auto& [k, w] : q) {
    num += w * B[k];
    den += w;
  }
  return num / den;
}

double h1_seminorm_sq_on(const ScalarField& f, const Cell& cell) {
  const VectorField grad = gradient(f);
  double acc = 0.0;
  for (const auto& [k, w] : cell_quadrature(f.g(), cell)) acc += w * (grad.x()[k] * grad.x()[k] + grad.y()[k] * grad.y()[k]);
  return acc;
}

GapResult averaging_gap(const ScalarField& B, const Cell& cell, const RayOptions& opt) {
  const Grid& g = B.g();
  const Quadrature q = cell_quadrature(g, cell);
  const VectorField a_new = recentered_potential(B, cell, opt);
  double num = 0.0;
  double den = 0.0;
  for (const auto& [k, w] : q) {
    num += w * B[k];
    den += w;
  }
  const double b_av = num / den;
  GapResult r;
  const double delta = cell.diameter();
  double var = 0.0;
  for (const auto& [k, w] : q) {
    const Vec2 a0 = canonical_potential(g.node(k) - cell.center);
    const double ex = a_new.x()[k] - b_av * a0.x;
    const double ey = a_new.y()[k] - b_av * a0.y;
    r.lhs += w * (ex * ex + ey * ey);
    var += w * (B[k] - b_av) * (B[k] - b_av);
  }
  r.rhs = 8.0 * std::pow(delta, 4) * h1_seminorm_sq_on(B, cell);
  r.sharper = delta * delta * var;
  return r;
}

GapResult rescaled_field_gap(const ScalarField& B, const Cell& cell, double s) {
  if (!(s > 0.0 && s < 1.0)) throw Error("rescaled_field_gap: s must lie in (0, 1)");
  const Grid& g = B.g();
  const Quadrature q = cell_quadrature(g, cell);
  double num = 0.0;
  double den = 0.0;
  for (const auto& [k, w] : q) {
    num += w * B[k];
    den += w;
  }
  const double b_av = num / den;
  GapResult r;
  for (const auto& [k, w] : q) {
    const Point x = g.node(k);
    const Point y = cell.center + s * (x - cell.center);
    const double d = B(y) - b_av;
    r.lhs += w * d * d;
  }
  r.lhs *= s * s;
  const double delta = cell.diameter();
  r.rhs = 8.0 * delta * delta * h1_seminorm_sq_on(B, cell);
  return r;
}

EssInf ess_inf(const ScalarField& B) {
  const Grid& g = B.g();
  EssInf r;
  r.node_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.weight(k) > 0.0) r.node_min = std::min(r.node_min, B[k]);
  if (!std::isfinite(r.node_min)) throw Error("ess_inf: empty mask");
  // Trapezoid averages over 4h x 4h blocks whose 25 nodes all carry domain weight.
  static constexpr double t[5] = {0.5, 1.0, 1.0, 1.0, 0.5};
  double best = std::numeric_limits<double>::infinity();
  for (int j = 2; j + 2 < g.ny(); ++j) {
    for (int i = 2; i + 2 < g.nx(); ++i) {
      double num = 0.0;
      bool ok = true;
      for (int b = -2; b <= 2 && ok; ++b) {
        for (int a = -2; a <= 2; ++a) {
          const std::size_t k = g.index(i + a, j + b);
          if (g.weight(k) <= 0.0) {
            ok = false;
            break;
          }
          num += t[a + 2] * t[b + 2] * B[k];
        }
      }
      if (ok) best = std::min(best, num / 16.0);
    }
  }
  r.value = std::isfinite(best) ? best : r.node_min;
  return r;
}

ScalarField gauge_function(const VectorField& A, const VectorField& A_ref, const Box& region, double curl_tol) {
  const Grid& g = A.g();
  const double h = g.h();
  const NodeRange r = nodes_in(g, region);
  if (r.i1 - r.i0 < 1 || r.j1 - r.j0 < 1) throw Error("gauge_function: region holds fewer than 2x2 nodes");
  const std::size_t nx = static_cast<std::size_t>(g.nx());
  auto dx = [&](std::size_t k) { return A_ref.x()[k] - A.x()[k]; };
  auto dy = [&](std::size_t k) { return A_ref.y()[k] - A.y()[k]; };

  double d_max = 0.0;
  for (int j = r.j0; j <= r.j1; ++j)
    for (int i = r.i0; i <= r.i1; ++i) {
      const std::size_t k = g.index(i, j);
      d_max = std::max(d_max, std::hypot(dx(k), dy(k)));
    }
  ScalarField phi(A.grid());
  if (d_max == 0.0) return phi;

  double curl_max = 0.0;
  for (int j = r.j0; j < r.j1; ++j)
    for (int i = r.i0; i < r.i1; ++i) {
      const std::size_t k = g.index(i, j);
      const double circ = 0.5 * h * (dx(k) + dx(k + 1)) + 0.5 * h * (dy(k + 1) + dy(k + 1 + nx)) -
                          0.5 * h * (dx(k + nx) + dx(k + nx + 1)) - 0.5 * h * (dy(k) + dy(k + nx));
      curl_max = std::max(curl_max, std::abs(circ) / (h * h));
    }
  const double diam = std::hypot((r.i1 - r.i0) * h, (r.j1 - r.j0) * h);
  if (curl_max > curl_tol * d_max / diam) throw Error("fields not gauge-equivalent");

  // L-shaped paths: along the centre row, then up/down each column.
  const int ic = (r.i0 + r.i1) / 2;
  const int jc = (r.j0 + r.j1) / 2;
  auto& v = phi.values();
  for (int i = ic + 1; i <= r.i1; ++i) {
    const std::size_t k = g.index(i, jc);
    v[k] = v[k - 1] + 0.5 * h * (dx(k - 1) + dx(k));
  }
  for (int i = ic - 1; i >= r.i0; --i) {
    const std::size_t k = g.index(i, jc);
    v[k] = v[k + 1] - 0.5 * h * (dx(k + 1) + dx(k));
  }
  for (int i = r.i0; i <= r.i1; ++i) {
    for (int j = jc + 1; j <= r.j1; ++j) {
      const std::size_t k = g.index(i, j);
      v[k] = v[k - nx] + 0.5 * h * (dy(k - nx) + dy(k));
    }
    for (int j = jc - 1; j >= r.j0; --j) {
      const std::size_t k = g.index(i, j);
      v[k] = v[k + nx] - 0.5 * h * (dy(k + nx) + dy(k));
    }
  }
  // One Jacobi sweep of the least-squares system.
  std::vector<double> next = v;
  for (int j = r.j0; j <= r.j1; ++j) {
    for (int i = r.i0; i <= r.i1; ++i) {
      const std::size_t k = g.index(i, j);
      double acc = 0.0;
      int n = 0;
      if (i > r.i0) acc += v[k - 1] + 0.5 * h * (dx(k - 1) + dx(k)), ++n;
      if (i < r.i1) acc += v[k + 1] - 0.5 * h * (dx(k + 1) + dx(k)), ++n;
      if (j > r.j0) acc += v[k - nx] + 0.5 * h * (dy(k - nx) + dy(k)), ++n;
      if (j < r.j1) acc += v[k + nx] - 0.5 * h * (dy(k + nx) + dy(k)), ++n;
      next[k] = acc / n;
    }
  }
  v = std::move(next);
  return phi;
}

std::vector<GrowthRow> slow_growth_check(const ScalarField& B, double zeta, const std::vector<double>& ells) {
  if (!(zeta > 0.0 && zeta <= 0.5)) throw Error("slow_growth_check: zeta must lie in (0, 1/2]");
  const Grid& g = B.g();
  const int cx = g.nx() - 1;
  const int cy = g.ny() - 1;
  // Summed-area table of exact cell integrals of the bilinear interpolant (in units of h^2).
  std::vector<double> sat(static_cast<std::size_t>(cx + 1) * (cy + 1), 0.0);
  auto at = [&](int i, int j) -> double& { return sat[static_cast<std::size_t>(j) * (cx + 1) + i]; };
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      const double c = 0.25 * (B.at(i, j) + B.at(i + 1, j) + B.at(i, j + 1) + B.at(i + 1, j + 1));
      at(i + 1, j + 1) = c + at(i, j + 1) + at(i + 1, j) - at(i, j);
    }
  std::vector<GrowthRow> rows;
  for (double ell : ells) {
    if (!(ell > 0.0)) throw Error("slow_growth_check: ell must be positive");
    const int m = std::max(1, static_cast<int>(std::lround(ell / g.h())));
    if (m > cx || m > cy) throw Error("slow_growth_check: ell exceeds the sampled box");
    double sup = 0.0;
    for (int j = 0; j + m <= cy; ++j)
      for (int i = 0; i + m <= cx; ++i) {
        const double s = at(i + m, j + m) - at(i, j + m) - at(i + m, j) + at(i, j);
        sup = std::max(sup, std::abs(s) / (static_cast<double>(m) * m));
      }
    rows.push_back({ell, sup, sup * std::pow(ell, 2.0 * zeta)});
  }
  return rows;
}

ScalarField sample(const GridPtr& grid, const std::function<double(Point)>& f) {
  ScalarField s(grid);
  for (std::size_t k = 0; k < grid->size(); ++k) s[k] = f(grid->node(k));
  return s;
}

VectorField sample_vector(const GridPtr& grid, const std::function<Vec2(Point)>& f) {
  VectorField v(grid);
  for (std::size_t k = 0; k < grid->size(); ++k) v.set(k, f(grid->node(k)));
  return v;
}

double integral(const ScalarField& f) {
  double acc = 0.0;
  for (std::size_t k = 0; k < f.g().size(); ++k) acc += f.g().weight(k) * f[k];
  return acc;
}

double norm_l2(const ScalarField& f) {
  double acc = 0.0;
  for (std::size_t k = 0; k < f.g().size(); ++k) acc += f.g().weight(k) * f[k] * f[k];
  return std::sqrt(acc);
}

double norm_l2(const VectorField& f) {
  double acc = 0.0;
  for (std::size_t k = 0; k < f.g().size(); ++k)
    acc += f.g().weight(k) * (f.x()[k] * f.x()[k] + f.y()[k] * f.y()[k]);
  return std::sqrt(acc);
}

double norm_l2(const ComplexField& f) {
  double acc = 0.0;
  for (std::size_t k = 0; k < f.g().size(); ++k) acc += f.g().weight(k) * std::norm(f[k]);
  return std::sqrt(acc);
}

VectorField gradient(const ScalarField& f) {
  const Grid& g = f.g();
  if (g.nx() < 3 || g.ny() < 3) throw Error("gradient: need at least 3 nodes per direction");
  const double h = g.h();
  VectorField d(f.grid());
  auto diff = [h](int i, int n, auto val) {
    if (i == 0) return (-3.0 * val(0) + 4.0 * val(1) - val(2)) / (2.0 * h);
    if (i == n - 1) return (3.0 * val(n - 1) - 4.0 * val(n - 2) + val(n - 3)) / (2.0 * h);
    return (val(i + 1) - val(i - 1)) / (2.0 * h);
  };
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double gx = diff(i, g.nx(), [&](int a) { return f.at(a, j); });
      const double gy = diff(j, g.ny(), [&](int b) { return f.at(i, b); });
      d.set(g.index(i, j), {gx, gy});
    }
  return d;
}

double norm_h1_seminorm(const ScalarField& f) { return norm_l2(gradient(f)); }

ScalarField curl_of(const VectorField& A) {
  const VectorField gx = gradient(ScalarField(A.grid(), A.x()));
  const VectorField gy = gradient(ScalarField(A.grid(), A.y()));
  ScalarField c(A.grid());
  for (std::size_t k = 0; k < c.values().size(); ++k) c[k] = gy.x()[k] - gx.y()[k];
  return c;
}

ScalarField div_of(const VectorField& A) {
  const VectorField gx = gradient(ScalarField(A.grid(), A.x()));
  const VectorField gy = gradient(ScalarField(A.grid(), A.y()));
  ScalarField c(A.grid());
  for (std::size_t k = 0; k < c.values().size(); ++k) c[k] = gx.x()[k] + gy.y()[k];
  return c;
}

}  // namespace maglab
