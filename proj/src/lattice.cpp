#include "maglab/lattice.hpp"

#include <cmath>
#include <iomanip>

namespace maglab {

namespace {

constexpr double kEps = 1e-12;

/// Distance from p to the closed square [c - r, c + r]^2.
double distance_to_square(Point p, Point c, double r) {
  const double dx = std::max(std::abs(p.x - c.x) - r, 0.0);
  const double dy = std::max(std::abs(p.y - c.y) - r, 0.0);
  return std::hypot(dx, dy);
}

bool inside_outer(const Shape& s, Point c, double r) {
  if (const auto* rect = std::get_if<Rect>(&s)) {
    const Box& b = rect->box;
    return c.x - r >= b.x_min - kEps && c.x + r <= b.x_max + kEps && c.y - r >= b.y_min - kEps &&
           c.y + r <= b.y_max + kEps;
  }
  // Open square inside the open disk iff its four corners lie in the closed disk.
  const Disk& d = std::get<Disk>(s);
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0})
      if (std::hypot(c.x + sx * r - d.center.x, c.y + sy * r - d.center.y) > d.radius + kEps) return false;
  return true;
}

bool misses_hole(const Shape& s, Point c, double r) {
  if (const auto* rect = std::get_if<Rect>(&s)) {
    const Box& b = rect->box;
    return c.x + r <= b.x_min + kEps || c.x - r >= b.x_max - kEps || c.y + r <= b.y_min + kEps ||
           c.y - r >= b.y_max - kEps;
  }
  const Disk& d = std::get<Disk>(s);
  return distance_to_square(d.center, c, r) >= d.radius - kEps;
}

}  // namespace

bool square_in_domain(const Domain& domain, Point center, double ell) {
  const double r = 0.5 * ell;
  if (!inside_outer(domain.outer(), center, r)) return false;
  for (const Shape& hole : domain.holes())
    if (!misses_hole(hole, center, r)) return false;
  return true;
}

CellLattice build_lattice(const Domain& domain, double ell) {
  if (!(ell > 0.0)) throw Error("build_lattice: ell must be positive");
  CellLattice lat;
  lat.ell = ell;
  lat.domain_area = domain.area();
  const Box b = shape_bounds(domain.outer());
  const long m0 = static_cast<long>(std::floor(b.x_min / ell)) - 1;
  const long m1 = static_cast<long>(std::ceil(b.x_max / ell)) + 1;
  const long n0 = static_cast<long>(std::floor(b.y_min / ell)) - 1;
  const long n1 = static_cast<long>(std::ceil(b.y_max / ell)) + 1;
  for (long n = n0; n <= n1; ++n)
    for (long m = m0; m <= m1; ++m) {
      const Point c{ell * static_cast<double>(m), ell * static_cast<double>(n)};
      if (square_in_domain(domain, c, ell)) lat.sites.push_back({m, n, c});
    }
  return lat;
}

double coverage_defect(const CellLattice& lattice) {
  return lattice.domain_area - static_cast<double>(lattice.count()) * lattice.ell * lattice.ell;
}

void write_lattice_csv(std::ostream& os, const CellLattice& lattice) {
  os << "m,n,cx,cy\n" << std::setprecision(17);
  for (const auto& s : lattice.sites) os << s.m << ',' << s.n << ',' << s.center.x << ',' << s.center.y << '\n';
}

}  // namespace maglab
