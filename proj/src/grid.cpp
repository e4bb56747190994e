#include "maglab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace maglab {

double norm(Point p) { return std::hypot(p.x, p.y); }

bool Box::contains(Point p, double slack) const {
  return p.x >= x_min - slack && p.x <= x_max + slack && p.y >= y_min - slack && p.y <= y_max + slack;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool box_inside(const Box& inner, const Box& outer) {
  return inner.x_min >= outer.x_min && inner.x_max <= outer.x_max && inner.y_min >= outer.y_min &&
         inner.y_max <= outer.y_max;
}

Box pad(Box b, double m) { return {b.x_min - m, b.x_max + m, b.y_min - m, b.y_max + m}; }

double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

bool shape_contains(const Shape& s, Point p) {
  return std::visit(overloaded{[&](const Rect& r) {
                                 return p.x > r.box.x_min && p.x < r.box.x_max && p.y > r.box.y_min &&
                                        p.y < r.box.y_max;
                               },
                               [&](const Disk& d) {
                                 const double dx = p.x - d.center.x;
                                 const double dy = p.y - d.center.y;
                                 return dx * dx + dy * dy < d.radius * d.radius;
                               }},
                    s);
}

double shape_area(const Shape& s) {
  return std::visit(overloaded{[](const Rect& r) { return r.box.width() * r.box.height(); },
                               [](const Disk& d) { return std::numbers::pi * d.radius * d.radius; }},
                    s);
}

Box shape_bounds(const Shape& s) {
  return std::visit(overloaded{[](const Rect& r) { return r.box; },
                               [](const Disk& d) {
                                 return Box{d.center.x - d.radius, d.center.x + d.radius, d.center.y - d.radius,
                                            d.center.y + d.radius};
                               }},
                    s);
}

double shape_signed_distance(const Shape& s, Point p) {
  return std::visit(overloaded{[&](const Rect& r) {
                                 const Point c = r.box.center();
                                 const double qx = std::abs(p.x - c.x) - 0.5 * r.box.width();
                                 const double qy = std::abs(p.y - c.y) - 0.5 * r.box.height();
                                 const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
                                 return outside + std::min(std::max(qx, qy), 0.0);
                               },
                               [&](const Disk& d) { return norm(p - d.center) - d.radius; }},
                    s);
}

Domain::Domain(Shape outer, std::vector<Shape> holes, Box box, double h)
    : outer_(std::move(outer)), holes_(std::move(holes)), box_(box), h_(h) {
  if (!(h_ > 0.0)) throw Error("domain: grid spacing must be positive");
  if (!box_inside(shape_bounds(outer_), box_)) throw Error("domain: bounding box must contain the domain closure");
  for (std::size_t a = 0; a < holes_.size(); ++a) {
    const Box hb = shape_bounds(holes_[a]);
    // Hole closure strictly inside the outer region: check the hole's extreme points.
    const Point probes[] = {{hb.x_min, hb.center().y}, {hb.x_max, hb.center().y}, {hb.center().x, hb.y_min},
                            {hb.center().x, hb.y_max}, {hb.x_min, hb.y_min},          {hb.x_max, hb.y_max},
                            {hb.x_min, hb.y_max},      {hb.x_max, hb.y_min}};
    const bool rect = std::holds_alternative<Rect>(holes_[a]);
    for (const Point& q : probes) {
      const bool on_hole = rect || shape_signed_distance(holes_[a], q) <= 1e-12;
      if (on_hole && !shape_contains(outer_, q)) throw Error("domain: hole closure must lie inside the outer region");
    }
    for (std::size_t b = a + 1; b < holes_.size(); ++b) {
      // Conservative disjointness: separated bounding boxes, or two disks apart.
      const Box ob = shape_bounds(holes_[b]);
      const bool apart_boxes = hb.x_max < ob.x_min || ob.x_max < hb.x_min || hb.y_max < ob.y_min || ob.y_max < hb.y_min;
      bool apart = apart_boxes;
      if (!apart && std::holds_alternative<Disk>(holes_[a]) && std::holds_alternative<Disk>(holes_[b])) {
        const auto& da = std::get<Disk>(holes_[a]);
        const auto& db = std::get<Disk>(holes_[b]);
        apart = norm(da.center - db.center) > da.radius + db.radius;
      }
      if (!apart) throw Error("domain: hole closures must be pairwise disjoint");
    }
  }
}

Domain Domain::rectangle(Box box, double h, double margin) {
  if (!(box.x_max > box.x_min && box.y_max > box.y_min)) throw Error("domain: empty rectangle");
  return Domain(Rect{box}, {}, pad(box, margin), h);
}

Domain Domain::disk(Point center, double radius, double h, double margin) {
  if (!(radius > 0.0)) throw Error("domain: disk radius must be positive");
  Disk d{center, radius};
  return Domain(d, {}, pad(shape_bounds(d), margin), h);
}

Domain Domain::with_holes(Shape outer, std::vector<Shape> holes, double h, double margin) {
  const Box b = pad(shape_bounds(outer), margin);
  return Domain(std::move(outer), std::move(holes), b, h);
}

Domain Domain::on_box(Box box) const { return Domain(outer_, holes_, box, h_); }

Domain Domain::with_resolution(double h) const { return Domain(outer_, holes_, box_, h); }

Domain::Kind Domain::kind() const {
  if (!holes_.empty()) return Kind::annular;
  return std::holds_alternative<Rect>(outer_) ? Kind::square : Kind::disk;
}

bool Domain::contains(Point p) const {
  if (!shape_contains(outer_, p)) return false;
  for (const Shape& hole : holes_) {
    if (shape_signed_distance(hole, p) <= 0.0) return false;
  }
  return true;
}

double Domain::signed_distance(Point p) const {
  double d = shape_signed_distance(outer_, p);
  for (const Shape& hole : holes_) d = std::max(d, -shape_signed_distance(hole, p));
  return d;
}

double Domain::area() const {
  double a = shape_area(outer_);
  for (const Shape& hole : holes_) a -= shape_area(hole);
  return a;
}

Domain Domain::filled() const { return Domain(outer_, {}, box_, h_); }

double rect_fraction_in(const Domain& domain, Point c, double wx, double wy) {
  const double hx = 0.5 * wx;
  const double hy = 0.5 * wy;
  const double reach = std::hypot(hx, hy);
  const double d = domain.signed_distance(c);
  if (d <= -reach) return 1.0;
  if (d >= reach) return 0.0;
  if (domain.is_rectangle()) {
    const Box& b = std::get<Rect>(domain.outer()).box;
    return interval_overlap(c.x - hx, c.x + hx, b.x_min, b.x_max) *
           interval_overlap(c.y - hy, c.y + hy, b.y_min, b.y_max) / (wx * wy);
  }
  constexpr int n = 16;
  int hits = 0;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const Point q{c.x - hx + (a + 0.5) * wx / n, c.y - hy + (b + 0.5) * wy / n};
      hits += domain.contains(q) ? 1 : 0;
    }
  }
  return static_cast<double>(hits) / (n * n);
}

double square_fraction_in(const Domain& domain, Point c, double side) { return rect_fraction_in(domain, c, side, side); }

Grid::Grid(Domain domain) : domain_(std::move(domain)), h_(domain_.h()) {
  const Box& b = domain_.bounding_box();
  x0_ = b.x_min;
  y0_ = b.y_min;
  nx_ = static_cast<int>(std::ceil(b.width() / h_ - 1e-9)) + 1;
  ny_ = static_cast<int>(std::ceil(b.height() / h_ - 1e-9)) + 1;
  if (nx_ < 2 || ny_ < 2) throw Error("grid: resolution too coarse for the bounding box");
  mask_.assign(size(), 0);
  weight_.assign(size(), 0.0);
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const std::size_t k = index(i, j);
      const Point p = node(i, j);
      mask_[k] = domain_.contains(p) ? 1 : 0;
      inside_count_ += mask_[k] ? 1u : 0u;
      weight_[k] = h_ * h_ * square_fraction_in(domain_, p, h_);
    }
  }
}

GridPtr make_grid(const Domain& domain) { return std::make_shared<const Grid>(domain); }

ScalarField::ScalarField(GridPtr grid, double fill) : grid_(std::move(grid)), values_(grid_->size(), fill) {}

ScalarField::ScalarField(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->size()) throw Error("scalar field: value count does not match grid");
}

namespace {

struct Bilinear {
  std::size_t k00, k10, k01, k11;
  double tx, ty;
};

Bilinear locate(const Grid& g, Point p) {
  const double eps = 1e-9 * g.h();
  const Box e = g.extent();
  if (!e.contains(p, eps)) throw Error("field support insufficient: point outside the sampled box");
  double fx = (p.x - g.x0()) / g.h();
  double fy = (p.y - g.y0()) / g.h();
  int i = std::clamp(static_cast<int>(std::floor(fx)), 0, g.nx() - 2);
  int j = std::clamp(static_cast<int>(std::floor(fy)), 0, g.ny() - 2);
  const double tx = std::clamp(fx - i, 0.0, 1.0);
  const double ty = std::clamp(fy - j, 0.0, 1.0);
  return {g.index(i, j), g.index(i + 1, j), g.index(i, j + 1), g.index(i + 1, j + 1), tx, ty};
}

}  // namespace

double ScalarField::operator()(Point p) const {
  const Bilinear b = locate(*grid_, p);
  const auto& v = values_;
  return (1 - b.ty) * ((1 - b.tx) * v[b.k00] + b.tx * v[b.k10]) + b.ty * ((1 - b.tx) * v[b.k01] + b.tx * v[b.k11]);
}

VectorField::VectorField(GridPtr grid) : grid_(std::move(grid)), x_(grid_->size(), 0.0), y_(grid_->size(), 0.0) {}

ComplexField::ComplexField(GridPtr grid, Complex fill) : grid_(std::move(grid)), values_(grid_->size(), fill) {}

Complex ComplexField::operator()(Point p) const {
  const Bilinear b = locate(*grid_, p);
  const auto& v = values_;
  return (1 - b.ty) * ((1 - b.tx) * v[b.k00] + b.tx * v[b.k10]) + b.ty * ((1 - b.tx) * v[b.k01] + b.tx * v[b.k11]);
}

double max_abs(const ComplexField& f) {
  double m = 0.0;
  for (const Complex& z : f.values()) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace maglab
