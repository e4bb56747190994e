#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace maglab {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver gave up; `best_value` is the best objective seen (NaN if not applicable).
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_value, int iterations)
      : Error(what), best_value(best_value), iterations(iterations) {}
  double best_value;
  int iterations;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
double norm(Point p);

/// Plane vector; same layout as Point but kept distinct for readability.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Box {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  Point center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
  bool contains(Point p, double slack = 0.0) const;
};

/// Open axis-aligned rectangle.
struct Rect {
  Box box;
};

/// Open disk.
struct Disk {
  Point center;
  double radius = 0.0;
};

using Shape = std::variant<Rect, Disk>;

bool shape_contains(const Shape& s, Point p);
double shape_area(const Shape& s);
Box shape_bounds(const Shape& s);
/// Negative inside, positive outside, exact Euclidean distance to the boundary.
double shape_signed_distance(const Shape& s, Point p);

/// A planar region Omega = outer \ (closure of holes), sampled on a node grid of spacing h
/// covering `bounding_box`.
class Domain {
 public:
  enum class Kind { square, disk, annular };

  static Domain rectangle(Box box, double h, double margin = 0.0);
  static Domain disk(Point center, double radius, double h, double margin = 0.0);
  /// Outer boundary with holes. Holes must be pairwise disjoint and inside the outer region.
  static Domain with_holes(Shape outer, std::vector<Shape> holes, double h, double margin = 0.0);
  /// Same geometry on an explicit bounding box (which must contain the closure of the region).
  Domain on_box(Box box) const;
  Domain with_resolution(double h) const;

  Kind kind() const;
  const Shape& outer() const { return outer_; }
  const std::vector<Shape>& holes() const { return holes_; }
  const Box& bounding_box() const { return box_; }
  double h() const { return h_; }

  bool contains(Point p) const;
  /// Distance-like function: negative inside Omega, positive outside.
  double signed_distance(Point p) const;
  double area() const;
  /// Distance from p to the boundary of Omega (for p inside).
  double boundary_distance(Point p) const { return -signed_distance(p); }
  bool is_rectangle() const { return holes_.empty() && std::holds_alternative<Rect>(outer_); }
  /// The simply connected outer region (Omega tilde) with the holes filled in.
  Domain filled() const;

 private:
  Domain(Shape outer, std::vector<Shape> holes, Box box, double h);

  Shape outer_;
  std::vector<Shape> holes_;
  Box box_;
  double h_ = 0.0;
};

/// Node grid attached to a Domain. Node (i, j) sits at (x_min + i h, y_min + j h).
/// Immutable; shared between all fields sampled on it.
class Grid {
 public:
  explicit Grid(Domain domain);

  const Domain& domain() const { return domain_; }
  double h() const { return h_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
  }
  Point node(int i, int j) const { return {x0_ + i * h_, y0_ + j * h_}; }
  Point node(std::size_t k) const { return node(static_cast<int>(k % nx_), static_cast<int>(k / nx_)); }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  Box extent() const { return {x0_, x0_ + (nx_ - 1) * h_, y0_, y0_ + (ny_ - 1) * h_}; }

  /// Node lies in the open set Omega.
  bool inside(std::size_t k) const { return mask_[k] != 0; }
  const std::vector<char>& mask() const { return mask_; }
  /// Area of the node's dual cell [x-h/2, x+h/2]^2 that lies in Omega.
  double weight(std::size_t k) const { return weight_[k]; }
  const std::vector<double>& weights() const { return weight_; }
  std::size_t inside_count() const { return inside_count_; }

 private:
  Domain domain_;
  double h_;
  double x0_;
  double y0_;
  int nx_;
  int ny_;
  std::vector<char> mask_;
  std::vector<double> weight_;
  std::size_t inside_count_ = 0;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(const Domain& domain);

/// Area fraction of the axis-aligned square of side `side` centred at `c` that lies inside
/// the domain. Exact for rectangles, sub-sampled (16 x 16) otherwise.
double square_fraction_in(const Domain& domain, Point c, double side);
/// Same for a wx-by-wy rectangle.
double rect_fraction_in(const Domain& domain, Point c, double wx, double wy);

/// Real function sampled at every grid node.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(GridPtr grid, double fill = 0.0);
  ScalarField(GridPtr grid, std::vector<double> values);

  const GridPtr& grid() const { return grid_; }
  const Grid& g() const { return *grid_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& at(int i, int j) { return values_[grid_->index(i, j)]; }
  double at(int i, int j) const { return values_[grid_->index(i, j)]; }

  /// Bilinear interpolation; throws when p is outside the sampled box.
  double operator()(Point p) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// Two-component real field sampled at every grid node.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(GridPtr grid);

  const GridPtr& grid() const { return grid_; }
  const Grid& g() const { return *grid_; }
  std::vector<double>& x() { return x_; }
  std::vector<double>& y() { return y_; }
  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }
  Vec2 operator[](std::size_t k) const { return {x_[k], y_[k]}; }
  void set(std::size_t k, Vec2 v) {
    x_[k] = v.x;
    y_[k] = v.y;
  }

 private:
  GridPtr grid_;
  std::vector<double> x_;
  std::vector<double> y_;
};

using Complex = std::complex<double>;

/// Complex grid function (order parameters, trial states, eigenvectors).
class ComplexField {
 public:
  ComplexField() = default;
  explicit ComplexField(GridPtr grid, Complex fill = {});

  const GridPtr& grid() const { return grid_; }
  const Grid& g() const { return *grid_; }
  std::vector<Complex>& values() { return values_; }
  const std::vector<Complex>& values() const { return values_; }
  Complex& operator[](std::size_t k) { return values_[k]; }
  Complex operator[](std::size_t k) const { return values_[k]; }

  Complex operator()(Point p) const;

 private:
  GridPtr grid_;
  std::vector<Complex> values_;
};

double max_abs(const ComplexField& f);

}  // namespace maglab
