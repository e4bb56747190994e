#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "maglab/grid.hpp"

namespace maglab {

/// Open square (size = side) or open disk (size = radius).
struct Cell {
  enum class Shape { square, disk };
  Point center;
  double size = 0.0;
  Shape shape = Shape::square;

  static Cell square(Point c, double side) { return {c, side, Shape::square}; }
  static Cell disk(Point c, double radius) { return {c, radius, Shape::disk}; }
  double diameter() const;
  double area() const;
  Box bounds() const;
  bool contains(Point p) const;
  /// The cell as a Domain on its own bounding box (used for overlap fractions).
  Domain as_domain(double h) const;
};

/// (node, weight) pairs: weight = area of the node's dual cell inside the cell.
using Quadrature = std::vector<std::pair<std::size_t, double>>;
Quadrature cell_quadrature(const Grid& g, const Cell& cell);

/// A0(x) = (-x2, x1)/2.
Vec2 canonical_potential(Point x);

enum class RayRule {
  /// Split the ray at grid-line crossings and apply Simpson per piece (exact for the bilinear interpolant).
  piecewise_exact,
  /// Composite Simpson on [0,1], doubled from `simpson_nodes` until the relative change is below `rel_tol`.
  simpson_doubling,
};

struct RayOptions {
  RayRule rule = RayRule::piecewise_exact;
  int simpson_nodes = 64;
  double rel_tol = 1e-8;
  int max_doublings = 10;
};

/// Ray-integral potential about `origin`: A(x) = A0(x - o) * 2 int_0^1 B(o + s (x - o)) s ds, at every grid node.
VectorField potential_from_field(const ScalarField& B, Point origin = {}, const RayOptions& opt = {});
/// Same construction for an analytic field (always Simpson doubling).
VectorField potential_from_function(const std::function<double(Point)>& B, const GridPtr& grid, Point origin = {},
                                    const RayOptions& opt = {});
/// The potential recentred at the cell centre, computed at the nodes of the cell's bounding box
/// widened by one node (zero elsewhere).
VectorField recentered_potential(const ScalarField& B, const Cell& cell, const RayOptions& opt = {});
/// Averaged potential: b_av A0(x - x0) at every node.
VectorField averaged_potential(const GridPtr& grid, double b_av, const Cell& cell);

double cell_average(const ScalarField& B, const Cell& cell);

struct GapResult {
  double lhs = 0.0;
  double rhs = 0.0;
  /// delta^2 int_U |B - B_av|^2, the sharper bound of the averaging remark.
  double sharper = 0.0;
};

/// Averaging inequality: lhs = int_U |A_new - A_av|^2, rhs = 8 delta^4 |grad B|^2_{L2(U)}.
GapResult averaging_gap(const ScalarField& B, const Cell& cell, const RayOptions& opt = {});
/// lhs = s^2 int_U |B(s(x - x0) + x0) - B_av|^2, rhs = 8 delta^2 |grad B|^2_{L2(U)}.
GapResult rescaled_field_gap(const ScalarField& B, const Cell& cell, double s);

struct EssInf {
  double value = 0.0;     ///< min over averages on 4h sub-squares
  double node_min = 0.0;  ///< raw diagnostic
};
EssInf ess_inf(const ScalarField& B);

/// phi with grad phi ~ A_ref - A on the nodes of `region` (zero elsewhere). Throws if the discrete curl of
/// A_ref - A exceeds `curl_tol` relative to |A_ref - A| / diam(region).
ScalarField gauge_function(const VectorField& A, const VectorField& A_ref, const Box& region, double curl_tol = 1e-2);

struct GrowthRow {
  double ell = 0.0;
  double sup_average = 0.0;
  double scaled = 0.0;  ///< sup_average * ell^(2 zeta)
};
std::vector<GrowthRow> slow_growth_check(const ScalarField& B, double zeta, const std::vector<double>& ells);

ScalarField sample(const GridPtr& grid, const std::function<double(Point)>& f);
VectorField sample_vector(const GridPtr& grid, const std::function<Vec2(Point)>& f);

/// Integrals use the grid's domain weights.
double integral(const ScalarField& f);
double norm_l2(const ScalarField& f);
double norm_l2(const VectorField& f);
double norm_l2(const ComplexField& f);
/// Second-order differences (one-sided at the box edge).
VectorField gradient(const ScalarField& f);
double norm_h1_seminorm(const ScalarField& f);
/// |grad f|_{L2(U)}^2 with cell quadrature.
double h1_seminorm_sq_on(const ScalarField& f, const Cell& cell);
ScalarField curl_of(const VectorField& A);
ScalarField div_of(const VectorField& A);

}  // namespace maglab
