#pragma once

#include <string>
#include <vector>

#include "maglab/grid.hpp"

namespace maglab {

enum class Boundary { dirichlet, natural };
std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

/// G_{b,Q_R}(u) = int_{Q_R} b |(grad - i A0) u|^2 - |u|^2 + |u|^4 / 2 on Q_R = (-R/2, R/2)^2.
struct ReducedGLProblem {
  double b = 0.0;
  double R = 1.0;
  Boundary boundary = Boundary::natural;
  double h = 1.0 / 16;
  /// The kinetic term is divided by this number. 1 gives the plain lattice energy; bulk_problem() sets the
  /// discrete lowest Landau level so that the lattice threshold sits exactly at b = 1.
  double landau_level = 1.0;
};

/// Grid spacing used by the bulk table: min(1/16, R/256) unless `fixed_h` > 0.
double bulk_h(double R, double fixed_h = 0.0);
/// Lowest Dirichlet eigenvalue of the unit-field lattice operator on Q_{R_star} with spacing h (cached).
double lattice_landau_level(double h, double R_star = 16.0);
/// Problem with bulk_h spacing and the calibrated kinetic normalization.
ReducedGLProblem bulk_problem(double b, double R, Boundary bc, double fixed_h = 0.0, double R_star = 16.0);

/// Square vortex lattice in the lowest Landau level at unit field (one flux quantum per cell of area 2 pi), in the
/// symmetric gauge. `extent` bounds the number of summed rows.
Complex square_vortex_lattice(Point y, double extent);

GridPtr reduced_grid(const ReducedGLProblem& p);
/// Discrete covariant energy; Dirichlet problems ignore u on the boundary nodes (treated as zero).
double reduced_energy(const ComplexField& u, const ReducedGLProblem& p);

struct ReducedMinimum {
  double energy = 0.0;
  ComplexField minimizer;
  double grad_norm = 0.0;  ///< L2 norm of the functional derivative over sqrt(area)
  int iterations = 0;
  bool converged = false;
  std::string seed;
  double max_modulus = 0.0;
};

/// Preconditioned Barzilai-Borwein minimization from the seeds constant, blob and vortex lattice, plus the
/// admissible state u = 0; keeps the lowest energy. Throws ConvergenceError when the winning run did not reach tol.
ReducedMinimum minimize_reduced(const ReducedGLProblem& p, double tol = 1e-6, int max_iter = 20000);

struct BulkRecord {
  double b = 0.0;
  double R = 0.0;
  Boundary boundary = Boundary::natural;
  double energy = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double max_modulus = 0.0;
};

struct GEstimate {
  double b = 0.0;
  double g_est = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double C_emp = 0.0;
};

struct BulkOptions {
  std::vector<double> R_list{4, 6, 8, 12, 16};
  double tol = 1e-6;
  int max_iter = 20000;
  double fixed_h = 1.0 / 16;  ///< 0 selects min(1/16, R/256)
  double max_width = 0.25;  ///< largest allowed bracket width at R_max
  int jobs = 1;
};

/// g_est = m0(b, R_max)/R_max^2, the Dirichlet value. C_emp = max_R R (m0/R^2 - m/R^2) over the list; bracket [m0/R^2 - C_emp/R, m0/R^2] at R_max.
/// Throws "increase R_max" when C_emp / R_max > max_width.
GEstimate summarize_g(double b, const std::vector<BulkRecord>& records, double max_width = 0.25);
/// Runs both boundary types at every R of the list.
GEstimate estimate_g(double b, const BulkOptions& opt, std::vector<BulkRecord>* records = nullptr);

struct BulkTable {
  std::vector<BulkRecord> records;
  std::vector<GEstimate> summary;
};
/// Independent (b, R, boundary) jobs on `opt.jobs` workers.
BulkTable build_bulk_table(const std::vector<double>& b_list, const BulkOptions& opt);

/// Piecewise-linear g with the anchors g(0) = -1/2 and g(b) = 0 for b >= 1; clamps outside [0, 1].
class GInterpolant {
 public:
  GInterpolant(std::vector<double> b, std::vector<double> g);
  static GInterpolant from(const std::vector<GEstimate>& summary);
  double operator()(double b) const;
  const std::vector<double>& nodes() const { return b_; }
  const std::vector<double>& values() const { return g_; }

 private:
  std::vector<double> b_, g_;
};

}  // namespace maglab
