#pragma once

#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "maglab/field.hpp"

namespace maglab {

/// Trapezoid edge integrals of A. x[k]: edge from node k to k+1 (valid for i < nx-1);
/// y[k]: edge from node k to k+nx (valid for j < ny-1).
struct EdgeIntegrals {
  std::vector<double> x;
  std::vector<double> y;
};
EdgeIntegrals edge_integrals(const VectorField& A);

using SparseMatrixC = Eigen::SparseMatrix<Complex>;

/// Dirichlet magnetic Laplacian -(grad - i sigma A)^2 with Peierls links U = exp(-i sigma theta).
/// Unknowns are the nodes inside Omega. An edge leaving Omega at fraction t of its length contributes
/// the diagonal term 1/(t h^2) (symmetric ghost-point closure of the zero boundary value).
class MagneticOperator {
 public:
  MagneticOperator(GridPtr grid, double sigma, VectorField A);

  const GridPtr& grid() const { return grid_; }
  const Grid& g() const { return *grid_; }
  double sigma() const { return sigma_; }
  const VectorField& potential() const { return A_; }
  Complex link_x(std::size_t k) const { return link_x_[k]; }
  Complex link_y(std::size_t k) const { return link_y_[k]; }
  const SparseMatrixC& matrix() const { return L_; }
  std::size_t unknowns() const { return nodes_.size(); }
  /// Largest sigma * |circulation| over plaquettes touching Omega.
  double max_plaquette_flux() const { return max_flux_; }

  Eigen::VectorXcd restrict_to_unknowns(const ComplexField& u) const;
  ComplexField extend(const Eigen::VectorXcd& v) const;
  /// Dirichlet form h^2 u* L u of the restriction of u.
  double form(const ComplexField& u) const;
  /// h^2 sum over Omega nodes of |u|^2.
  double mass(const ComplexField& u) const;
  double rayleigh(const ComplexField& u) const { return form(u) / mass(u); }

 private:
  GridPtr grid_;
  double sigma_;
  VectorField A_;
  std::vector<Complex> link_x_, link_y_;
  std::vector<std::size_t> nodes_;
  std::vector<long> unknown_;  // node -> unknown or -1
  SparseMatrixC L_;
  double max_flux_ = 0.0;
};

/// Throws "magnetic flux per plaquette too large" when sigma * flux > 1 on some plaquette.
MagneticOperator assemble(const GridPtr& grid, double sigma, const VectorField& A);

struct SpectralResult {
  double lambda = 0.0;
  ComplexField eigenvector;
  double residual = 0.0;  ///< |(L - lambda) v| / (|lambda| |v|)
  int iterations = 0;
};

enum class InnerSolver { ldlt, cg };

struct EigenOptions {
  InnerSolver inner = InnerSolver::ldlt;
  int block = 40;  ///< inverse iterates per Rayleigh-Ritz step
  int keep = 4;    ///< Ritz vectors retained on restart
  /// Start vector; when empty, ones tapered to zero at the boundary.
  std::optional<ComplexField> start;
};

/// Inverse power iteration (shift 0) from a deterministic start vector, with a Rayleigh-Ritz step over each block
/// of iterates. `max_iter` counts inner solves.
SpectralResult lowest_eigenvalue(const MagneticOperator& op, double tol = 1e-8, int max_iter = 2000,
                                 const EigenOptions& opt = {});

/// int_U |(grad - i sigma A) u|^2 by edge sums; each edge weighted by the area of its h x h dual
/// rectangle inside `region` (or inside the grid box when no region is given).
double quadratic_form(const ComplexField& u, double sigma, const VectorField& A,
                      const std::optional<Cell>& region = std::nullopt);

enum class GaussianWidth {
  /// exp(-b sigma |x|^2 / 4), the lowest Landau level of the field b.
  landau,
  /// exp(-sqrt(b) sigma |x|^2 / 2) with prefactor pi^-1/2 b^1/4 sigma^1/2, as printed in the source.
  printed,
};

/// Smooth radial cutoff: 1 on [0, 1/2], 0 on [1, inf), C-infinity in between.
double radial_cutoff(double t);

/// Gaussian trial state centred at `center`, cut off on the disk of radius sigma^-rho, zero elsewhere.
ComplexField gaussian_trial(const GridPtr& grid, double sigma, double b_av, Point center, double rho,
                            GaussianWidth width = GaussianWidth::landau);

struct Sandwich {
  double lower = 0.0;
  double middle = 0.0;
  double upper = 0.0;
  double q_av = 0.0;      ///< q_sigma(v, A_av; U)
  double gap_term = 0.0;  ///< C' sigma^(2 - 4 rho + eta) |grad B|^2 |u|_inf^2
};

/// Two-sided bound of the quadratic-form approximation: v = e^{i sigma phi} u with grad phi = A_new - A.
Sandwich sandwich_check(const ComplexField& u, double sigma, const Cell& cell, const ScalarField& B,
                        const VectorField& A, double rho, double eta);

struct UpperBound {
  double quotient = 0.0;  ///< Rayleigh quotient of the gauge-transferred trial under the operator
  double ratio = 0.0;     ///< quotient / sigma
  Point center;
  double b_av = 0.0;
  double radius = 0.0;
  double prop_bound = 0.0;  ///< (1 + sigma^-eta) q(v, A_av)/|v|^2 + gap term / |v|^2
  ComplexField trial;
};

/// Upper half of the eigenvalue asymptotics: scan disk averages of radius sigma^-rho, pick a centre whose
/// average is within eps of the smallest one (farthest from the boundary among those), and evaluate the
/// gauge-transferred Gaussian under `op`.
UpperBound thm12_upper(const MagneticOperator& op, const ScalarField& B, double eps = 0.0, double rho = 0.375,
                       double eta = 0.125);

struct Diamagnetic {
  double form = 0.0;
  double bound = 0.0;
};
/// form = q_sigma(u, A), bound = sigma int B |u|^2 (u must vanish near the boundary).
Diamagnetic diamagnetic_lower(const ComplexField& u, double sigma, const ScalarField& B, const VectorField& A);

/// Min over connected components; each entry is an operator on one component.
double lowest_over_components(const std::vector<MagneticOperator>& parts, double tol = 1e-8);

}  // namespace maglab
