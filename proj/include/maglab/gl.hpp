#pragma once

#include <optional>
#include <string>
#include <vector>

#include "maglab/bulk.hpp"
#include "maglab/field.hpp"
#include "maglab/lattice.hpp"
#include "maglab/spectral.hpp"

namespace maglab {

/// Reference potential F = (d2 phi, -d1 phi) with -Lap phi = B in the filled domain and phi = 0 on its boundary.
/// Shortley-Weller stencil near curved boundaries, BiCGSTAB solve. F is set at every node whose dual cell meets
/// the filled domain (quadratic extrapolation of phi outside) and is zero elsewhere.
VectorField build_reference_potential(const ScalarField& B, double tol = 1e-12, int max_iter = 10000);
/// The stream function phi of the construction above (zero outside the filled domain).
ScalarField reference_stream_function(const ScalarField& B, double tol = 1e-12, int max_iter = 10000);

/// Order parameter on the nodes of Omega's grid and the potential as edge integrals (same layout as EdgeIntegrals).
struct GLState {
  double kappa = 1.0;
  double H = 1.0;
  ComplexField psi;
  EdgeIntegrals A;
};

/// psi = 0, A = F.
GLState normal_state(const VectorField& F, double kappa, double H);
/// (psi e^{i kappa H chi}, A + grad chi); leaves gl_energy unchanged.
GLState gauge_transform(const GLState& s, const ScalarField& chi);
/// Node values of A (edge averages), for export.
VectorField potential_at_nodes(const GLState& s);

/// G(psi, A) = sum_e c_e |U_e psi_b - psi_a|^2 + kappa^2 sum_k w_k (-|psi|^2 + |psi|^4 / 2)
///             + (kappa H)^2 sum_{plaquettes in the filled domain} h^2 curl(A - F)^2,
/// U_e = exp(-i kappa H int_e A), c_e the fraction of the edge's h x h control square inside Omega.
double gl_energy(const GLState& s, const VectorField& F);
/// The first two sums only.
double gl_energy_no_field(const GLState& s, const VectorField& F);

/// Relative L2 residuals of the discrete Euler-Lagrange system:
/// psi: -(grad - i kappa H A)^2 psi - kappa^2 (1 - |psi|^2) psi over interior nodes, divided by kappa^2 |Omega|^(1/2);
/// A: divergence-free part of curl curl (A - F) - j / (kappa H), times H / |Omega|^(1/2);
/// bc: the psi residual on nodes whose control cell meets the boundary (the natural condition), same scale.
/// The curl condition on the outer boundary is natural in the stream function and sits inside `A`.
struct ELResiduals {
  double psi = 0.0;
  double A = 0.0;
  double bc = 0.0;
  double max() const;
};
ELResiduals euler_lagrange_residual(const GLState& s, const VectorField& F);

struct GLOptions {
  double tol = 1e-7;  ///< stop when every Euler-Lagrange residual is below tol
  int max_iter = 20000;
  /// Start states tried in order; the lowest converged energy wins. "vortex": square Abrikosov lattice at the
  /// mean field; "constant": psi = 1; "given": the `start` argument of minimize_gl.
  std::vector<std::string> seeds{"vortex", "constant"};
};

struct GLDiagnostics {
  double psi_linf = 0.0;
  double kinetic_norm = 0.0;   ///< |(grad - i kappa H A) psi|_{L2(Omega)}
  double kinetic_bound = 0.0;  ///< kappa |Omega|^(1/2)
  double curl_norm = 0.0;      ///< |curl(A - F)|_{L2(filled domain)}
  double curl_bound = 0.0;     ///< |psi|_{L2} / H
  double div_max = 0.0;        ///< max |div (A - F)| over nodes, h^2-scaled circulation
};

struct GLResult {
  GLState state;
  double energy = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string seed;
  ELResiduals residuals;
  GLDiagnostics diagnostics;
};

/// Gauge-fixed descent: A = F + grad-perp(a) with a stream function a on the plaquettes of the filled domain
/// (zero outside), so div A = div F and the normal trace is fixed by construction. A given start state is first
/// projected onto that form (one Poisson solve for a, the curl-free rest is gauged into psi). (psi, a) are
/// updated together by preconditioned Barzilai-Borwein steps. Throws ConvergenceError with an energy trace when
/// no seed reaches tol.
GLResult minimize_gl(double kappa, double H, const ScalarField& B, const VectorField& F, const GLOptions& opt = {},
                     const GLState* start = nullptr);
GLDiagnostics gl_diagnostics(const GLState& s, const VectorField& F);

/// Splits A - F into grad-perp(a) + grad(chi) and returns (psi e^{-i kappa H chi}, F + grad-perp(a)).
GLState project_gauge(const GLState& s, const VectorField& F);

struct EffectiveEnergy {
  double b = 0.0;
  double ell = 0.0;
  std::vector<double> cell_values;  ///< g(b B_av) per lattice site
  std::vector<double> cell_fields;  ///< B_av per site
  double total = 0.0;               ///< ell^2 sum
  CellLattice lattice;
};
EffectiveEnergy effective_energy(const ScalarField& B, double b, double ell, const GInterpolant& g, int jobs = 1);

struct JensenResult {
  double lhs = 0.0;  ///< ell^2 sum g(b B_av)
  double rhs = 0.0;  ///< sum over cells of int g(b B) by the same cell quadrature
  double domain_area = 0.0;
};
/// Throws when lhs leaves [-|Omega|/2, 0].
JensenResult jensen_check(const ScalarField& B, double b, double ell, const GInterpolant& g, int jobs = 1);

/// Glued reduced Dirichlet minimizers, one per lattice cell, rescaled by s = (kappa H B_av)^(1/2) and moved into the
/// gauge of F; zero outside the union of cells.
ComplexField trial_state(const ScalarField& B, const VectorField& F, double kappa, double H, double ell, int jobs = 1);

struct Thm13Record {
  double kappa = 0.0;
  double H = 0.0;
  double b = 0.0;
  double ell = 0.0;
  double h = 0.0;
  double E_min = 0.0;
  double E_trial = 0.0;
  double E_asy = 0.0;
  double gap = 0.0;
  double normalized_gap = 0.0;
  double psi_linf = 0.0;
  ELResiduals residuals;
  double grad_B_sq = 0.0;    ///< |grad B|^2_{L2}
  bool lower_envelope = false;  ///< E_min >= kappa^2 E_asy - (kappa^(15/8) + kappa^(3/2) |grad B|^2)
  bool upper_envelope = false;  ///< E_trial <= kappa^2 E_asy + kappa^(7/4) N ell^2 + kappa^(3/2) |grad B|^2
  GLResult minimizer;
};
/// ell must lie in [kappa^(-3/4) / 4, 4 kappa^(-3/4)]; B must have a positive floor.
Thm13Record thm13_report(const ScalarField& B, double kappa, double b, double ell, const GInterpolant& g,
                         const GLOptions& opt = {}, int jobs = 1);

struct L4Check {
  double lhs = 0.0;       ///< |psi|_{L4}^4
  double rhs = 0.0;       ///< -2 E_asy
  double identity = 0.0;  ///< |G0 + kappa^2 |psi|_{L4}^4 / 2|
};
L4Check l4_identity_check(const GLState& s, const VectorField& F, double E_asy);

struct EigenViaGL {
  double quotient = 0.0;
  double ratio = 0.0;  ///< quotient / sigma
  double kappa = 0.0;
  double H = 0.0;
  double b = 0.0;
  double ell = 0.0;
  double psi_l2_sq = 0.0;
  GLResult minimizer;
};
/// sigma-scaled Rayleigh quotient of chi_ell psi under F, psi the GL minimizer at b = (1 - a) / m0(B),
/// kappa = (sigma / b)^(1/2), H = b kappa. chi_ell = 0 within ell of the boundary, 1 beyond 2 ell, C^1 in between.
/// Throws "choose smaller b / larger a" when |psi|^2_{L2} < psi_floor |Omega|.
EigenViaGL eigen_upper_via_gl(const ScalarField& B, const VectorField& F, double sigma, double a,
                              const GLOptions& opt = {}, double psi_floor = 1e-6);
double cutoff_chi(double dist, double ell);

/// |A - F|_{L4} / |curl(A - F)|_{L2} over the filled domain (0 when both vanish).
double curl_div_ratio(const GLState& s, const VectorField& F);

}  // namespace maglab
