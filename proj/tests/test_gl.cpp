#include <cmath>
#include <random>

#include "doctest.h"
#include "maglab/gl.hpp"
#include "maglab/random_field.hpp"
#include "maglab/spectral.hpp"

using namespace maglab;
using doctest::Approx;

namespace {

GridPtr unit_square(double h) { return make_grid(Domain::rectangle({0, 1, 0, 1}, h)); }

// exact stream function (1 - r^2) e^x / 4 on the unit disk and its field
double manufactured_B(Point p) { return std::exp(p.x) * (3 + 4 * p.x + p.x * p.x + p.y * p.y) / 4; }
Vec2 manufactured_F(Point p) {
  const double r2 = p.x * p.x + p.y * p.y;
  return {std::exp(p.x) * (-2 * p.y) / 4, -std::exp(p.x) * ((1 - r2) - 2 * p.x) / 4};
}

double l2_error(const VectorField& F, const std::function<Vec2(Point)>& exact) {
  const Grid& g = F.g();
  double e = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.weight(k) == 0.0) continue;
    const Vec2 v = exact(g.node(k));
    e += g.weight(k) * (std::pow(F.x()[k] - v.x, 2) + std::pow(F.y()[k] - v.y, 2));
  }
  return std::sqrt(e);
}

/// Concave test table g(b) = -(1 - b)^2 / 2 on [0, 1].
GInterpolant parabola_table(int n = 16) {
  std::vector<double> b, g;
  for (int i = 0; i <= n; ++i) {
    b.push_back(static_cast<double>(i) / n);
    g.push_back(-0.5 * std::pow(1 - b.back(), 2));
  }
  return GInterpolant(b, g);
}

}  // namespace

TEST_CASE("reference potential") {
  SUBCASE("unit field on the unit disk") {
    for (double h : {1.0 / 32, 1.0 / 64}) {
      const GridPtr g = make_grid(Domain::disk({0, 0}, 1, h));
      const VectorField F = build_reference_potential(ScalarField(g, 1.0));
      // phi = (1 - r^2) / 4, F = A0
      CHECK(l2_error(F, canonical_potential) <= h * h * 1e-6);
      const std::size_t k = g->index(g->nx() - 1, (g->ny() - 1) / 2);
      CHECK(g->node(k).x == Approx(1.0));
      CHECK(F.x()[k] == Approx(0.0).epsilon(1e-10));
      CHECK(F.y()[k] == Approx(0.5).epsilon(1e-10));
    }
  }
  SUBCASE("second-order convergence") {
    const GridPtr g1 = make_grid(Domain::disk({0, 0}, 1, 1.0 / 32));
    const GridPtr g2 = make_grid(Domain::disk({0, 0}, 1, 1.0 / 64));
    const double e1 = l2_error(build_reference_potential(sample(g1, manufactured_B)), manufactured_F);
    const double e2 = l2_error(build_reference_potential(sample(g2, manufactured_B)), manufactured_F);
    CHECK(e1 / e2 > 3.5);
    CHECK(e1 / e2 < 4.5);
  }
  SUBCASE("zero field") {
    const GridPtr g = unit_square(1.0 / 16);
    const VectorField F = build_reference_potential(ScalarField(g, 0.0));
    for (std::size_t k = 0; k < g->size(); ++k) {
      CHECK(F.x()[k] == 0.0);
      CHECK(F.y()[k] == 0.0);
    }
  }
  SUBCASE("divergence free and tangent") {
    const GridPtr g = unit_square(1.0 / 32);
    FourierOptions fo;
    fo.K = 6;
    fo.offset = 2.0;
    const ScalarField B = FourierField(7, fo).sample(g);
    const VectorField F = build_reference_potential(B);
    const double h = g->h();
    double fmax = 0.0, dmax = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k) fmax = std::max(fmax, std::hypot(F.x()[k], F.y()[k]));
    const int nx = g->nx();
    for (int j = 2; j + 2 < g->ny(); ++j)
      for (int i = 2; i + 2 < nx; ++i) {
        const std::size_t k = g->index(i, j);
        const double div = (F.x()[k + 1] - F.x()[k - 1] + F.y()[k + nx] - F.y()[k - nx]) / (2 * h);
        dmax = std::max(dmax, std::abs(div));
      }
    CHECK(dmax <= 1e-10 * fmax / h);
    for (int i = 0; i < nx; ++i) {
      CHECK(std::abs(F.y()[g->index(i, 0)]) <= 1e-12);
      CHECK(std::abs(F.x()[g->index(0, i)]) <= 1e-12);
    }
    // curl F = B away from the boundary
    const ScalarField c = curl_of(F);
    CHECK(c[g->index(16, 16)] == Approx(B[g->index(16, 16)]).epsilon(1e-2));
  }
}

TEST_CASE("GL energy structure") {
  const GridPtr g = unit_square(1.0 / 32);
  const ScalarField B(g, 1.0);
  const VectorField F = build_reference_potential(B);
  const double kappa = 5.0, H = 2.5;
  GLState n = normal_state(F, kappa, H);
  CHECK(gl_energy(n, F) == 0.0);
  const ELResiduals r0 = euler_lagrange_residual(n, F);
  CHECK(r0.psi == 0.0);
  CHECK(r0.A == 0.0);
  CHECK(r0.bc == 0.0);

  // zero field, constant state
  const VectorField Z = build_reference_potential(ScalarField(g, 0.0));
  GLState one = normal_state(Z, kappa, H);
  one.psi = ComplexField(g, 1.0);
  CHECK(gl_energy(one, Z) == Approx(-kappa * kappa / 2).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> N01;
  GLState s = normal_state(F, kappa, H);
  for (auto& z : s.psi.values()) z = {0.5 + 0.2 * N01(rng), 0.2 * N01(rng)};
  for (auto& t : s.A.x) t += 1e-3 * N01(rng);
  const double e = gl_energy(s, F);
  GLState p = s;
  for (auto& z : p.psi.values()) z *= std::polar(1.0, 0.77);
  CHECK(gl_energy(p, F) == Approx(e).epsilon(1e-13));

  const ScalarField chi = sample(g, [](Point x) { return std::sin(3 * x.x) * x.y; });
  CHECK(gl_energy(gauge_transform(s, chi), F) == Approx(e).epsilon(1e-12));

  const ELResiduals r = euler_lagrange_residual(s, F);
  CHECK(r.psi > 0.0);
  CHECK(r.A > 0.0);
  CHECK(r.bc > 0.0);

  // projection keeps the energy up to the cut boundary plaquettes and removes the divergence
  const GLState q = project_gauge(gauge_transform(s, chi), F);
  CHECK(gl_diagnostics(q, F).div_max <= 1e-8);
  CHECK(gl_energy(q, F) == Approx(e).epsilon(1e-9));

  CHECK(gl_energy_no_field(n, F) == 0.0);
  CHECK(curl_div_ratio(n, F) == 0.0);
  const VectorField An = potential_at_nodes(n);
  CHECK(An.x()[g->index(16, 16)] == Approx(F.x()[g->index(16, 16)]).epsilon(1e-3));
}

TEST_CASE("GL minimization") {
  const GridPtr g = unit_square(1.0 / 48);
  const ScalarField B(g, 1.0);
  const VectorField F = build_reference_potential(B);
  const double kappa = 6.0;
  GLOptions opt;
  const GLResult r = minimize_gl(kappa, 0.5 * kappa, B, F, opt);
  CHECK(r.converged);
  CHECK(r.energy < 0.0);
  CHECK(r.residuals.max() <= 10 * opt.tol);
  CHECK(r.diagnostics.psi_linf <= 1.0 + 1e-6);
  CHECK(r.diagnostics.kinetic_norm <= r.diagnostics.kinetic_bound * (1 + opt.tol));
  CHECK(r.diagnostics.curl_norm <= r.diagnostics.curl_bound * (1 + opt.tol));
  CHECK(r.diagnostics.div_max <= 1e-8);
  CHECK(gl_energy(r.state, F) == Approx(r.energy).epsilon(1e-12));

  // critical-point identity G0 = -kappa^2 |psi|^4 / 2
  const L4Check l4 = l4_identity_check(r.state, F, -0.1);
  CHECK(l4.identity <= 10 * opt.tol * kappa * kappa);
  CHECK(l4.rhs == Approx(0.2));

  SUBCASE("gauge-transformed start") {
    const ScalarField chi = sample(g, [](Point x) { return 0.3 * std::cos(2 * x.x + x.y); });
    const GLState start = gauge_transform(r.state, chi);
    GLOptions o = opt;
    o.seeds = {"given"};
    const GLResult r2 = minimize_gl(kappa, 0.5 * kappa, B, F, o, &start);
    CHECK(std::abs(r2.energy - r.energy) <= 10 * opt.tol * std::max(1.0, std::abs(r.energy)));
  }
  SUBCASE("normal regime") {
    // corner superconductivity survives b = 2 at this small kappa
    const GLResult n = minimize_gl(kappa, 3.0 * kappa, B, F, opt);
    CHECK(std::abs(n.energy) <= 1e-8);
    CHECK(n.diagnostics.psi_linf <= 1e-3);
    CHECK(n.residuals.max() <= 10 * opt.tol);
  }
  SUBCASE("errors") {
    GLOptions o = opt;
    o.seeds = {"bogus"};
    CHECK_THROWS_AS(minimize_gl(kappa, 3.0, B, F, o), Error);
    o = opt;
    o.max_iter = 2;
    CHECK_THROWS_AS(minimize_gl(kappa, 3.0, B, F, o), ConvergenceError);
    CHECK_THROWS_AS(minimize_gl(kappa, 3.0, ScalarField(g, 0.0), F, opt), Error);
    CHECK_THROWS_AS(minimize_gl(-1.0, 3.0, B, F, opt), Error);
  }
  SUBCASE("curl-div constant") {
    std::vector<double> ratios;
    for (double b : {0.3, 0.5, 0.7}) ratios.push_back(curl_div_ratio(minimize_gl(kappa, b * kappa, B, F).state, F));
    double cstar = 0.0;
    for (double q : ratios) {
      CHECK(std::isfinite(q));
      CHECK(q > 0.0);
      cstar = std::max(cstar, q);
    }
    MESSAGE("fitted C* = " << cstar);
  }
}

TEST_CASE("effective energy and Jensen") {
  const GridPtr g = unit_square(1.0 / 32);
  const GInterpolant gt = parabola_table();
  SUBCASE("anchors") {
    const ScalarField one(g, 1.0);
    const EffectiveEnergy z = effective_energy(one, 0.0, 0.25, gt);
    CHECK(z.lattice.count() == 9);
    CHECK(z.total == Approx(-9 * 0.0625 / 2));
    CHECK(effective_energy(one, 1.0, 0.25, gt).total == 0.0);
    CHECK(effective_energy(ScalarField(g, 2.0), 0.7, 0.25, gt).total == 0.0);
    // (0,1)^2, ell = 1/8: centres m/8 with 1 <= m <= 7
    const EffectiveEnergy e = effective_energy(one, 0.5, 0.125, gt);
    CHECK(e.lattice.count() == 49);
    CHECK(e.total == Approx(49.0 / 64 * gt(0.5)));
    CHECK(e.total >= -0.5);
    CHECK_THROWS_AS(effective_energy(one, 0.5, 2.0, gt), Error);
  }
  SUBCASE("Jensen") {
    const JensenResult c = jensen_check(ScalarField(g, 1.3), 0.5, 0.25, gt);
    CHECK(c.lhs == Approx(c.rhs).epsilon(1e-12));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      FourierOptions fo;
      fo.K = 8;
      FourierField f(seed, fo);
      f.shift_to_floor(0.5, g);
      const ScalarField B = f.sample(g);
      const JensenResult j = jensen_check(B, 0.5, 0.25, gt, 2);
      CHECK(j.lhs >= j.rhs - 1e-12);
      CHECK(j.lhs <= 0.0);
      CHECK(j.lhs >= -0.5 * j.domain_area);
      const JensenResult z = jensen_check(B, 1.0 / ess_inf(B).node_min, 0.25, gt);
      CHECK(z.lhs == 0.0);
      CHECK(z.rhs == 0.0);
    }
  }
}

TEST_CASE("trial state") {
  SUBCASE("one cell, constant field") {
    const double h = 1.0 / 48;
    const GridPtr g = make_grid(Domain::rectangle({-0.5, 0.5, -0.5, 0.5}, h));
    const ScalarField B(g, 1.0);
    const VectorField F = build_reference_potential(B);
    const double kappa = std::sqrt(72.0), H = kappa / 2;  // kappa H = 36, R = 6
    const ComplexField psi = trial_state(B, F, kappa, H, 1.0);
    CHECK(max_abs(psi) <= 1.0);
    CHECK(max_abs(psi) > 0.1);
    GLState s = normal_state(F, kappa, H);
    s.psi = psi;
    // G(psi_trial) = m0(b, R) / b on one cell
    ReducedGLProblem p;
    p.b = 0.5;
    p.R = 6.0;
    p.boundary = Boundary::dirichlet;
    p.h = 6.0 / 48;
    const double m0 = minimize_reduced(p, 1e-8).energy;
    const double et = gl_energy(s, F);
    CHECK(et == Approx(m0 / 0.5).epsilon(1e-2));
    CHECK(et < 0.0);
    GLOptions o;
    CHECK(minimize_gl(kappa, H, B, F, o).energy <= et);
  }
  SUBCASE("strong field gives zero") {
    const GridPtr g = unit_square(1.0 / 32);
    const ScalarField B(g, 1.0);
    const VectorField F = build_reference_potential(B);
    CHECK(max_abs(trial_state(B, F, 8.0, 9.0, 0.25)) == 0.0);
  }
}

TEST_CASE("asymptotic energy record and eigenvalue bridge") {
  const GridPtr g = unit_square(1.0 / 32);
  const ScalarField B(g, 1.0);
  const GInterpolant gt = parabola_table();
  const double kappa = 4.0;
  const Thm13Record r = thm13_report(B, kappa, 0.5, std::pow(kappa, -0.75), gt);
  CHECK(r.E_min <= r.E_trial);
  CHECK(r.E_trial <= 0.0);
  CHECK(r.E_asy < 0.0);
  CHECK(r.gap == Approx(std::abs(r.E_min - kappa * kappa * r.E_asy)));
  CHECK(r.normalized_gap == Approx(r.gap / std::pow(kappa, 15.0 / 8)));
  CHECK(r.lower_envelope);
  CHECK(r.upper_envelope);
  CHECK_THROWS_AS(thm13_report(B, kappa, 0.5, 1.5, gt), Error);
  CHECK_THROWS_AS(thm13_report(ScalarField(g, 0.0), kappa, 0.5, 0.35, gt), Error);

  const VectorField F = build_reference_potential(B);
  const double sigma = 64.0;
  const EigenViaGL e = eigen_upper_via_gl(B, F, sigma, 0.5);
  const double lam = lowest_eigenvalue(assemble(g, sigma, F)).lambda;
  CHECK(e.quotient >= lam * (1 - 1e-9));
  CHECK(e.ratio >= 1.0);
  CHECK(e.ratio <= 4.0);
  CHECK(e.kappa * e.H == Approx(sigma));
  CHECK_THROWS_WITH_AS(eigen_upper_via_gl(B, F, sigma, 0.5, {}, 10.0), doctest::Contains("larger a"), Error);
  CHECK_THROWS_AS(eigen_upper_via_gl(B, F, sigma, 1.5), Error);
}

TEST_CASE("cutoff") {
  const double ell = 0.1;
  CHECK(cutoff_chi(0.05, ell) == 0.0);
  CHECK(cutoff_chi(0.1, ell) == 0.0);
  CHECK(cutoff_chi(0.2, ell) == 1.0);
  CHECK(cutoff_chi(0.3, ell) == 1.0);
  double slope = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double d = 0.1 + 0.1 * i / 1000.0;
    slope = std::max(slope, (cutoff_chi(d + 1e-6, ell) - cutoff_chi(d, ell)) / 1e-6);
  }
  CHECK(slope <= 4.0 / ell);
}
