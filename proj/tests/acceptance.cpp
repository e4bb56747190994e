// One PASS/FAIL line per acceptance criterion. Exit status is the number of failed criteria (capped at 1).
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "maglab/experiments.hpp"
#include "maglab/field.hpp"
#include "maglab/gl.hpp"
#include "maglab/random_field.hpp"
#include "maglab/spectral.hpp"

using namespace maglab;

namespace {

int failures = 0;
const int kJobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int id, const std::string& name, bool ok, double secs, double limit, const std::string& detail) {
  const bool in_time = secs <= limit;
  if (!(ok && in_time)) ++failures;
  std::printf("[%s] %2d %s: %s; %.1f s (limit %.0f s)%s\n", ok && in_time ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str(), secs, limit, in_time ? "" : " TOO SLOW");
  std::fflush(stdout);
}

Config cfg_of(const std::string& text) {
  std::stringstream ss(text);
  return Config::parse(ss);
}

std::string first_failures(const Report& r, std::size_t n = 3) {
  std::string s;
  for (std::size_t i = 0; i < std::min(n, r.failures.size()); ++i) s += "; " + r.failures[i];
  return s;
}

template <class F>
void guarded(int id, const std::string& name, double limit, F&& body) {
  const auto t0 = Clock::now();
  try {
    body(t0);
  } catch (const std::exception& e) {
    report(id, name, false, seconds_since(t0), limit, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double l2_diff(const VectorField& F, const std::function<Vec2(Point)>& exact) {
  const Grid& g = F.g();
  double e = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.weight(k) == 0.0) continue;
    const Vec2 v = exact(g.node(k));
    e += g.weight(k) * (std::pow(F.x()[k] - v.x, 2) + std::pow(F.y()[k] - v.y, 2));
  }
  return std::sqrt(e);
}

}  // namespace

int main() {
  std::printf("maglab %s acceptance, %d worker(s)\n", version().c_str(), kJobs);

  guarded(1, "averaging inequality", 60, [](auto t0) {
    const Report r = run_averaging(Config{}, "", kJobs);
    report(1, "averaging inequality", r.pass(), seconds_since(t0), 60,
           fmt("%.0f instances at h = ell/128, max lhs/rhs = %.3e, violations %.0f", r.rows.size(),
               r.summary["max_ratio"].get<double>(), r.summary["violations"].get<double>()) +
               first_failures(r));
  });

  guarded(2, "constant-field exactness", 5, [](auto t0) {
    double worst = 0.0;
    for (double c : {0.5, 1.0, 7.25})
      for (double ell : {0.5, 0.125}) {
        const double h = ell / 128;
        const GridPtr g = make_grid(Domain::rectangle({-ell / 2 - h, ell / 2 + h, -ell / 2 - h, ell / 2 + h}, h));
        worst = std::max(worst, averaging_gap(ScalarField(g, c), Cell::square({0, 0}, ell)).lhs);
      }
    report(2, "constant-field exactness", worst <= 1e-20, seconds_since(t0), 5,
           fmt("max int |A_new - A_av|^2 = %.2e (need <= 1e-20)", worst));
  });

  guarded(3, "linear-field closed form", 5, [](auto t0) {
    double worst = 0.0;
    for (double ell : {1.0, 0.5, 0.25}) {
      const double h = ell / 256;
      const GridPtr g = make_grid(Domain::rectangle({-ell / 2 - h, ell / 2 + h, -ell / 2 - h, ell / 2 + h}, h));
      const double lhs = averaging_gap(sample(g, [](Point p) { return 1.0 + p.x; }), Cell::square({0, 0}, ell)).lhs;
      worst = std::max(worst, std::abs(lhs / (7 * std::pow(ell, 6) / 3240) - 1));
    }
    report(3, "linear-field closed form", worst <= 0.01, seconds_since(t0), 5,
           fmt("max relative deviation from 7 ell^6 / 3240 = %.3e (need <= 1e-2)", worst));
  });

  guarded(4, "non-magnetic eigenvalues", 30, [](auto t0) {
    const double h = 1.0 / 128;
    const GridPtr sq = make_grid(Domain::rectangle({0, 1, 0, 1}, h));
    const GridPtr dk = make_grid(Domain::disk({0, 0}, 1, h, h));
    const double ls = lowest_eigenvalue(assemble(sq, 0.0, VectorField(sq))).lambda;
    const double ld = lowest_eigenvalue(assemble(dk, 0.0, VectorField(dk))).lambda;
    const double j01 = 2.404825557695773;
    const double es = std::abs(ls / (2 * std::numbers::pi * std::numbers::pi) - 1), ed = std::abs(ld / (j01 * j01) - 1);
    report(4, "non-magnetic eigenvalues", es <= 5e-3 && ed <= 5e-3, seconds_since(t0), 30,
           fmt("square %.5f (rel %.1e), disk %.5f (rel %.1e), need rel <= 5e-3", ls, es, ld, ed));
  });

  guarded(5, "diamagnetic lower bound", 60, [](auto t0) {
    const double h = 1.0 / 32, sigma = 100.0;
    const GridPtr g = make_grid(Domain::rectangle({-1, 1, -1, 1}, h));
    // deficit (sigma int B|u|^2 - form) / (h^2 sigma^2 |u|^2) for the pair built from `seed`
    auto deficit = [&](std::uint64_t seed) {
      FourierOptions fo;
      fo.K = 8;
      fo.amplitude = 0.25;
      FourierField f(seed, fo);
      f.shift_to_floor(1.0, g);
      const ScalarField B = f.sample(g);
      const VectorField A = potential_from_field(B);
      ComplexField u(g);
      if (seed % 2 == 0) {
        const Point c{0.3 * std::sin(seed * 1.0), 0.3 * std::cos(seed * 2.0)};
        for (std::size_t k = 0; k < g->size(); ++k) {
          const Point p = g->node(k) - c;
          u[k] = radial_cutoff(norm(p) / 0.6) * std::exp(Complex{0.0, 3.0 * p.x * (seed % 7) - p.y});
        }
      } else {
        u = lowest_eigenvalue(assemble(g, sigma, A)).eigenvector;  // Dirichlet ground state, the tight case
      }
      const Diamagnetic d = diamagnetic_lower(u, sigma, B, A);
      const double nu = norm_l2(u);
      return (d.bound - d.form) / (h * h * sigma * sigma * nu * nu);
    };
    double C = 0.0;
    for (std::uint64_t s = 1000; s < 1050; ++s) C = std::max(C, deficit(s));
    C = std::max(1.5 * C, 0.0);  // fitted once on seeds disjoint from the test seeds, then frozen
    int violations = 0;
    double worst = -1e300;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const double d = deficit(s);
      worst = std::max(worst, d);
      if (d > C) ++violations;
    }
    report(5, "diamagnetic lower bound", violations == 0, seconds_since(t0), 60,
           fmt("50 pairs at sigma = 100, fitted C = %.4f, worst deficit %.4f, violations %.0f", C, worst,
               violations));
  });

  guarded(6, "eigenvalue trend", 600, [](auto t0) {
    const Report r = run_eig(cfg_of("domain = disk\nradius = 3\nmargin_cells = 1\nh = 1/64\nsigmas = 100, 200, 400\n"
                                    "ratio_max = 1.5\nC_lower = 0.32\n"),
                             "", kJobs);
    bool ok = r.pass();
    double prev = 1e300;
    for (const Json& row : r.rows) {
      const double q = row["ratio"], up = row["upper_quotient"], lam = row["lambda"];
      ok = ok && q >= 0.98 && q <= 1.5 && q <= prev && up >= lam;
      prev = q;
    }
    std::string pretty;
    for (const Json& row : r.rows)
      pretty += (pretty.empty() ? "" : ", ") + std::string("sigma ") + fmt("%.0f", row["sigma"].get<double>()) +
                fmt(": lambda/sigma %.5f, trial/lambda %.3f", row["ratio"].get<double>(),
                    row["upper_quotient"].get<double>() / row["lambda"].get<double>());
    report(6, "eigenvalue trend", ok, seconds_since(t0), 600, pretty + first_failures(r));
  });

  BulkTable table;
  bool have_table = false;
  guarded(7, "bulk anchors", 1200, [&](auto t0) {
    const Report r = run_bulk(Config{}, "", kJobs, &table);
    have_table = true;
    double c_worst = 0.0;
    for (const BulkRecord& rec : table.records)
      if (rec.b == 0.0) c_worst = std::max(c_worst, rec.R * std::abs(rec.energy / (rec.R * rec.R) + 0.5));
    const bool ok = r.pass() && c_worst <= 1.0;
    std::string gs;
    for (const GEstimate& e : table.summary)
      if (std::fmod(e.b * 4, 1.0) == 0.0) gs += fmt(" g(%.2f)=%.4f", e.b, e.g_est);
    report(7, "bulk anchors", ok, seconds_since(t0), 1200,
           fmt("%.0f records; R |m0(0,R)/R^2 + 1/2| <= %.3f (C = 1);", table.records.size(), c_worst) + gs +
               first_failures(r));
  });
  if (!have_table) {
    std::printf("bulk table unavailable; criteria 8 and 9 use it\n");
  }
  const GInterpolant g_tab = have_table ? GInterpolant::from(table.summary) : GInterpolant({0.0, 1.0}, {-0.5, 0.0});

  guarded(8, "GL structural suite", 900, [&](auto t0) {
    std::string bad;
    auto need = [&](bool c, const std::string& what) {
      if (!c && bad.size() < 200) bad += "; " + what;
    };
    // exact identities
    {
      const GridPtr g = make_grid(Domain::rectangle({0, 1, 0, 1}, 1.0 / 64));
      const ScalarField B(g, 1.0);
      const VectorField F = build_reference_potential(B);
      GLState s = normal_state(F, 8.0, 4.0);
      need(gl_energy(s, F) == 0.0, "G(0, F) != 0");
      std::mt19937_64 rng(7);
      std::normal_distribution<double> N01;
      for (auto& z : s.psi.values()) z = {0.6 + 0.2 * N01(rng), 0.2 * N01(rng)};
      const double e = gl_energy(s, F);
      GLState p = s;
      for (auto& z : p.psi.values()) z *= std::polar(1.0, 2.1);
      need(std::abs(gl_energy(p, F) - e) <= 1e-12 * std::abs(e), "phase invariance");
    }
    // minimizations: square, random field, disk, strong field
    struct Case {
      std::string name;
      Domain dom;
      bool random;
      double b;
    };
    const double kappa = 8.0, h = 1.0 / 64;
    const std::vector<Case> cases = {{"square", Domain::rectangle({0, 1, 0, 1}, h), false, 0.5},
                                     {"random", Domain::rectangle({0, 1, 0, 1}, h), true, 0.5},
                                     {"disk", Domain::disk({0, 0}, 0.75, h), false, 0.5},
                                     {"strong", Domain::rectangle({0, 1, 0, 1}, h), false, 1.2}};
    double worst_res = 0.0, worst_linf = 0.0;
    int runs = 0;
    for (const Case& c : cases) {
      const GridPtr g = make_grid(c.dom);
      ScalarField B(g, 1.0);
      if (c.random) {
        FourierOptions fo;
        fo.K = 8;
        fo.amplitude = 0.25;
        FourierField f(3, fo);
        f.shift_to_floor(1.0, g);
        B = f.sample(g);
      }
      GLOptions opt;
      const Thm13Record r = thm13_report(B, kappa, c.b, std::pow(kappa, -0.75), g_tab, opt, kJobs);
      ++runs;
      worst_res = std::max(worst_res, r.residuals.max() / opt.tol);
      worst_linf = std::max(worst_linf, r.psi_linf);
      need(r.minimizer.converged && r.residuals.max() <= 10 * opt.tol, c.name + ": residual");
      need(r.psi_linf <= 1 + 1e-6, c.name + ": |psi| > 1");
      need(r.E_min <= r.E_trial && r.E_trial <= 0.0, c.name + ": E_min <= E_trial <= 0");
    }
    // Jensen on 20 seeded fields
    const GridPtr g = make_grid(Domain::rectangle({0, 1, 0, 1}, 1.0 / 32));
    double jensen_worst = 1e300;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      FourierOptions fo;
      fo.K = 8;
      fo.amplitude = 0.2;  // keeps b B inside (0, 1), where g is not flat
      FourierField f(seed, fo);
      f.shift_to_floor(0.5, g);
      const JensenResult j = jensen_check(f.sample(g), 0.5, 0.25, g_tab, kJobs);
      jensen_worst = std::min(jensen_worst, j.lhs - j.rhs);
      need(j.lhs >= j.rhs - 1e-12 * j.domain_area, "Jensen seed " + std::to_string(seed));
    }
    report(8, "GL structural suite", bad.empty(), seconds_since(t0), 900,
           fmt("%.0f GL runs, max residual/tol %.2f, max |psi| %.6f, min Jensen lhs - rhs %.3e", runs, worst_res,
               worst_linf, jensen_worst) +
               bad);
  });

  guarded(9, "energy asymptotics at desk scale", 1800, [&](auto t0) {
    const Report r = run_gl(cfg_of("kappas = 8, 16, 32\nb = 1/2\n"), "", kJobs, &g_tab);
    const Report n = run_gl(cfg_of("kappas = 8, 16, 32\nb = 1.2\n"), "", kJobs, &g_tab);
    std::string d = "normalized gap";
    for (const Json& row : r.rows)
      if (row.contains("normalized_gap"))
        d += fmt(" %.4f", row["normalized_gap"].get<double>());
    d += "; b = 1.2 |E_min|/(kappa^2 |Omega|)";
    for (const Json& row : n.rows)
      if (row.contains("E_min"))
        d += fmt(" %.4f", std::abs(row["E_min"].get<double>()) / std::pow(row["kappa"].get<double>(), 2));
    report(9, "energy asymptotics at desk scale", r.pass() && n.pass(), seconds_since(t0), 1800,
           d + first_failures(r) + first_failures(n));
  });

  guarded(10, "F construction", 60, [](auto t0) {
    std::vector<double> unit, manu;
    const std::vector<double> hs = {1.0 / 64, 1.0 / 128};
    for (double h : hs) {
      const GridPtr g = make_grid(Domain::disk({0, 0}, 1, h));
      unit.push_back(l2_diff(build_reference_potential(ScalarField(g, 1.0)), canonical_potential));
      // phi = (1 - r^2) e^x / 4 vanishes on the circle
      const ScalarField B = sample(g, [](Point p) { return std::exp(p.x) * (3 + 4 * p.x + p.x * p.x + p.y * p.y) / 4; });
      manu.push_back(l2_diff(build_reference_potential(B), [](Point p) {
        const double r2 = p.x * p.x + p.y * p.y;
        return Vec2{std::exp(p.x) * (-2 * p.y) / 4, -std::exp(p.x) * ((1 - r2) - 2 * p.x) / 4};
      }));
    }
    const double order = std::log2(manu[0] / manu[1]);
    const bool ok = unit[0] <= hs[0] * hs[0] && unit[1] <= hs[1] * hs[1] && order >= 1.8;
    report(10, "F construction", ok, seconds_since(t0), 60,
           fmt("B = 1: |F - A0| = %.2e, %.2e (need <= h^2); manufactured order %.2f (need >= 1.8)", unit[0],
               unit[1], order));
  });

  std::printf("%d criterion(s) failed\n", failures);
  return failures ? 1 : 0;
}
