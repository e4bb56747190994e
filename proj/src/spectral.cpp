#include "maglab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

namespace maglab {

namespace {

constexpr Complex kI{0.0, 1.0};

/// Fraction of the segment a -> b (a inside, b outside) before it leaves the domain.
double boundary_fraction(const Domain& d, Point a, Point b) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (d.signed_distance(a + mid * (b - a)) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::max(0.5 * (lo + hi), 1e-3);
}

/// Ones tapered by (d / d_max)^4, d the distance to the boundary. A flat start excites the boundary
/// states that sit just above the bulk Landau cluster and converge very slowly.
Eigen::VectorXcd default_start(const MagneticOperator& op) {
  const Grid& g = op.g();
  ScalarField d(op.grid());
  double dmax = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.inside(k)) {
      d[k] = std::max(-g.domain().signed_distance(g.node(k)), 0.0);
      dmax = std::max(dmax, d[k]);
    }
  ComplexField t(op.grid());
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.inside(k)) t[k] = dmax > 0.0 ? std::pow(d[k] / dmax, 4) + 1e-12 : 1.0;
  return op.restrict_to_unknowns(t);
}

}  // namespace

EdgeIntegrals edge_integrals(const VectorField& A) {
  const Grid& g = A.g();
  const double h = g.h();
  EdgeIntegrals e;
  e.x.assign(g.size(), 0.0);
  e.y.assign(g.size(), 0.0);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      if (i + 1 < g.nx()) e.x[k] = 0.5 * h * (A.x()[k] + A.x()[k + 1]);
      if (j + 1 < g.ny()) e.y[k] = 0.5 * h * (A.y()[k] + A.y()[k + g.nx()]);
    }
  return e;
}

MagneticOperator::MagneticOperator(GridPtr grid, double sigma, VectorField A)
    : grid_(std::move(grid)), sigma_(sigma), A_(std::move(A)) {
  if (!(sigma >= 0.0)) throw Error("assemble: sigma must be nonnegative");
  const Grid& g = *grid_;
  const double h = g.h();
  const double ih2 = 1.0 / (h * h);
  const int nx = g.nx(), ny = g.ny();
  const EdgeIntegrals th = edge_integrals(A_);
  link_x_.resize(g.size());
  link_y_.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    link_x_[k] = std::exp(-kI * (sigma * th.x[k]));
    link_y_[k] = std::exp(-kI * (sigma * th.y[k]));
  }

  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const std::size_t k = g.index(i, j);
      if (!(g.inside(k) || g.inside(k + 1) || g.inside(k + nx) || g.inside(k + nx + 1))) continue;
      const double circ = th.x[k] + th.y[k + 1] - th.x[k + nx] - th.y[k];
      max_flux_ = std::max(max_flux_, sigma * std::abs(circ));
    }
  if (max_flux_ > 1.0) throw Error("magnetic flux per plaquette too large");

  unknown_.assign(g.size(), -1);
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.inside(k)) {
      unknown_[k] = static_cast<long>(nodes_.size());
      nodes_.push_back(k);
    }

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(nodes_.size() * 5);
  std::vector<double> diag(nodes_.size(), 0.0);
  const Domain& dom = g.domain();
  // Visit each edge once from its lower/left endpoint, plus boundary edges from the inside side.
  for (std::size_t r = 0; r < nodes_.size(); ++r) {
    const std::size_t k = nodes_[r];
    const int i = static_cast<int>(k % nx), j = static_cast<int>(k / nx);
    struct Nb {
      bool exists;
      std::size_t k;
      Complex u;  // phase such that the difference is U u_nb - u_k
    };
    const Nb nbs[4] = {
        {i + 1 < nx, k + 1, i + 1 < nx ? link_x_[k] : Complex{1.0}},
        {i > 0, k - 1, i > 0 ? std::conj(link_x_[k - 1]) : Complex{1.0}},
        {j + 1 < ny, k + nx, j + 1 < ny ? link_y_[k] : Complex{1.0}},
        {j > 0, k - nx, j > 0 ? std::conj(link_y_[k - nx]) : Complex{1.0}},
    };
    for (const Nb& nb : nbs) {
      if (nb.exists && g.inside(nb.k)) {
        diag[r] += ih2;
        trip.emplace_back(static_cast<long>(r), unknown_[nb.k], -nb.u * ih2);
      } else {
        const double t = nb.exists ? boundary_fraction(dom, g.node(k), g.node(nb.k)) : 1.0;
        diag[r] += ih2 / t;
      }
    }
  }
  for (std::size_t r = 0; r < nodes_.size(); ++r)
    trip.emplace_back(static_cast<long>(r), static_cast<long>(r), Complex{diag[r]});
  const long n = static_cast<long>(nodes_.size());
  L_.resize(n, n);
  L_.setFromTriplets(trip.begin(), trip.end());
  L_.makeCompressed();
}

Eigen::VectorXcd MagneticOperator::restrict_to_unknowns(const ComplexField& u) const {
  Eigen::VectorXcd v(static_cast<long>(nodes_.size()));
  for (std::size_t r = 0; r < nodes_.size(); ++r) v[static_cast<long>(r)] = u[nodes_[r]];
  return v;
}

ComplexField MagneticOperator::extend(const Eigen::VectorXcd& v) const {
  ComplexField u(grid_);
  for (std::size_t r = 0; r < nodes_.size(); ++r) u[nodes_[r]] = v[static_cast<long>(r)];
  return u;
}

double MagneticOperator::form(const ComplexField& u) const {
  const Eigen::VectorXcd v = restrict_to_unknowns(u);
  const double h = grid_->h();
  return h * h * v.dot(L_ * v).real();
}

double MagneticOperator::mass(const ComplexField& u) const {
  const double h = grid_->h();
  double s = 0.0;
  for (std::size_t k : nodes_) s += std::norm(u[k]);
  return h * h * s;
}

MagneticOperator assemble(const GridPtr& grid, double sigma, const VectorField& A) {
  return MagneticOperator(grid, sigma, A);
}

SpectralResult lowest_eigenvalue(const MagneticOperator& op, double tol, int max_iter, const EigenOptions& opt) {
  const SparseMatrixC& L = op.matrix();
  const long n = L.rows();
  if (n == 0) throw Error("lowest_eigenvalue: no interior unknowns");
  Eigen::SimplicialLDLT<SparseMatrixC> ldlt;
  Eigen::ConjugateGradient<SparseMatrixC, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<Complex>> cg;
  if (opt.inner == InnerSolver::ldlt) {
    ldlt.compute(L);
    if (ldlt.info() != Eigen::Success) throw Error("lowest_eigenvalue: factorization failed");
  } else {
    cg.compute(L);
    cg.setMaxIterations(std::max<long>(1000, 4 * n));
  }

  // Inverse iterates v, L^-1 v, L^-2 v, ... span a Krylov space of the shift-inverted operator. A
  // Rayleigh-Ritz step on that space after every block resolves the nearly degenerate bottom cluster
  // far faster than the bare power sequence. Restarts keep the `keep` lowest Ritz vectors.
  const long block = std::min<long>(std::max(opt.block, 2), n);
  const long keep = std::min<long>(std::max(opt.keep, 1), block - 1);
  Eigen::VectorXcd v = opt.start ? op.restrict_to_unknowns(*opt.start) : default_start(op);
  if (!(v.norm() > 0.0)) throw Error("lowest_eigenvalue: zero start vector");
  v.normalize();
  Eigen::VectorXcd Lv = L * v;
  double lambda = v.dot(Lv).real();
  double residual = (Lv - lambda * v).norm() / std::abs(lambda);
  int it = 0;
  Eigen::MatrixXcd Q(n, block);
  Q.col(0) = v;
  long m0 = 1;
  while (residual > tol && it < max_iter) {
    long m = m0;
    for (; m < block && it < max_iter; ++m) {
      ++it;
      Eigen::VectorXcd w;
      if (opt.inner == InnerSolver::ldlt) {
        w = ldlt.solve(Q.col(m - 1));
      } else {
        cg.setTolerance(std::max(std::min(1e-6, 0.1 * residual), 1e-3 * tol));
        w = cg.solve(Q.col(m - 1));
      }
      for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(m) * (Q.leftCols(m).adjoint() * w);
      const double nw = w.norm();
      if (!(nw > 1e-13)) break;
      Q.col(m) = w / nw;
    }
    const Eigen::MatrixXcd LQ = L * Q.leftCols(m);
    Eigen::MatrixXcd H = Q.leftCols(m).adjoint() * LQ;
    H = 0.5 * (H + H.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    const long k = std::min(keep, m);
    const Eigen::MatrixXcd Y = es.eigenvectors().leftCols(k);
    const Eigen::MatrixXcd X = Q.leftCols(m) * Y;
    const double ny = X.col(0).norm();
    v = X.col(0) / ny;
    Lv = LQ * Y.col(0) / ny;
    lambda = v.dot(Lv).real();
    residual = (Lv - lambda * v).norm() / std::abs(lambda);
    if (m <= m0) break;
    // Restart from the kept Ritz vectors (orthonormal already); the lowest goes last, where the next
    // inverse iterate is taken from.
    for (long c = 1; c < k; ++c) Q.col(c - 1) = X.col(c);
    Q.col(k - 1) = v;
    m0 = k;
  }
  if (residual > tol)
    throw ConvergenceError("lowest_eigenvalue: inverse iteration did not converge (residual " +
                               std::to_string(residual) + ")",
                           lambda, it);
  SpectralResult res;
  res.lambda = lambda;
  res.residual = residual;
  res.iterations = it;
  res.eigenvector = op.extend(v / op.g().h());
  return res;
}

double quadratic_form(const ComplexField& u, double sigma, const VectorField& A, const std::optional<Cell>& region) {
  const Grid& g = u.g();
  const double h = g.h();
  const int nx = g.nx(), ny = g.ny();
  const EdgeIntegrals th = edge_integrals(A);
  int i0 = 0, i1 = nx - 1, j0 = 0, j1 = ny - 1;
  std::optional<Domain> cell_dom;
  if (region) {
    const Box b = region->bounds();
    i0 = std::max(0, static_cast<int>(std::floor((b.x_min - g.x0()) / h)) - 1);
    i1 = std::min(nx - 1, static_cast<int>(std::ceil((b.x_max - g.x0()) / h)) + 1);
    j0 = std::max(0, static_cast<int>(std::floor((b.y_min - g.y0()) / h)) - 1);
    j1 = std::min(ny - 1, static_cast<int>(std::ceil((b.y_max - g.y0()) / h)) + 1);
    cell_dom = region->as_domain(h);
  }
  const Box ext = g.extent();
  // Area of the h x h dual rectangle of an edge that lies in the region.
  auto weight = [&](Point mid) {
    if (cell_dom) return h * h * rect_fraction_in(*cell_dom, mid, h, h);
    const double fx = std::clamp((std::min(mid.x + h / 2, ext.x_max) - std::max(mid.x - h / 2, ext.x_min)) / h, 0.0, 1.0);
    const double fy = std::clamp((std::min(mid.y + h / 2, ext.y_max) - std::max(mid.y - h / 2, ext.y_min)) / h, 0.0, 1.0);
    return h * h * fx * fy;
  };
  double q = 0.0;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      const std::size_t k = g.index(i, j);
      const Point p = g.node(i, j);
      if (i + 1 <= i1) {
        const Complex d = std::exp(-kI * (sigma * th.x[k])) * u[k + 1] - u[k];
        if (std::norm(d) > 0.0) q += std::norm(d) / (h * h) * weight({p.x + h / 2, p.y});
      }
      if (j + 1 <= j1) {
        const Complex d = std::exp(-kI * (sigma * th.y[k])) * u[k + nx] - u[k];
        if (std::norm(d) > 0.0) q += std::norm(d) / (h * h) * weight({p.x, p.y + h / 2});
      }
    }
  return q;
}

double radial_cutoff(double t) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  auto f = [](double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; };
  const double x = 2.0 * (1.0 - t);
  return f(x) / (f(x) + f(1.0 - x));
}

ComplexField gaussian_trial(const GridPtr& grid, double sigma, double b_av, Point center, double rho,
                            GaussianWidth width) {
  if (!(b_av > 0.0)) throw Error("gaussian_trial: cell average must be positive");
  const double r = std::pow(sigma, -rho);
  if (grid->domain().signed_distance(center) > -r) throw Error("gaussian_trial: disk not contained in the domain");
  double amp = 0.0, alpha = 0.0;
  if (width == GaussianWidth::landau) {
    amp = std::sqrt(b_av * sigma / (2.0 * std::numbers::pi));
    alpha = 0.25 * b_av * sigma;
  } else {
    amp = std::pow(b_av, 0.25) * std::sqrt(sigma / std::numbers::pi);
    alpha = 0.5 * std::sqrt(b_av) * sigma;
  }
  ComplexField v(grid);
  const Grid& g = *grid;
  const double h = g.h();
  const int i0 = std::max(0, static_cast<int>(std::floor((center.x - r - g.x0()) / h)));
  const int i1 = std::min(g.nx() - 1, static_cast<int>(std::ceil((center.x + r - g.x0()) / h)));
  const int j0 = std::max(0, static_cast<int>(std::floor((center.y - r - g.y0()) / h)));
  const int j1 = std::min(g.ny() - 1, static_cast<int>(std::ceil((center.y + r - g.y0()) / h)));
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      const Point p = g.node(i, j);
      const double d2 = (p.x - center.x) * (p.x - center.x) + (p.y - center.y) * (p.y - center.y);
      const double c = radial_cutoff(std::sqrt(d2) / r);
      if (c > 0.0) v[g.index(i, j)] = amp * c * std::exp(-alpha * d2);
    }
  return v;
}

namespace {

Box widened(Box b, double w) { return {b.x_min - w, b.x_max + w, b.y_min - w, b.y_max + w}; }

ComplexField apply_phase(const ComplexField& u, const ScalarField& phi, double s) {
  ComplexField out(u.grid());
  for (std::size_t k = 0; k < u.values().size(); ++k)
    if (u[k] != Complex{}) out[k] = std::exp(kI * (s * phi[k])) * u[k];
  return out;
}

double gap_constant(const Cell& cell, double sigma, double rho) {
  const double c2 = cell.diameter() * std::pow(sigma, rho);
  return 16.0 * std::pow(c2, 4);
}

}  // namespace

Sandwich sandwich_check(const ComplexField& u, double sigma, const Cell& cell, const ScalarField& B,
                        const VectorField& A, double rho, double eta) {
  if (!(rho > 0.0 && rho < 0.5)) throw Error("sandwich_check: rho must lie in (0, 1/2)");
  if (!(eta > 0.0 && eta < 0.5)) throw Error("sandwich_check: eta must lie in (0, 1/2)");
  const GridPtr& grid = B.grid();
  const VectorField A_new = recentered_potential(B, cell);
  const ScalarField phi = gauge_function(A, A_new, widened(cell.bounds(), grid->h()));
  const ComplexField v = apply_phase(u, phi, sigma);
  const double b_av = cell_average(B, cell);
  const VectorField A_av = averaged_potential(grid, b_av, cell);

  Sandwich s;
  s.middle = quadratic_form(u, sigma, A, cell);
  s.q_av = quadratic_form(v, sigma, A_av, cell);
  const double uinf = max_abs(u);
  s.gap_term = gap_constant(cell, sigma, rho) * std::pow(sigma, 2.0 - 4.0 * rho + eta) *
               h1_seminorm_sq_on(B, cell) * uinf * uinf;
  const double f = std::pow(sigma, -eta);
  s.lower = (1.0 - f) * s.q_av - s.gap_term;
  s.upper = (1.0 + f) * s.q_av + s.gap_term;
  return s;
}

UpperBound thm12_upper(const MagneticOperator& op, const ScalarField& B, double eps, double rho, double eta) {
  const double sigma = op.sigma();
  if (!(sigma > 0.0)) throw Error("thm12_upper: sigma must be positive");
  const Grid& g = op.g();
  const Domain& dom = g.domain();
  const double h = g.h();
  const double r = std::pow(sigma, -rho);
  const int stride = std::max(1, static_cast<int>(std::lround(0.5 * r / h)));

  struct Cand {
    Point c;
    double avg;
    double dist;
  };
  std::vector<Cand> cands;
  for (int j = 0; j < g.ny(); j += stride)
    for (int i = 0; i < g.nx(); i += stride) {
      const Point c = g.node(i, j);
      const double sd = dom.signed_distance(c);
      if (sd > -r - h) continue;
      cands.push_back({c, cell_average(B, Cell::disk(c, r)), -sd});
    }
  if (cands.empty()) throw Error("thm12_upper: no admissible center (domain too small for the disk)");
  double mn = cands.front().avg;
  for (const Cand& c : cands) mn = std::min(mn, c.avg);
  if (!(mn > 0.0)) throw Error("thm12_upper: field average must be positive");
  const double cut = mn + eps + 1e-12 * std::abs(mn);
  const Cand* best = nullptr;
  for (const Cand& c : cands)
    if (c.avg <= cut && (!best || c.dist > best->dist)) best = &c;

  const Cell cell = Cell::disk(best->c, r);
  const ComplexField v = gaussian_trial(op.grid(), sigma, best->avg, best->c, rho);
  const VectorField A_new = recentered_potential(B, cell);
  const ScalarField phi = gauge_function(op.potential(), A_new, widened(cell.bounds(), h));
  const ComplexField u = apply_phase(v, phi, -sigma);

  UpperBound ub;
  ub.center = best->c;
  ub.b_av = best->avg;
  ub.radius = r;
  ub.quotient = op.rayleigh(u);
  ub.ratio = ub.quotient / sigma;
  const VectorField A_av = averaged_potential(op.grid(), best->avg, cell);
  const double vv = op.mass(v);
  const double uinf = max_abs(u);
  const double gap = gap_constant(cell, sigma, rho) * std::pow(sigma, 2.0 - 4.0 * rho + eta) *
                     h1_seminorm_sq_on(B, cell) * uinf * uinf;
  ub.prop_bound = ((1.0 + std::pow(sigma, -eta)) * quadratic_form(v, sigma, A_av, cell) + gap) / vv;
  ub.trial = u;
  return ub;
}

Diamagnetic diamagnetic_lower(const ComplexField& u, double sigma, const ScalarField& B, const VectorField& A) {
  Diamagnetic d;
  d.form = quadratic_form(u, sigma, A);
  const Grid& g = u.g();
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += g.weight(k) * B[k] * std::norm(u[k]);
  d.bound = sigma * s;
  return d;
}

double lowest_over_components(const std::vector<MagneticOperator>& parts, double tol) {
  if (parts.empty()) throw Error("lowest_over_components: no components");
  double best = std::numeric_limits<double>::infinity();
  for (const MagneticOperator& p : parts) best = std::min(best, lowest_eigenvalue(p, tol).lambda);
  return best;
}

}  // namespace maglab
