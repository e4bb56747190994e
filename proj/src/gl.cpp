#include "maglab/gl.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>

#include "maglab/optimize.hpp"
#include "maglab/parallel.hpp"

namespace maglab {

namespace {

/// Fraction of the segment a -> b (a inside, b outside) before it leaves the domain.
double crossing(const Domain& d, Point a, Point b) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (d.signed_distance(a + mid * (b - a)) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::max(0.5 * (lo + hi), 1e-6);
}

/// Value and slope at s = 0 of the quadratic (or line) through the given samples.
std::pair<double, double> lagrange_at_zero(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() == 2) {
    const auto [x0, f0] = pts[0];
    const auto [x1, f1] = pts[1];
    const double m = (f1 - f0) / (x1 - x0);
    return {f0 - m * x0, m};
  }
  double v = 0.0, d = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double xi = pts[i].first;
    double den = 1.0;
    std::array<double, 2> o{};
    std::size_t q = 0;
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) {
        den *= xi - pts[j].first;
        o[q++] = pts[j].first;
      }
    // L_i(s) = (s - o0)(s - o1) / den
    v += pts[i].second * (o[0] * o[1]) / den;
    d += pts[i].second * (-(o[0] + o[1])) / den;
  }
  return {v, d};
}

struct Stream {
  ScalarField phi;
  std::vector<char> in;
  std::vector<std::array<double, 4>> arm;  // +x, -x, +y, -y as fractions of h
};

Stream solve_stream(const ScalarField& B, double tol, int max_iter) {
  const Grid& g = B.g();
  const Domain D = g.domain().filled();
  const double h = g.h();
  const int nx = g.nx(), ny = g.ny();
  Stream s;
  s.phi = ScalarField(B.grid());
  s.in.assign(g.size(), 0);
  s.arm.assign(g.size(), {1.0, 1.0, 1.0, 1.0});
  std::vector<long> id(g.size(), -1);
  long n = 0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (D.contains(g.node(k))) {
      s.in[k] = 1;
      id[k] = n++;
    }
  if (n == 0) throw Error("reference potential: no grid node inside the domain");
  std::vector<Eigen::Triplet<double>> t;
  Eigen::VectorXd rhs(n);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!s.in[k]) continue;
    const int i = static_cast<int>(k % nx), j = static_cast<int>(k / nx);
    const std::array<bool, 4> ok{i + 1 < nx, i > 0, j + 1 < ny, j > 0};
    const std::array<long, 4> step{1, -1, nx, -static_cast<long>(nx)};
    for (int d = 0; d < 4; ++d) {
      const std::size_t q = static_cast<std::size_t>(static_cast<long>(k) + (ok[d] ? step[d] : 0));
      if (!ok[d]) throw Error("reference potential: domain touches the edge of the sampled box");
      if (!s.in[q]) s.arm[k][d] = crossing(D, g.node(k), g.node(q));
    }
    const long r = id[k];
    double diag = 0.0;
    for (int ax = 0; ax < 2; ++ax) {
      const double hp = s.arm[k][2 * ax] * h, hm = s.arm[k][2 * ax + 1] * h;
      const double c = 2.0 / (hp + hm);
      diag += c * (1.0 / hp + 1.0 / hm);
      const std::size_t kp = static_cast<std::size_t>(static_cast<long>(k) + step[2 * ax]);
      const std::size_t km = static_cast<std::size_t>(static_cast<long>(k) + step[2 * ax + 1]);
      if (s.in[kp]) t.emplace_back(r, id[kp], -c / hp);
      if (s.in[km]) t.emplace_back(r, id[km], -c / hm);
    }
    t.emplace_back(r, r, diag);
    rhs[r] = B[k];
  }
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(t.begin(), t.end());
  M.makeCompressed();
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> solver;
  solver.setTolerance(tol);
  solver.setMaxIterations(max_iter);
  solver.compute(M);
  if (solver.info() != Eigen::Success) throw Error("reference potential: preconditioner setup failed");
  const Eigen::VectorXd phi = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !(solver.error() <= std::max(tol, 1e-14) * 10))
    throw ConvergenceError("reference potential: Poisson solve did not converge", solver.error(),
                           static_cast<int>(solver.iterations()));
  for (std::size_t k = 0; k < g.size(); ++k)
    if (s.in[k]) s.phi[k] = phi[id[k]];
  return s;
}

/// Nodes outside the filled domain whose dual cell meets it.
std::vector<char> fringe(const Grid& g, const std::vector<char>& in) {
  const Domain D = g.domain().filled();
  std::vector<char> f(g.size(), 0);
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!in[k] && square_fraction_in(D, g.node(k), g.h()) > 0.0) f[k] = 1;
  return f;
}

}  // namespace

ScalarField reference_stream_function(const ScalarField& B, double tol, int max_iter) {
  return solve_stream(B, tol, max_iter).phi;
}

VectorField build_reference_potential(const ScalarField& B, double tol, int max_iter) {
  const Stream s = solve_stream(B, tol, max_iter);
  const Grid& g = B.g();
  const Domain D = g.domain().filled();
  const double h = g.h();
  const int nx = g.nx(), ny = g.ny();
  const std::vector<char> fr = fringe(g, s.in);
  auto in = [&](long q) { return q >= 0 && q < static_cast<long>(g.size()) && s.in[static_cast<std::size_t>(q)]; };

  // Along direction `step` from a non-inside node k whose neighbour is inside: samples in the coordinate
  // pointing toward the neighbour.
  auto outward_fit = [&](std::size_t k, long step, bool valid) -> std::optional<std::pair<double, double>> {
    if (!valid) return std::nullopt;
    const long n1 = static_cast<long>(k) + step;
    if (!in(n1)) return std::nullopt;
    const double t = crossing(D, g.node(static_cast<std::size_t>(n1)), g.node(k));
    std::vector<std::pair<double, double>> pts{{h * (1.0 - t), 0.0}, {h, s.phi[static_cast<std::size_t>(n1)]}};
    const long n2 = n1 + step;
    const int i1 = static_cast<int>(n1 % nx), j1 = static_cast<int>(n1 / nx);
    const bool n2ok = (step == 1 && i1 + 1 < nx) || (step == -1 && i1 > 0) || (step == nx && j1 + 1 < ny) ||
                      (step == -nx && j1 > 0);
    if (n2ok && in(n2) && h * (1.0 - t) < 0.999 * h) pts.emplace_back(2 * h, s.phi[static_cast<std::size_t>(n2)]);
    return lagrange_at_zero(pts);
  };

  // Extended stream function on the fringe.
  std::vector<double> ext(g.size(), 0.0);
  std::vector<char> has(g.size(), 0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (s.in[k]) {
      ext[k] = s.phi[k];
      has[k] = 1;
      continue;
    }
    if (!fr[k]) continue;
    const int i = static_cast<int>(k % nx), j = static_cast<int>(k / nx);
    double acc = 0.0;
    int cnt = 0;
    const std::array<std::pair<long, bool>, 4> dirs{
        {{1, i + 1 < nx}, {-1, i > 0}, {nx, j + 1 < ny}, {-static_cast<long>(nx), j > 0}}};
    for (const auto& [st, ok] : dirs)
      if (auto f = outward_fit(k, st, ok)) {
        acc += f->first;
        ++cnt;
      }
    if (cnt) {
      ext[k] = acc / cnt;
      has[k] = 1;
    }
  }
  // Fringe nodes that only touch the domain diagonally: extrapolate along the diagonal.
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!fr[k] || has[k]) continue;
    const int i = static_cast<int>(k % nx), j = static_cast<int>(k / nx);
    double acc = 0.0;
    int cnt = 0;
    for (int di : {-1, 1})
      for (int dj : {-1, 1}) {
        const int i1 = i + di, j1 = j + dj, i2 = i + 2 * di, j2 = j + 2 * dj;
        if (i1 < 0 || i1 >= nx || j1 < 0 || j1 >= ny) continue;
        const std::size_t n1 = g.index(i1, j1);
        if (!s.in[n1]) continue;
        const double t = crossing(D, g.node(n1), g.node(k));
        const double r = std::sqrt(2.0) * h;
        std::vector<std::pair<double, double>> pts{{r * (1.0 - t), 0.0}, {r, s.phi[n1]}};
        if (i2 >= 0 && i2 < nx && j2 >= 0 && j2 < ny && s.in[g.index(i2, j2)] && t > 1e-3)
          pts.emplace_back(2 * r, s.phi[g.index(i2, j2)]);
        acc += lagrange_at_zero(pts).first;
        ++cnt;
      }
    if (cnt) {
      ext[k] = acc / cnt;
      has[k] = 1;
    }
  }

  VectorField F(B.grid());
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!s.in[k] && !fr[k]) continue;
    const int i = static_cast<int>(k % nx), j = static_cast<int>(k / nx);
    double der[2] = {0.0, 0.0};
    for (int ax = 0; ax < 2; ++ax) {
      const long step = ax == 0 ? 1 : nx;
      const bool okp = ax == 0 ? i + 1 < nx : j + 1 < ny;
      const bool okm = ax == 0 ? i > 0 : j > 0;
      if (s.in[k]) {
        const double b = s.arm[k][2 * ax] * h, a = s.arm[k][2 * ax + 1] * h;
        const double fR = in(static_cast<long>(k) + step) ? s.phi[k + static_cast<std::size_t>(step)] : 0.0;
        const double fL = in(static_cast<long>(k) - step) ? s.phi[k - static_cast<std::size_t>(step)] : 0.0;
        const double f0 = s.phi[k];
        der[ax] = (a * a * fR - b * b * fL + (b * b - a * a) * f0) / (a * b * (a + b));
        continue;
      }
      const auto fp = outward_fit(k, step, okp);
      const auto fm = outward_fit(k, -step, okm);
      if (fp || fm) {
        double acc = 0.0;
        int cnt = 0;
        if (fp) acc += fp->second, ++cnt;
        if (fm) acc -= fm->second, ++cnt;
        der[ax] = acc / cnt;
        continue;
      }
      const bool hp = okp && has[k + static_cast<std::size_t>(step)];
      const bool hm = okm && has[k - static_cast<std::size_t>(step)];
      if (hp && hm)
        der[ax] = (ext[k + static_cast<std::size_t>(step)] - ext[k - static_cast<std::size_t>(step)]) / (2 * h);
      else if (hp || hm) {
        const long sgn = hp ? 1 : -1;
        const long k1 = static_cast<long>(k) + sgn * step, k2 = k1 + sgn * step;
        const bool ok2 = hp ? (ax == 0 ? i + 2 < nx : j + 2 < ny) : (ax == 0 ? i > 1 : j > 1);
        const double f1 = ext[static_cast<std::size_t>(k1)];
        if (ok2 && has[static_cast<std::size_t>(k2)])
          der[ax] = sgn * (-3.0 * ext[k] + 4.0 * f1 - ext[static_cast<std::size_t>(k2)]) / (2 * h);
        else
          der[ax] = sgn * (f1 - ext[k]) / h;
      }
    }
    F.set(k, {der[1], -der[0]});
  }
  return F;
}

// ---------------------------------------------------------------------------------------------------------------
// Discrete GL model

namespace {

constexpr Complex kI{0.0, 1.0};

double sq(double x) { return x * x; }

class GLModel {
 public:
  GLModel(const GridPtr& grid, double kappa, double H, const VectorField& F)
      : grid_(grid), kappa_(kappa), H_(H), sigma_(kappa * H) {
    if (!(kappa > 0.0) || !(H > 0.0)) throw Error("GL: kappa and H must be positive");
    if (F.grid().get() != grid.get() && (F.g().nx() != grid->nx() || F.g().ny() != grid->ny()))
      throw Error("GL: F lives on a different grid");
    const Grid& g = *grid_;
    const double h = g.h();
    nx_ = g.nx();
    ny_ = g.ny();
    const Domain& dom = g.domain();
    const Domain tilde = dom.filled();
    thF_ = edge_integrals(F);
    w_ = g.weights();
    cx_.assign(g.size(), 0.0);
    cy_.assign(g.size(), 0.0);
    auto frac = [&](Point mid) {
      const double d = dom.signed_distance(mid);
      if (d <= -h) return 1.0;
      if (d >= h) return 0.0;
      return rect_fraction_in(dom, mid, h, h);
    };
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        const std::size_t k = g.index(i, j);
        const Point p = g.node(i, j);
        if (i + 1 < nx_) cx_[k] = frac({p.x + 0.5 * h, p.y});
        if (j + 1 < ny_) cy_[k] = frac({p.x, p.y + 0.5 * h});
      }
    unknown_.assign(g.size(), 0);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (w_[k] > 0.0) unknown_[k] = 1;
      if (cx_[k] > 0.0) unknown_[k] = unknown_[k + 1] = 1;
      if (cy_[k] > 0.0) unknown_[k] = unknown_[k + nx_] = 1;
    }
    interior_.assign(g.size(), 0);
    for (int j = 1; j + 1 < ny_; ++j)
      for (int i = 1; i + 1 < nx_; ++i) {
        const std::size_t k = g.index(i, j);
        interior_[k] = w_[k] == h * h && cx_[k] == 1.0 && cx_[k - 1] == 1.0 && cy_[k] == 1.0 && cy_[k - nx_] == 1.0;
      }
    for (std::size_t k = 0; k < g.size(); ++k) area_ += w_[k];
    plaq_.assign(g.size(), -1);
    for (int j = 0; j + 1 < ny_; ++j)
      for (int i = 0; i + 1 < nx_; ++i) {
        const Point c{g.node(i, j).x + 0.5 * h, g.node(i, j).y + 0.5 * h};
        if (tilde.contains(c)) {
          plaq_[g.index(i, j)] = static_cast<long>(free_.size());
          free_.push_back(g.index(i, j));
        }
      }
    tilde_area_ = free_.size() * h * h;
  }

  const Grid& g() const { return *grid_; }
  const GridPtr& grid() const { return grid_; }
  double sigma() const { return sigma_; }
  double kappa() const { return kappa_; }
  double H() const { return H_; }
  double area() const { return area_; }
  std::size_t plaquettes() const { return free_.size(); }
  const EdgeIntegrals& thF() const { return thF_; }
  const std::vector<char>& unknown() const { return unknown_; }
  const std::vector<double>& w() const { return w_; }
  const std::vector<double>& cx() const { return cx_; }
  const std::vector<double>& cy() const { return cy_; }

  /// Stream function (free plaquettes) -> edge integrals F + grad-perp(a).
  EdgeIntegrals edges_of(const double* a) const {
    EdgeIntegrals t = thF_;
    auto av = [&](long q) { return q >= 0 ? a[q] : 0.0; };
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        const std::size_t k = grid_->index(i, j);
        if (i + 1 < nx_) {
          const double up = j + 1 < ny_ ? av(plaq_[k]) : 0.0;
          const double dn = j > 0 ? av(plaq_[k - nx_]) : 0.0;
          t.x[k] += up - dn;
        }
        if (j + 1 < ny_) {
          const double rt = i + 1 < nx_ ? av(plaq_[k]) : 0.0;
          const double lf = i > 0 ? av(plaq_[k - 1]) : 0.0;
          t.y[k] -= rt - lf;
        }
      }
    return t;
  }

  /// Circulation of (theta - thF) around plaquette k (lower-left node k).
  double circ(const EdgeIntegrals& t, std::size_t k) const {
    return (t.x[k] - thF_.x[k]) + (t.y[k + 1] - thF_.y[k + 1]) - (t.x[k + nx_] - thF_.x[k + nx_]) -
           (t.y[k] - thF_.y[k]);
  }

  struct Parts {
    double kinetic = 0.0;
    double potential = 0.0;
    double field = 0.0;
    double total() const { return kinetic + potential + field; }
  };

  /// gpsi = 2 dE/d conj(psi) on unknown nodes (zero elsewhere), gth = dE/dtheta.
  Parts energy(const Complex* psi, const EdgeIntegrals& t, Complex* gpsi, EdgeIntegrals* gth,
               bool field = true) const {
    const std::size_t n = grid_->size();
    if (gpsi) std::fill(gpsi, gpsi + n, Complex{});
    if (gth) {
      gth->x.assign(n, 0.0);
      gth->y.assign(n, 0.0);
    }
    Parts e;
    auto edge = [&](std::size_t a, std::size_t b, double c, double th, double* gt) {
      const Complex U = std::polar(1.0, -sigma_ * th);
      const Complex Ub = U * psi[b];
      const Complex d = Ub - psi[a];
      e.kinetic += c * std::norm(d);
      if (gpsi) {
        gpsi[a] -= 2.0 * c * d;
        gpsi[b] += 2.0 * c * std::conj(U) * d;
      }
      if (gt) *gt += 2.0 * c * sigma_ * std::imag(std::conj(d) * Ub);
    };
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        const std::size_t k = grid_->index(i, j);
        if (i + 1 < nx_ && cx_[k] > 0.0) edge(k, k + 1, cx_[k], t.x[k], gth ? &gth->x[k] : nullptr);
        if (j + 1 < ny_ && cy_[k] > 0.0) edge(k, k + nx_, cy_[k], t.y[k], gth ? &gth->y[k] : nullptr);
      }
    const double k2 = kappa_ * kappa_;
    for (std::size_t k = 0; k < n; ++k) {
      if (!unknown_[k]) continue;
      const double s = std::norm(psi[k]);
      e.potential += k2 * w_[k] * (-s + 0.5 * s * s);
      if (gpsi) gpsi[k] += k2 * w_[k] * (2.0 * s - 2.0) * psi[k];
    }
    if (gpsi)
      for (std::size_t k = 0; k < n; ++k)
        if (!unknown_[k]) gpsi[k] = 0.0;
    if (field) {
      const double h2 = sq(grid_->h());
      const double s2 = sigma_ * sigma_;
      for (const std::size_t k : free_) {
        const double c = circ(t, k);
        e.field += s2 * c * c / h2;
        if (gth) {
          const double dc = 2.0 * s2 * c / h2;
          gth->x[k] += dc;
          gth->y[k + 1] += dc;
          gth->x[k + nx_] -= dc;
          gth->y[k] -= dc;
        }
      }
    }
    return e;
  }

  /// dE/da from dE/dtheta (circulation of gth around each free plaquette).
  void reduce_to_a(const EdgeIntegrals& gth, double* ga) const {
    for (std::size_t q = 0; q < free_.size(); ++q) {
      const std::size_t k = free_[q];
      ga[q] = gth.x[k] - gth.x[k + nx_] - gth.y[k] + gth.y[k + 1];
    }
  }

  /// -Lap on free plaquettes with zero outside (= G^T G).
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& lap() const {
    if (!lap_) {
      lap_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(lap_matrix());
      if (lap_->info() != Eigen::Success) throw Error("GL: plaquette Laplacian factorization failed");
    }
    return *lap_;
  }

  Eigen::SparseMatrix<double> lap_matrix() const {
    const long P = static_cast<long>(free_.size());
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t q = 0; q < free_.size(); ++q) {
      const std::size_t k = free_[q];
      const int i = static_cast<int>(k % nx_), j = static_cast<int>(k / nx_);
      t.emplace_back(static_cast<long>(q), static_cast<long>(q), 4.0);
      const std::array<std::pair<bool, long>, 4> nb{{{i + 2 < nx_, static_cast<long>(k) + 1},
                                                     {i > 0, static_cast<long>(k) - 1},
                                                     {j + 2 < ny_, static_cast<long>(k) + nx_},
                                                     {j > 0, static_cast<long>(k) - nx_}}};
      for (const auto& [ok, kk] : nb)
        if (ok && plaq_[static_cast<std::size_t>(kk)] >= 0)
          t.emplace_back(static_cast<long>(q), plaq_[static_cast<std::size_t>(kk)], -1.0);
    }
    Eigen::SparseMatrix<double> L(P, P);
    L.setFromTriplets(t.begin(), t.end());
    return L;
  }

  /// Residuals from a gradient.
  ELResiduals residuals(const Complex* gpsi, const double* ga) const {
    const double h = grid_->h();
    double sp = 0.0, sb = 0.0;
    for (std::size_t k = 0; k < grid_->size(); ++k) {
      if (!unknown_[k]) continue;
      if (interior_[k])
        sp += std::norm(gpsi[k]) / (4.0 * w_[k]);
      else
        sb += std::norm(gpsi[k]) / (4.0 * std::max(w_[k], 0.25 * h * h));
    }
    ELResiduals r;
    const double scale = kappa_ * kappa_ * std::sqrt(area_);
    r.psi = std::sqrt(sp) / scale;
    r.bc = std::sqrt(sb) / scale;
    if (!free_.empty()) {
      const Eigen::Map<const Eigen::VectorXd> g(ga, static_cast<long>(free_.size()));
      const Eigen::VectorXd s = lap().solve(g);
      const double q = std::max(g.dot(s), 0.0);
      r.A = H_ * std::sqrt(q) / (2.0 * sigma_ * sigma_) / std::sqrt(area_);
    }
    return r;
  }

  ELResiduals residuals_of(const ComplexField& psi, const EdgeIntegrals& t) const {
    std::vector<Complex> gp(grid_->size());
    EdgeIntegrals gt;
    energy(psi.values().data(), t, gp.data(), &gt);
    std::vector<double> ga(free_.size());
    reduce_to_a(gt, ga.data());
    return residuals(gp.data(), ga.data());
  }

  /// Block preconditioner: LDLT of 2 (K_F + kappa^2 W) on psi, LDLT of 2 sigma^2 (L^T L / h^2 + rho G^T C G) on a.
  void build_preconditioners(double rho) {
    const Grid& g = *grid_;
    const double h = g.h();
    std::vector<long> idx(g.size(), -1);
    psi_nodes_.clear();
    for (std::size_t k = 0; k < g.size(); ++k)
      if (unknown_[k]) {
        idx[k] = static_cast<long>(psi_nodes_.size());
        psi_nodes_.push_back(k);
      }
    std::vector<Eigen::Triplet<Complex>> t;
    auto edge = [&](std::size_t a, std::size_t b, double c, double th) {
      if (c == 0.0) return;
      const Complex U = std::polar(1.0, -sigma_ * th);
      t.emplace_back(idx[a], idx[a], 2.0 * c);
      t.emplace_back(idx[b], idx[b], 2.0 * c);
      t.emplace_back(idx[a], idx[b], -2.0 * c * U);
      t.emplace_back(idx[b], idx[a], -2.0 * c * std::conj(U));
    };
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        const std::size_t k = g.index(i, j);
        if (i + 1 < nx_) edge(k, k + 1, cx_[k], thF_.x[k]);
        if (j + 1 < ny_) edge(k, k + nx_, cy_[k], thF_.y[k]);
      }
    const double k2 = kappa_ * kappa_;
    for (std::size_t q = 0; q < psi_nodes_.size(); ++q)
      t.emplace_back(static_cast<long>(q), static_cast<long>(q),
                     2.0 * k2 * std::max(w_[psi_nodes_[q]], 0.25 * h * h));
    const long n = static_cast<long>(psi_nodes_.size());
    Eigen::SparseMatrix<Complex> P(n, n);
    P.setFromTriplets(t.begin(), t.end());
    psi_pre_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<Complex>>>(P);
    if (psi_pre_->info() != Eigen::Success) throw Error("GL: psi preconditioner factorization failed");

    if (free_.empty()) return;
    const Eigen::SparseMatrix<double> L = lap_matrix();
    Eigen::SparseMatrix<double> M = Eigen::SparseMatrix<double>(L.transpose() * L) / (h * h);
    std::vector<Eigen::Triplet<double>> tk;
    auto kin = [&](long p, long q, double c) {
      // edge between plaquettes p and q (either may be absent, -1)
      if (c == 0.0) return;
      const double v = rho * c;
      if (p >= 0) tk.emplace_back(p, p, v);
      if (q >= 0) tk.emplace_back(q, q, v);
      if (p >= 0 && q >= 0) {
        tk.emplace_back(p, q, -v);
        tk.emplace_back(q, p, -v);
      }
    };
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        const std::size_t k = g.index(i, j);
        if (i + 1 < nx_) kin(j + 1 < ny_ ? plaq_[k] : -1, j > 0 ? plaq_[k - nx_] : -1, cx_[k]);
        if (j + 1 < ny_) kin(i + 1 < nx_ ? plaq_[k] : -1, i > 0 ? plaq_[k - 1] : -1, cy_[k]);
      }
    Eigen::SparseMatrix<double> Kc(L.rows(), L.cols());
    Kc.setFromTriplets(tk.begin(), tk.end());
    Eigen::SparseMatrix<double> Pa = 2.0 * sigma_ * sigma_ * (M + Kc);
    a_pre_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(Pa);
    if (a_pre_->info() != Eigen::Success) throw Error("GL: field preconditioner factorization failed");
  }

  std::size_t n_psi_vec() const { return 2 * grid_->size(); }

  BBProblem problem() const {
    BBProblem prob;
    const std::size_t N = grid_->size();
    const std::size_t P = free_.size();
    prob.objective = [this, N, P](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      const Complex* psi = reinterpret_cast<const Complex*>(x.data());
      const EdgeIntegrals t = edges_of(x.data() + 2 * N);
      EdgeIntegrals gt;
      const double e = energy(psi, t, reinterpret_cast<Complex*>(g.data()), &gt).total();
      if (P) reduce_to_a(gt, g.data() + 2 * N);
      return e;
    };
    prob.precondition = [this, N, P](const Eigen::VectorXd& g) {
      Eigen::VectorXd p = Eigen::VectorXd::Zero(g.size());
      Eigen::VectorXcd r(static_cast<long>(psi_nodes_.size()));
      for (std::size_t q = 0; q < psi_nodes_.size(); ++q)
        r[static_cast<long>(q)] = {g[2 * psi_nodes_[q]], g[2 * psi_nodes_[q] + 1]};
      const Eigen::VectorXcd z = psi_pre_->solve(r);
      for (std::size_t q = 0; q < psi_nodes_.size(); ++q) {
        p[2 * psi_nodes_[q]] = z[static_cast<long>(q)].real();
        p[2 * psi_nodes_[q] + 1] = z[static_cast<long>(q)].imag();
      }
      if (P) p.segment(2 * N, P) = a_pre_->solve(g.segment(2 * N, P));
      return p;
    };
    prob.measure = [this, N](const Eigen::VectorXd&, const Eigen::VectorXd& g, const Eigen::VectorXd&) {
      return residuals(reinterpret_cast<const Complex*>(g.data()), g.data() + 2 * N).max();
    };
    return prob;
  }

  /// Gauge-fix (psi, theta): theta - thF = grad-perp(a) + grad(chi) + (remainder on cut plaquettes).
  std::pair<ComplexField, std::vector<double>> project(const ComplexField& psi, const EdgeIntegrals& t) const {
    std::vector<double> a(free_.size(), 0.0);
    if (!free_.empty()) {
      Eigen::VectorXd c(static_cast<long>(free_.size()));
      for (std::size_t q = 0; q < free_.size(); ++q) c[static_cast<long>(q)] = circ(t, free_[q]);
      Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
      cg.setTolerance(1e-13);
      cg.setMaxIterations(20000);
      const Eigen::SparseMatrix<double> L = lap_matrix();  // cg keeps a reference
      cg.compute(L);
      const Eigen::VectorXd s = cg.solve(c);
      if (cg.info() != Eigen::Success) throw ConvergenceError("GL: gauge projection did not converge", cg.error(),
                                                              static_cast<int>(cg.iterations()));
      for (std::size_t q = 0; q < free_.size(); ++q) a[q] = s[static_cast<long>(q)];
    }
    const EdgeIntegrals fixed = edges_of(a.data());
    // rest = theta - fixed is curl free on the free plaquettes; integrate it along a spanning forest of Omega's edges.
    std::vector<double> chi(grid_->size(), 0.0);
    std::vector<char> seen(grid_->size(), 0);
    for (std::size_t root = 0; root < grid_->size(); ++root) {
      if (!unknown_[root] || seen[root]) continue;
      seen[root] = 1;
      std::deque<std::size_t> q{root};
      while (!q.empty()) {
        const std::size_t k = q.front();
        q.pop_front();
        const int i = static_cast<int>(k % nx_), j = static_cast<int>(k / nx_);
        auto visit = [&](bool ok, std::size_t nb, double c, double rest) {
          if (!ok || c == 0.0 || seen[nb]) return;
          seen[nb] = 1;
          chi[nb] = chi[k] + rest;
          q.push_back(nb);
        };
        if (i + 1 < nx_) visit(true, k + 1, cx_[k], t.x[k] - fixed.x[k]);
        if (i > 0) visit(true, k - 1, cx_[k - 1], -(t.x[k - 1] - fixed.x[k - 1]));
        if (j + 1 < ny_) visit(true, k + nx_, cy_[k], t.y[k] - fixed.y[k]);
        if (j > 0) visit(true, k - nx_, cy_[k - nx_], -(t.y[k - nx_] - fixed.y[k - nx_]));
      }
    }
    ComplexField out(grid_);
    for (std::size_t k = 0; k < grid_->size(); ++k)
      if (unknown_[k]) out[k] = psi[k] * std::polar(1.0, -sigma_ * chi[k]);
    return {out, a};
  }

  /// Phase e^{i sigma phi} moving a state adapted to b A0(x - c) into the gauge of F (path integral over a BFS tree).
  std::vector<double> phase_to_F(double b, Point c) const {
    const Grid& g = *grid_;
    const double h = g.h();
    std::vector<double> phi(g.size(), 0.0);
    std::vector<char> seen(g.size(), 0);
    auto thA = [&](std::size_t k, bool xdir) {
      const Point p = g.node(k);
      const Point q = xdir ? Point{p.x + h, p.y} : Point{p.x, p.y + h};
      const Vec2 a0 = canonical_potential(p - c), a1 = canonical_potential(q - c);
      return b * 0.5 * h * (xdir ? a0.x + a1.x : a0.y + a1.y);
    };
    for (std::size_t root = 0; root < g.size(); ++root) {
      if (!unknown_[root] || seen[root]) continue;
      seen[root] = 1;
      std::deque<std::size_t> q{root};
      while (!q.empty()) {
        const std::size_t k = q.front();
        q.pop_front();
        const int i = static_cast<int>(k % nx_), j = static_cast<int>(k / nx_);
        auto visit = [&](std::size_t nb, double c, double step) {
          if (c == 0.0 || seen[nb]) return;
          seen[nb] = 1;
          phi[nb] = phi[k] + step;
          q.push_back(nb);
        };
        if (i + 1 < nx_) visit(k + 1, cx_[k], thF_.x[k] - thA(k, true));
        if (i > 0) visit(k - 1, cx_[k - 1], -(thF_.x[k - 1] - thA(k - 1, true)));
        if (j + 1 < ny_) visit(k + nx_, cy_[k], thF_.y[k] - thA(k, false));
        if (j > 0) visit(k - nx_, cy_[k - nx_], -(thF_.y[k - nx_] - thA(k - nx_, false)));
      }
    }
    return phi;
  }

 private:
  GridPtr grid_;
  double kappa_, H_, sigma_;
  int nx_ = 0, ny_ = 0;
  EdgeIntegrals thF_;
  std::vector<double> w_, cx_, cy_;
  std::vector<char> unknown_, interior_;
  std::vector<long> plaq_;
  std::vector<std::size_t> free_;
  double area_ = 0.0;
  double tilde_area_ = 0.0;
  mutable std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> lap_;
  std::vector<std::size_t> psi_nodes_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<Complex>>> psi_pre_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> a_pre_;
};

void check_state(const GLState& s, const VectorField& F) {
  if (!s.psi.grid()) throw Error("GL: empty state");
  if (s.psi.g().nx() != F.g().nx() || s.psi.g().ny() != F.g().ny() || s.psi.g().h() != F.g().h())
    throw Error("GL: state and F grids differ");
  if (s.A.x.size() != s.psi.g().size() || s.A.y.size() != s.psi.g().size()) throw Error("GL: malformed potential");
}

}  // namespace

double ELResiduals::max() const { return std::max({psi, A, bc}); }

GLState normal_state(const VectorField& F, double kappa, double H) {
  GLState s;
  s.kappa = kappa;
  s.H = H;
  s.psi = ComplexField(F.grid());
  s.A = edge_integrals(F);
  return s;
}

GLState gauge_transform(const GLState& s, const ScalarField& chi) {
  GLState r = s;
  const Grid& g = s.psi.g();
  const double sigma = s.kappa * s.H;
  for (std::size_t k = 0; k < g.size(); ++k) r.psi[k] *= std::polar(1.0, sigma * chi[k]);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      if (i + 1 < g.nx()) r.A.x[k] += chi[k + 1] - chi[k];
      if (j + 1 < g.ny()) r.A.y[k] += chi[k + g.nx()] - chi[k];
    }
  return r;
}

VectorField potential_at_nodes(const GLState& s) {
  const Grid& g = s.psi.g();
  const double h = g.h();
  VectorField A(s.psi.grid());
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      double ax = 0.0, ay = 0.0;
      int cx = 0, cy = 0;
      if (i + 1 < g.nx()) ax += s.A.x[k], ++cx;
      if (i > 0) ax += s.A.x[k - 1], ++cx;
      if (j + 1 < g.ny()) ay += s.A.y[k], ++cy;
      if (j > 0) ay += s.A.y[k - g.nx()], ++cy;
      A.set(k, {cx ? ax / (cx * h) : 0.0, cy ? ay / (cy * h) : 0.0});
    }
  return A;
}

double gl_energy(const GLState& s, const VectorField& F) {
  check_state(s, F);
  const GLModel m(s.psi.grid(), s.kappa, s.H, F);
  return m.energy(s.psi.values().data(), s.A, nullptr, nullptr).total();
}

double gl_energy_no_field(const GLState& s, const VectorField& F) {
  check_state(s, F);
  const GLModel m(s.psi.grid(), s.kappa, s.H, F);
  return m.energy(s.psi.values().data(), s.A, nullptr, nullptr, false).total();
}

ELResiduals euler_lagrange_residual(const GLState& s, const VectorField& F) {
  check_state(s, F);
  const GLModel m(s.psi.grid(), s.kappa, s.H, F);
  return m.residuals_of(s.psi, s.A);
}

GLState project_gauge(const GLState& s, const VectorField& F) {
  check_state(s, F);
  const GLModel m(s.psi.grid(), s.kappa, s.H, F);
  auto [psi, a] = m.project(s.psi, s.A);
  GLState r = s;
  r.psi = psi;
  r.A = m.edges_of(a.data());
  return r;
}

GLDiagnostics gl_diagnostics(const GLState& s, const VectorField& F) {
  check_state(s, F);
  const GLModel m(s.psi.grid(), s.kappa, s.H, F);
  const Grid& g = s.psi.g();
  const double h = g.h();
  GLDiagnostics d;
  double l2 = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (m.unknown()[k]) {
      d.psi_linf = std::max(d.psi_linf, std::abs(s.psi[k]));
      l2 += m.w()[k] * std::norm(s.psi[k]);
    }
  const auto parts = m.energy(s.psi.values().data(), s.A, nullptr, nullptr);
  d.kinetic_norm = std::sqrt(parts.kinetic);
  d.kinetic_bound = s.kappa * std::sqrt(m.area());
  d.curl_norm = std::sqrt(parts.field) / (s.kappa * s.H);
  d.curl_bound = std::sqrt(l2) / s.H;
  const EdgeIntegrals& tF = m.thF();
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      double div = 0.0;
      if (i + 1 < g.nx()) div += s.A.x[k] - tF.x[k];
      if (i > 0) div -= s.A.x[k - 1] - tF.x[k - 1];
      if (j + 1 < g.ny()) div += s.A.y[k] - tF.y[k];
      if (j > 0) div -= s.A.y[k - g.nx()] - tF.y[k - g.nx()];
      d.div_max = std::max(d.div_max, std::abs(div) / (h * h));
    }
  return d;
}

GLResult minimize_gl(double kappa, double H, const ScalarField& B, const VectorField& F, const GLOptions& opt,
                     const GLState* start) {
  if (ess_inf(B).value <= 0.0) throw Error("minimize_gl: B must have a positive floor on Omega");
  GLModel m(B.grid(), kappa, H, F);
  const Grid& g = m.g();
  const std::size_t N = g.size();
  const std::size_t P = m.plaquettes();
  const double sigma = m.sigma();

  struct Seed {
    std::string name;
    Eigen::VectorXd x;
  };
  std::vector<Seed> seeds;
  for (const std::string& name : opt.seeds) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<long>(2 * N + P));
    if (name == "constant") {
      for (std::size_t k = 0; k < N; ++k)
        if (m.unknown()[k]) x[2 * k] = 1.0;
    } else if (name == "vortex") {
      double bw = 0.0, wsum = 0.0;
      for (std::size_t k = 0; k < N; ++k) {
        bw += m.w()[k] * B[k];
        wsum += m.w()[k];
      }
      const double b_mean = bw / wsum;
      const Point c = g.domain().bounding_box().center();
      const double s = std::sqrt(sigma * b_mean);
      const Box bb = g.domain().bounding_box();
      const double ext = s * std::hypot(bb.width(), bb.height());
      const std::vector<double> phi = m.phase_to_F(b_mean, c);
      for (std::size_t k = 0; k < N; ++k) {
        if (!m.unknown()[k]) continue;
        const Complex v = 0.5 * square_vortex_lattice(s * (g.node(k) - c), ext) * std::polar(1.0, sigma * phi[k]);
        x[2 * k] = v.real();
        x[2 * k + 1] = v.imag();
      }
    } else if (name == "given") {
      if (!start) continue;
      check_state(*start, F);
      if (start->kappa != kappa || start->H != H) throw Error("minimize_gl: start state has other kappa or H");
      auto [psi, a] = m.project(start->psi, start->A);
      for (std::size_t k = 0; k < N; ++k) {
        x[2 * k] = psi[k].real();
        x[2 * k + 1] = psi[k].imag();
      }
      for (std::size_t q = 0; q < P; ++q) x[static_cast<long>(2 * N + q)] = a[q];
    } else {
      throw Error("minimize_gl: unknown seed " + name);
    }
    seeds.push_back({name, std::move(x)});
  }
  if (start && std::find(opt.seeds.begin(), opt.seeds.end(), "given") == opt.seeds.end()) {
    GLOptions o = opt;
    o.seeds = {"given"};
    return minimize_gl(kappa, H, B, F, o, start);
  }
  if (seeds.empty()) throw Error("minimize_gl: no seed");

  m.build_preconditioners(0.5);
  BBProblem prob = m.problem();
  std::vector<double> trace;
  const auto inner = prob.objective;
  prob.objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& gr) {
    const double e = inner(x, gr);
    if (trace.size() < 100000) trace.push_back(e);
    return e;
  };
  BBOptions bo;
  bo.tol = opt.tol;
  bo.max_iter = opt.max_iter;

  GLResult best;
  bool have = false;
  int total_iter = 0;
  std::ostringstream fails;
  for (Seed& s : seeds) {
    trace.clear();
    const BBResult r = minimize_bb(prob, s.x, bo);
    total_iter += r.iterations;
    if (!r.converged) {
      fails << " [" << s.name << ": measure " << r.measure << " after " << r.iterations << " iterations; energy trace";
      const std::size_t stride = std::max<std::size_t>(1, trace.size() / 8);
      for (std::size_t i = 0; i < trace.size(); i += stride) fails << ' ' << trace[i];
      fails << ']';
      continue;
    }
    if (have && r.value >= best.energy) continue;
    best.energy = r.value;
    best.iterations = r.iterations;
    best.converged = true;
    best.seed = s.name;
    best.state.kappa = kappa;
    best.state.H = H;
    best.state.psi = ComplexField(B.grid());
    for (std::size_t k = 0; k < N; ++k) best.state.psi[k] = {s.x[2 * k], s.x[2 * k + 1]};
    best.state.A = m.edges_of(s.x.data() + 2 * N);
    have = true;
  }
  if (!have) throw ConvergenceError("minimize_gl: descent did not converge:" + fails.str(), NAN, total_iter);
  best.iterations = total_iter;
  best.residuals = m.residuals_of(best.state.psi, best.state.A);
  best.diagnostics = gl_diagnostics(best.state, F);
  return best;
}

// ---------------------------------------------------------------------------------------------------------------

EffectiveEnergy effective_energy(const ScalarField& B, double b, double ell, const GInterpolant& g, int jobs) {
  EffectiveEnergy e;
  e.b = b;
  e.ell = ell;
  e.lattice = build_lattice(B.g().domain(), ell);
  if (e.lattice.count() == 0) throw Error("effective energy: empty cell lattice");
  const std::size_t n = e.lattice.count();
  e.cell_values.assign(n, 0.0);
  e.cell_fields.assign(n, 0.0);
  parallel_for(n, jobs, [&](std::size_t i) {
    e.cell_fields[i] = cell_average(B, e.lattice.cell(i));
    e.cell_values[i] = g(b * e.cell_fields[i]);
  });
  double s = 0.0;
  for (double v : e.cell_values) s += v;
  e.total = ell * ell * s;
  return e;
}

JensenResult jensen_check(const ScalarField& B, double b, double ell, const GInterpolant& g, int jobs) {
  const EffectiveEnergy e = effective_energy(B, b, ell, g, jobs);
  JensenResult r;
  r.lhs = e.total;
  r.domain_area = e.lattice.domain_area;
  std::vector<double> part(e.lattice.count(), 0.0);
  parallel_for(e.lattice.count(), jobs, [&](std::size_t i) {
    double num = 0.0, den = 0.0;
    for (const auto& [k, w] : cell_quadrature(B.g(), e.lattice.cell(i))) {
      num += w * g(b * B[k]);
      den += w;
    }
    part[i] = ell * ell * num / den;
  });
  for (double v : part) r.rhs += v;
  if (r.lhs > 1e-12 || r.lhs < -0.5 * r.domain_area - 1e-12)
    throw Error("jensen check: effective energy outside [-|Omega|/2, 0]");
  return r;
}

ComplexField trial_state(const ScalarField& B, const VectorField& F, double kappa, double H, double ell, int jobs) {
  const Grid& g = B.g();
  const CellLattice lat = build_lattice(g.domain(), ell);
  if (lat.count() == 0) throw Error("trial state: empty cell lattice");
  const double sigma = kappa * H;
  const double b = H / kappa;
  const std::size_t n = lat.count();
  std::vector<double> bav(n);
  parallel_for(n, jobs, [&](std::size_t i) { bav[i] = cell_average(B, lat.cell(i)); });

  // One reduced problem per distinct (b_hat, R).
  std::map<std::pair<double, double>, std::size_t> key_of;
  std::vector<ReducedGLProblem> probs;
  std::vector<std::size_t> which(n);
  const int nodes = std::max(8, static_cast<int>(std::lround(ell / g.h())));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(bav[i] > 0.0)) throw Error("trial state: nonpositive cell average");
    const double bh = b * bav[i];
    const double R = ell * std::sqrt(sigma * bav[i]);
    auto [it, fresh] = key_of.try_emplace({bh, R}, probs.size());
    if (fresh) {
      ReducedGLProblem p;
      p.b = bh;
      p.R = R;
      p.boundary = Boundary::dirichlet;
      p.h = R / nodes;
      probs.push_back(p);
    }
    which[i] = it->second;
  }
  std::vector<ReducedMinimum> sols(probs.size());
  parallel_for(probs.size(), jobs, [&](std::size_t q) {
    try {
      sols[q] = minimize_reduced(probs[q], 1e-8);
    } catch (const Error& e) {
      for (std::size_t i = 0; i < n; ++i)
        if (which[i] == q) {
          std::ostringstream os;
          os << "trial state: reduced problem failed on cell (" << lat.sites[i].m << ", " << lat.sites[i].n
             << "): " << e.what();
          throw Error(os.str());
        }
      throw;
    }
  });

  ComplexField psi(B.grid());
  std::vector<ComplexField> parts(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const ReducedMinimum& u = sols[which[i]];
    if (max_abs(u.minimizer) == 0.0) return;
    const Cell cell = lat.cell(i);
    const VectorField a_new = recentered_potential(B, cell);
    // u vanishes on the cell boundary; staying half a step inside avoids F's corner singularity when a cell
    // shares a corner with the domain
    Box inner = cell.bounds();
    const double pad = 0.5 * g.h();
    inner = {inner.x_min + pad, inner.x_max - pad, inner.y_min + pad, inner.y_max - pad};
    const ScalarField phi = gauge_function(a_new, F, inner);
    const double s = std::sqrt(sigma * bav[i]);
    const double half = 0.5 * probs[which[i]].R;
    ComplexField part(B.grid());
    for (std::size_t k = 0; k < g.size(); ++k) {
      const Point x = g.node(k);
      if (!cell.contains(x)) continue;
      Point y = s * (x - cell.center);
      y.x = std::clamp(y.x, -half, half);
      y.y = std::clamp(y.y, -half, half);
      part[k] = u.minimizer(y) * std::polar(1.0, sigma * phi[k]);
    }
    parts[i] = std::move(part);
  });
  for (const ComplexField& p : parts)
    if (p.grid())
      for (std::size_t k = 0; k < g.size(); ++k)
        if (p[k] != Complex{}) psi[k] = p[k];
  return psi;
}

Thm13Record thm13_report(const ScalarField& B, double kappa, double b, double ell, const GInterpolant& g,
                         const GLOptions& opt, int jobs) {
  if (!(kappa > 0.0) || !(b > 0.0)) throw Error("thm13: kappa and b must be positive");
  const double ell0 = std::pow(kappa, -0.75);
  if (ell < 0.25 * ell0 || ell > 4.0 * ell0) throw Error("thm13: ell outside [kappa^(-3/4) / 4, 4 kappa^(-3/4)]");
  if (ess_inf(B).value <= 0.0) throw Error("thm13: B must have a positive floor");
  Thm13Record r;
  r.kappa = kappa;
  r.b = b;
  r.H = b * kappa;
  r.ell = ell;
  r.h = B.g().h();
  const VectorField F = build_reference_potential(B);
  r.minimizer = minimize_gl(kappa, r.H, B, F, opt);
  r.E_min = r.minimizer.energy;
  r.residuals = r.minimizer.residuals;
  r.psi_linf = r.minimizer.diagnostics.psi_linf;
  const EffectiveEnergy ea = effective_energy(B, b, ell, g, jobs);
  r.E_asy = ea.total;
  GLState trial = normal_state(F, kappa, r.H);
  trial.psi = trial_state(B, F, kappa, r.H, ell, jobs);
  r.E_trial = gl_energy(trial, F);
  r.gap = std::abs(r.E_min - kappa * kappa * r.E_asy);
  r.normalized_gap = r.gap / std::pow(kappa, 15.0 / 8);
  r.grad_B_sq = sq(norm_h1_seminorm(B));
  const double k2 = kappa * kappa;
  r.lower_envelope = r.E_min >= k2 * r.E_asy - (std::pow(kappa, 15.0 / 8) + std::pow(kappa, 1.5) * r.grad_B_sq);
  r.upper_envelope = r.E_trial <= k2 * r.E_asy + std::pow(kappa, 1.75) * ea.lattice.count() * ell * ell +
                                       std::pow(kappa, 1.5) * r.grad_B_sq;
  return r;
}

L4Check l4_identity_check(const GLState& s, const VectorField& F, double E_asy) {
  const GLModel m(s.psi.grid(), s.kappa, s.H, F);
  L4Check c;
  for (std::size_t k = 0; k < s.psi.g().size(); ++k)
    if (m.unknown()[k]) c.lhs += m.w()[k] * sq(std::norm(s.psi[k]));
  c.rhs = -2.0 * E_asy;
  const double g0 = m.energy(s.psi.values().data(), s.A, nullptr, nullptr, false).total();
  c.identity = std::abs(g0 + 0.5 * s.kappa * s.kappa * c.lhs);
  return c;
}

double cutoff_chi(double dist, double ell) {
  const double t = std::clamp((dist - ell) / ell, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

EigenViaGL eigen_upper_via_gl(const ScalarField& B, const VectorField& F, double sigma, double a,
                              const GLOptions& opt, double psi_floor) {
  if (!(a > 0.0 && a < 1.0)) throw Error("eigen via GL: a must lie in (0, 1)");
  if (!(sigma > 0.0)) throw Error("eigen via GL: sigma must be positive");
  const double m0 = ess_inf(B).value;
  if (!(m0 > 0.0)) throw Error("eigen via GL: m0(B) must be positive");
  EigenViaGL r;
  r.b = (1.0 - a) / m0;
  r.kappa = std::sqrt(sigma / r.b);
  r.H = r.b * r.kappa;
  r.ell = std::pow(sigma, -0.375);
  r.minimizer = minimize_gl(r.kappa, r.H, B, F, opt);
  const Grid& g = B.g();
  const ComplexField& psi = r.minimizer.state.psi;
  for (std::size_t k = 0; k < g.size(); ++k) r.psi_l2_sq += g.weight(k) * std::norm(psi[k]);
  if (r.psi_l2_sq < psi_floor * g.domain().area())
    throw Error("eigen via GL: minimizer is (near) the normal state; choose smaller b / larger a");
  ComplexField u(B.grid());
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.inside(k)) u[k] = cutoff_chi(g.domain().boundary_distance(g.node(k)), r.ell) * psi[k];
  const MagneticOperator op = assemble(B.grid(), sigma, F);
  if (op.mass(u) <= 0.0) throw Error("eigen via GL: cut-off state vanishes; domain too small for ell");
  r.quotient = op.rayleigh(u);
  r.ratio = r.quotient / sigma;
  return r;
}

double curl_div_ratio(const GLState& s, const VectorField& F) {
  const GLModel m(s.psi.grid(), s.kappa, s.H, F);
  const Grid& g = s.psi.g();
  const double h = g.h();
  const Grid tilde(g.domain().filled());
  const EdgeIntegrals& tF = m.thF();
  double l4 = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      if (tilde.weight(k) == 0.0) continue;
      double ax = 0.0, ay = 0.0;
      int cx = 0, cy = 0;
      if (i + 1 < g.nx()) ax += s.A.x[k] - tF.x[k], ++cx;
      if (i > 0) ax += s.A.x[k - 1] - tF.x[k - 1], ++cx;
      if (j + 1 < g.ny()) ay += s.A.y[k] - tF.y[k], ++cy;
      if (j > 0) ay += s.A.y[k - g.nx()] - tF.y[k - g.nx()], ++cy;
      const double vx = cx ? ax / (cx * h) : 0.0, vy = cy ? ay / (cy * h) : 0.0;
      l4 += tilde.weight(k) * sq(vx * vx + vy * vy);
    }
  const auto parts = m.energy(s.psi.values().data(), s.A, nullptr, nullptr);
  const double curl = std::sqrt(parts.field) / (s.kappa * s.H);
  const double num = std::pow(l4, 0.25);
  if (curl == 0.0) return num == 0.0 ? 0.0 : INFINITY;
  return num / curl;
}

}  // namespace maglab
