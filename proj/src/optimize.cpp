#include "maglab/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace maglab {

BBResult minimize_bb(const BBProblem& prob, Eigen::VectorXd& x, const BBOptions& opt) {
  Eigen::VectorXd g(x.size());
  double f = prob.objective(x, g);
  Eigen::VectorXd p = prob.precondition(g);
  std::deque<double> recent{f};
  double alpha = opt.alpha0;
  BBResult res;
  res.value = f;
  res.measure = prob.measure(x, g, p);
  Eigen::VectorXd xn(x.size()), gn(x.size());
  for (int it = 0; it < opt.max_iter; ++it) {
    if (res.measure <= opt.tol) {
      res.converged = true;
      break;
    }
    const double gp = g.dot(p);
    if (!(gp > 0.0)) break;
    const double ref = *std::max_element(recent.begin(), recent.end());
    double fn = 0.0;
    int back = 0;
    for (;; ++back) {
      xn = x - alpha * p;
      fn = prob.objective(xn, gn);
      if (std::isfinite(fn) && fn <= ref - opt.armijo * alpha * gp) break;
      if (back >= 60) {
        res.iterations = it;
        return res;
      }
      alpha *= 0.25;
    }
    const Eigen::VectorXd pn = prob.precondition(gn);
    // BB1 step in the preconditioner metric: <s, P^-1 s> / <s, y> with s = -alpha p.
    const double sy = -alpha * p.dot(gn - g);
    const double ss = alpha * alpha * gp;
    alpha = sy > 0.0 ? std::clamp(ss / sy, opt.alpha_min, opt.alpha_max) : std::min(2.0 * alpha, opt.alpha_max);
    x.swap(xn);
    g.swap(gn);
    p = pn;
    f = fn;
    recent.push_back(f);
    if (static_cast<int>(recent.size()) > opt.memory) recent.pop_front();
    res.value = f;
    res.measure = prob.measure(x, g, p);
    res.iterations = it + 1;
  }
  if (res.measure <= opt.tol) res.converged = true;
  return res;
}

}  // namespace maglab
