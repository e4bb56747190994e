#pragma once

#include <functional>

#include <Eigen/Dense>

namespace maglab {

struct BBOptions {
  double tol = 1e-6;
  int max_iter = 20000;
  int memory = 10;         ///< nonmonotone window
  double armijo = 1e-4;
  double alpha0 = 1.0;
  double alpha_min = 1e-10;
  double alpha_max = 1e10;
};

struct BBResult {
  double value = 0.0;
  double measure = 0.0;  ///< stopping measure at exit
  int iterations = 0;
  bool converged = false;
};

/// Smooth objective with gradient, a preconditioner p = P g (P symmetric positive definite) and a stopping
/// measure computed from (x, g, p).
struct BBProblem {
  std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& grad)> precondition;
  std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& grad, const Eigen::VectorXd& p)> measure;
};

/// Preconditioned Barzilai-Borwein descent with the Grippo-Lampariello-Lucidi nonmonotone line search.
/// `x` holds the start on entry and the last iterate on exit.
BBResult minimize_bb(const BBProblem& prob, Eigen::VectorXd& x, const BBOptions& opt = {});

}  // namespace maglab
