#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace shmm::opt {

// f(x, grad) returns the value to minimize and writes the gradient. Points
// outside the feasible region return +infinity (gradient ignored); the line
// search backs off from them.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct Options {
  int max_evals = 200;
  double grad_tol = 1e-9;   // on max |g_i|, relative to max(1, |f|)
  double value_tol = 1e-14; // on the relative decrease between iterations
};

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;
  int evals = 0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

// Quasi-Newton (BFGS, inverse-Hessian form) with an Armijo backtracking line
// search. The starting point must be feasible.
Result minimize_bfgs(const Objective& f, Eigen::VectorXd x0,
                     const Options& options = {});

}  // namespace shmm::opt
