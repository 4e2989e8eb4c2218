#include "shmm/optimize.hpp"

#include <cmath>
#include <limits>

namespace shmm::opt {

Result minimize_bfgs(const Objective& f, Eigen::VectorXd x0,
                     const Options& options) {
  const Eigen::Index n = x0.size();
  Result res;
  res.x = std::move(x0);
  Eigen::VectorXd g(n);
  res.value = f(res.x, g);
  res.evals = 1;
  if (!std::isfinite(res.value)) {
    res.message = "infeasible starting point";
    return res;
  }
  if (n == 0) {
    res.converged = true;
    return res;
  }

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x_new(n), g_new(n);
  bool first = true;

  while (res.evals < options.max_evals) {
    const double scale = std::max(1.0, std::abs(res.value));
    if (g.cwiseAbs().maxCoeff() <= options.grad_tol * scale) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      return res;
    }
    Eigen::VectorXd dir = -H * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      H.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    if (first) {
      // Keep the first trial step to unit length in the max norm.
      const double len = dir.cwiseAbs().maxCoeff();
      if (len > 1.0) step = 1.0 / len;
    }

    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60 && res.evals < options.max_evals; ++ls) {
      x_new = res.x + step * dir;
      f_new = f(x_new, g_new);
      ++res.evals;
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = g.cwiseAbs().maxCoeff() <= 1e-6 * scale;
      res.message = "line search made no progress";
      return res;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double decrease = res.value - f_new;
    res.x = x_new;
    g = g_new;
    res.value = f_new;
    ++res.iterations;

    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (first) H *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    first = false;

    if (decrease <= options.value_tol * std::max(1.0, std::abs(res.value))) {
      res.converged = true;
      res.message = "relative decrease below tolerance";
      return res;
    }
  }
  res.message = "evaluation budget exhausted";
  return res;
}

}  // namespace shmm::opt
