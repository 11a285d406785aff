#pragma once

#include <functional>

#include <Eigen/Dense>

#include "nfpose/circular.hpp"

namespace nfpose {

// Log-density with optional analytic derivatives. Missing derivatives are
// replaced by central differences.
struct SmoothObjective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
};

struct LaplaceOptions {
  double initial_step = 1.0;
  double backtrack = 0.5;
  double armijo = 1e-4;
  double grad_tol = 1e-8;
  int max_iterations = 200;
  int max_backtracks = 60;
  double eig_cap = -1e-9;   // Hessian eigenvalues forced <= this
  double max_condition = 1e12;  // and <= -(largest |eigenvalue|) / max_condition
  double fd_rel_step = 1e-6;
};

struct LaplaceResult {
  GaussianBelief belief;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  bool regularized = false;
};

double fd_step(double x, double rel);
Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double rel = 1e-6);
Eigen::MatrixXd central_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x, double rel = 1e-4);
Eigen::MatrixXd jacobian_of_gradient(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                                     const Eigen::VectorXd& x, double rel = 1e-6);

// Symmetrizes h and caps its eigenvalues at cap (< 0). Returns true when any
// eigenvalue was moved.
bool regularize_negative_definite(Eigen::MatrixXd& h, double cap);

// Damped Newton ascent with Armijo backtracking, then covariance -H^{-1}.
LaplaceResult laplace_fit(const SmoothObjective& objective, const Eigen::VectorXd& init,
                          const LaplaceOptions& opts = {});

}  // namespace nfpose
