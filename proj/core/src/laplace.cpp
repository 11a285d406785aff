#include "nfpose/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfpose {

double fd_step(double x, double rel) { return rel * std::max(1.0, std::abs(x)); }

Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double rel) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step(x(i), rel);
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd central_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x, double rel) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd y = x;
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = fd_step(x(i), rel);
    y(i) = x(i) + hi;
    const double fp = f(y);
    y(i) = x(i) - hi;
    const double fm = f(y);
    y(i) = x(i);
    h(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = fd_step(x(j), rel);
      double s = 0.0;
      for (int a : {1, -1}) {
        for (int b : {1, -1}) {
          y(i) = x(i) + a * hi;
          y(j) = x(j) + b * hj;
          s += a * b * f(y);
        }
      }
      y(i) = x(i);
      y(j) = x(j);
      h(i, j) = h(j, i) = s / (4.0 * hi * hj);
    }
  }
  return h;
}

Eigen::MatrixXd jacobian_of_gradient(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                                     const Eigen::VectorXd& x, double rel) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = fd_step(x(i), rel);
    y(i) = x(i) + hi;
    const Eigen::VectorXd gp = g(y);
    y(i) = x(i) - hi;
    const Eigen::VectorXd gm = g(y);
    y(i) = x(i);
    h.col(i) = (gp - gm) / (2.0 * hi);
  }
  return 0.5 * (h + h.transpose());
}

bool regularize_negative_definite(Eigen::MatrixXd& h, double cap) {
  h = 0.5 * (h + h.transpose()).eval();
  if (!h.allFinite()) {
    h = cap * Eigen::MatrixXd::Identity(h.rows(), h.cols());
    return true;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  Eigen::VectorXd ev = es.eigenvalues();
  bool moved = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cap) {
      ev(i) = cap;
      moved = true;
    }
  }
  if (moved) h = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return moved;
}

namespace {

// Capped eigendecomposition of the Hessian; solves and inverts in the eigenbasis
// so that a near-flat direction does not spoil the well-conditioned ones.
struct Curvature {
  Eigen::MatrixXd vecs;
  Eigen::VectorXd inv;   // 1 / (-eigenvalue), all positive
  Eigen::VectorXd step;  // like inv, but |eigenvalue| floored relative to the stiffest direction
  bool moved = false;

  Curvature(Eigen::MatrixXd h, double cap, double max_condition) {
    h = 0.5 * (h + h.transpose()).eval();
    if (!h.allFinite()) {
      vecs = Eigen::MatrixXd::Identity(h.rows(), h.cols());
      inv = Eigen::VectorXd::Constant(h.rows(), -1.0 / cap);
      step = inv;
      moved = true;
      return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    vecs = es.eigenvectors();
    Eigen::VectorXd ev = es.eigenvalues();
    const double stiff = ev.cwiseAbs().maxCoeff();
    const double floor = std::max(-cap, 1e-8 * stiff);
    step = ev.cwiseAbs().cwiseMax(floor).cwiseInverse();
    cap = std::min(cap, -stiff / max_condition);
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > cap) {
        ev(i) = cap;
        moved = true;
      }
    }
    inv = (-ev).cwiseInverse();
  }

  Eigen::VectorXd direction(const Eigen::VectorXd& g) const { return vecs * step.asDiagonal() * (vecs.transpose() * g); }
  Eigen::VectorXd solve(const Eigen::VectorXd& g) const { return vecs * inv.asDiagonal() * (vecs.transpose() * g); }
  Eigen::MatrixXd covariance() const {
    Eigen::MatrixXd c = vecs * inv.asDiagonal() * vecs.transpose();
    return 0.5 * (c + c.transpose());
  }
};

struct Derivs {
  const SmoothObjective& obj;
  const LaplaceOptions& opts;

  Eigen::VectorXd grad(const Eigen::VectorXd& x) const {
    return obj.gradient ? obj.gradient(x) : central_gradient(obj.value, x, opts.fd_rel_step);
  }
  Eigen::MatrixXd hess(const Eigen::VectorXd& x) const {
    if (obj.hessian) return obj.hessian(x);
    if (obj.gradient) return jacobian_of_gradient(obj.gradient, x, opts.fd_rel_step);
    return central_hessian(obj.value, x, 1e-4);
  }
};

}  // namespace

LaplaceResult laplace_fit(const SmoothObjective& objective, const Eigen::VectorXd& init,
                          const LaplaceOptions& opts) {
  if (!objective.value) throw std::invalid_argument("laplace_fit needs an objective");
  const Derivs dv{objective, opts};
  LaplaceResult res;
  Eigen::VectorXd x = init;
  double f = objective.value(x);
  if (!std::isfinite(f)) throw std::domain_error("objective is not finite at the initial point");

  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd g = dv.grad(x);
    if (!g.allFinite()) break;
    if (g.norm() < opts.grad_tol) {
      res.converged = true;
      break;
    }
    const Curvature cv(dv.hess(x), opts.eig_cap, opts.max_condition);
    Eigen::VectorXd d = cv.direction(g);
    double slope = g.dot(d);
    if (!d.allFinite() || !(slope > 0.0)) {
      d = g;
      slope = g.squaredNorm();
    }
    bool accepted = false;
    Eigen::VectorXd xn;
    double fn = f;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = opts.initial_step;
      for (int b = 0; b < opts.max_backtracks; ++b) {
        xn = x + step * d;
        fn = objective.value(xn);
        if (std::isfinite(fn) && fn >= f + opts.armijo * step * slope && fn >= f) {
          accepted = true;
          break;
        }
        step *= opts.backtrack;
      }
      if (!accepted) {
        // Newton direction failed; fall back to steepest ascent scaled to the Newton length.
        const double len = d.norm();
        d = g * (len / g.norm());
        slope = g.dot(d);
      }
    }
    if (!accepted) {
      // Remaining ascent below floating-point resolution of the objective.
      const double dec = 0.5 * g.dot(cv.direction(g));
      res.converged = !(dec > 1e-9 * (1.0 + std::abs(f)));
      break;
    }
    const double moved = (xn - x).norm();
    x = xn;
    f = fn;
    ++res.iterations;
    if (moved <= 1e-15 * (1.0 + x.norm())) {
      res.converged = true;
      break;
    }
  }

  const Curvature cv(dv.hess(x), opts.eig_cap, opts.max_condition);
  res.regularized = cv.moved;
  res.belief.mean = x;
  res.belief.cov = cv.covariance();
  res.value = f;
  return res;
}

}  // namespace nfpose
