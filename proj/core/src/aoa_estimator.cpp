#include "nfpose/aoa_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nfpose/channel.hpp"

namespace nfpose {

namespace {

struct Projections {
  cd s, sx, sy, sxx, syy, sxy;
};

Eigen::VectorXcd phase_vector(int n, double phi) {
  Eigen::VectorXcd u(n);
  for (int i = 0; i < n; ++i) u(i) = std::polar(1.0, -kPi * (i + 1) * phi);
  return u;
}

Projections project(const Eigen::MatrixXcd& r, const Vec2& phi, bool second) {
  const int nx = static_cast<int>(r.rows()), ny = static_cast<int>(r.cols());
  const Eigen::VectorXcd ux = phase_vector(nx, phi.x());
  const Eigen::VectorXcd uy = phase_vector(ny, phi.y());
  Eigen::VectorXcd kx(nx), ky(ny);
  for (int i = 0; i < nx; ++i) kx(i) = cd(0.0, -kPi * (i + 1));
  for (int j = 0; j < ny; ++j) ky(j) = cd(0.0, -kPi * (j + 1));
  const Eigen::VectorXcd dux = kx.cwiseProduct(ux);
  const Eigen::VectorXcd duy = ky.cwiseProduct(uy);
  const Eigen::VectorXcd ruy = r * uy;
  const Eigen::VectorXcd rduy = r * duy;
  Projections p;
  p.s = ux.transpose() * ruy;
  p.sx = dux.transpose() * ruy;
  p.sy = ux.transpose() * rduy;
  if (second) {
    p.sxx = kx.cwiseProduct(dux).transpose() * ruy;
    p.syy = ux.transpose() * (r * ky.cwiseProduct(duy));
    p.sxy = dux.transpose() * rduy;
  }
  return p;
}

double wrap_cosine(double phi) { return phi - 2.0 * std::floor((phi + 1.0) / 2.0); }

double prior_term(const VonMises& v, double phi) {
  const double s = std::sin(0.5 * (kPi * phi - v.mean()));
  return -2.0 * v.kappa() * s * s;
}

}  // namespace

double SourceObjective::value(const Vec2& phi) const {
  const Projections p = project(*residual, phi, false);
  return weight * std::norm(p.s) + prior_term(prior.x, phi.x()) + prior_term(prior.y, phi.y());
}

Vec2 SourceObjective::gradient(const Vec2& phi) const {
  const Projections p = project(*residual, phi, false);
  const double gx = 2.0 * weight * std::real(std::conj(p.s) * p.sx) -
                    prior.x.kappa() * kPi * std::sin(kPi * phi.x() - prior.x.mean());
  const double gy = 2.0 * weight * std::real(std::conj(p.s) * p.sy) -
                    prior.y.kappa() * kPi * std::sin(kPi * phi.y() - prior.y.mean());
  return {gx, gy};
}

Eigen::Matrix2d SourceObjective::hessian(const Vec2& phi) const {
  const Projections p = project(*residual, phi, true);
  Eigen::Matrix2d h;
  h(0, 0) = 2.0 * weight * (std::norm(p.sx) + std::real(std::conj(p.s) * p.sxx)) -
            prior.x.kappa() * kPi * kPi * std::cos(kPi * phi.x() - prior.x.mean());
  h(1, 1) = 2.0 * weight * (std::norm(p.sy) + std::real(std::conj(p.s) * p.syy)) -
            prior.y.kappa() * kPi * kPi * std::cos(kPi * phi.y() - prior.y.mean());
  h(0, 1) = h(1, 0) = 2.0 * weight * std::real(std::conj(p.sx) * p.sy + std::conj(p.s) * p.sxy);
  return h;
}

AoaEstimate estimate_aoa_posteriors(const SubarraySnapshot& snapshot, std::span<const VmPair> priors,
                                    double coef_prior_var, const AoaEstimatorOptions& opts) {
  const Eigen::MatrixXcd& y = snapshot.samples;
  const int nx = static_cast<int>(y.rows()), ny = static_cast<int>(y.cols());
  const int K = static_cast<int>(priors.size());
  if (K < 1) throw std::invalid_argument("at least one source is required");
  if (nx < 1 || ny < 1) throw std::invalid_argument("empty snapshot");
  if (!(coef_prior_var > 0.0)) throw std::invalid_argument("coefficient prior variance must be positive");
  const double n = static_cast<double>(nx) * ny;
  double noise = snapshot.noise_var;
  if (!(noise > 0.0)) noise = std::max(opts.noise_floor_rel * y.squaredNorm() / n, 1e-300);
  const double weight = coef_prior_var / (noise * (noise + n * coef_prior_var));
  const double shrink = coef_prior_var / (noise + n * coef_prior_var);

  // Strongest prior first; ties by prior means, then by index.
  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const VmPair& pa = priors[static_cast<std::size_t>(a)];
    const VmPair& pb = priors[static_cast<std::size_t>(b)];
    const double ka = pa.x.kappa() + pa.y.kappa(), kb = pb.x.kappa() + pb.y.kappa();
    if (ka != kb) return ka > kb;
    if (pa.x.mean() != pb.x.mean()) return pa.x.mean() < pb.x.mean();
    return pa.y.mean() < pb.y.mean();
  });

  std::vector<Vec2> phi(static_cast<std::size_t>(K), Vec2::Zero());
  std::vector<cd> coef(static_cast<std::size_t>(K), cd(0.0));
  std::vector<Eigen::MatrixXcd> atoms(static_cast<std::size_t>(K), Eigen::MatrixXcd::Zero(nx, ny));

  auto residual_without = [&](int k, const std::vector<bool>& active) {
    Eigen::MatrixXcd r = y;
    for (int j = 0; j < K; ++j) {
      if (j != k && active[static_cast<std::size_t>(j)]) r -= coef[static_cast<std::size_t>(j)] * atoms[static_cast<std::size_t>(j)];
    }
    return r;
  };
  auto joint_objective = [&]() {
    Eigen::MatrixXcd r = y;
    double f = 0.0;
    for (int k = 0; k < K; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      r -= coef[ku] * atoms[ku];
      f -= std::norm(coef[ku]) / coef_prior_var;
      f += prior_term(priors[ku].x, phi[ku].x()) + prior_term(priors[ku].y, phi[ku].y());
    }
    return f - r.squaredNorm() / noise;
  };
  auto refine = [&](int k, const Eigen::MatrixXcd& r, const Vec2& start) {
    SourceObjective so{&r, priors[static_cast<std::size_t>(k)], weight};
    SmoothObjective obj;
    obj.value = [&](const Eigen::VectorXd& v) { return so.value(Vec2(v(0), v(1))); };
    obj.gradient = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return so.gradient(Vec2(v(0), v(1))); };
    obj.hessian = [&](const Eigen::VectorXd& v) -> Eigen::MatrixXd { return so.hessian(Vec2(v(0), v(1))); };
    const LaplaceResult lr = laplace_fit(obj, Eigen::Vector2d(start), opts.ascent);
    return Vec2(wrap_cosine(lr.belief.mean(0)), wrap_cosine(lr.belief.mean(1)));
  };
  auto set_source = [&](int k, const Eigen::MatrixXcd& r, const Vec2& p) {
    const auto ku = static_cast<std::size_t>(k);
    phi[ku] = p;
    atoms[ku] = steering_matrix(nx, ny, p);
    coef[ku] = shrink * (atoms[ku].conjugate().cwiseProduct(r)).sum();
  };

  // Periodogram initialization on a (oversampling * n)-point grid per axis.
  const int gx = opts.grid_oversampling * nx, gy = opts.grid_oversampling * ny;
  Eigen::MatrixXcd ux(gx, nx), uy(ny, gy);
  for (int a = 0; a < gx; ++a) {
    for (int i = 0; i < nx; ++i) ux(a, i) = std::polar(1.0, -kPi * (i + 1) * (-1.0 + 2.0 * a / gx));
  }
  for (int b = 0; b < gy; ++b) {
    for (int j = 0; j < ny; ++j) uy(j, b) = std::polar(1.0, -kPi * (j + 1) * (-1.0 + 2.0 * b / gy));
  }
  std::vector<bool> active(static_cast<std::size_t>(K), false);
  for (int k : order) {
    const auto ku = static_cast<std::size_t>(k);
    const Eigen::MatrixXcd r = residual_without(k, active);
    const Eigen::MatrixXcd s = ux * r * uy;
    double best = -std::numeric_limits<double>::infinity();
    Vec2 arg = Vec2::Zero();
    for (int a = 0; a < gx; ++a) {
      const double px = -1.0 + 2.0 * a / gx;
      const double lx = prior_term(priors[ku].x, px);
      for (int b = 0; b < gy; ++b) {
        const double py = -1.0 + 2.0 * b / gy;
        const double v = weight * std::norm(s(a, b)) + lx + prior_term(priors[ku].y, py);
        if (v > best) {
          best = v;
          arg = {px, py};
        }
      }
    }
    set_source(k, r, refine(k, r, arg));
    active[ku] = true;
  }

  AoaEstimate est;
  est.objective_trace.push_back(joint_objective());
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double moved = 0.0;
    for (int k : order) {
      const auto ku = static_cast<std::size_t>(k);
      const Eigen::MatrixXcd r = residual_without(k, active);
      const Vec2 p = refine(k, r, phi[ku]);
      Vec2 d = p - phi[ku];
      for (int a = 0; a < 2; ++a) d(a) = std::abs(wrap_cosine(d(a)));
      moved = std::max(moved, d.maxCoeff());
      set_source(k, r, p);
    }
    ++est.sweeps;
    est.objective_trace.push_back(joint_objective());
    if (moved < opts.move_tol) {
      est.converged = true;
      break;
    }
  }

  est.sources.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Eigen::MatrixXcd r = residual_without(k, active);
    const SourceObjective so{&r, priors[ku], weight};
    const Eigen::Matrix2d h = so.hessian(phi[ku]);
    AoaSourcePosterior& out = est.sources[ku];
    out.cosines = phi[ku];
    double kap[2];
    const VonMises* pri[2] = {&priors[ku].x, &priors[ku].y};
    for (int a = 0; a < 2; ++a) {
      kap[a] = -h(a, a) / (kPi * kPi);
      if (!(kap[a] > 0.0) || !std::isfinite(kap[a])) {
        kap[a] = pri[a]->kappa();
        out.curvature_fallback = true;
      }
    }
    out.aoa = {VonMises(kPi * phi[ku].x(), kap[0]), VonMises(kPi * phi[ku].y(), kap[1])};
    out.coef_mean = coef[ku];
    out.coef_var = coef_prior_var * noise / (noise + n * coef_prior_var);
  }
  return est;
}

std::vector<VmPair> extrinsic_from_posterior(std::span<const AoaSourcePosterior> post,
                                             std::span<const VmPair> priors) {
  if (post.size() != priors.size()) throw std::invalid_argument("posterior/prior length mismatch");
  std::vector<VmPair> out(post.size());
  for (std::size_t k = 0; k < post.size(); ++k) {
    out[k] = {vm_extrinsic(post[k].aoa.x, priors[k].x), vm_extrinsic(post[k].aoa.y, priors[k].y)};
  }
  return out;
}

}  // namespace nfpose
