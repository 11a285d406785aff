#include "nfpose/mcrb.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <unsupported/Eigen/LevenbergMarquardt>

#include "nfpose/laplace.hpp"

namespace nfpose {

ParamVector::ParamVector(int k, int m, int t) : K(k), M(m), T(t), values(Eigen::VectorXd::Zero(6 * k + 2 * m * k * t)) {
  if (k < 0 || m < 0 || t < 0) throw std::invalid_argument("negative parameter dimensions");
}

cd ParamVector::rho(int m, int k, int t) const {
  const int i = rho_index(m, k, t);
  return {values(i), values(i + 1)};
}

namespace {

Eigen::VectorXd pose_vector(const ScenarioConfig& s) {
  const int K = s.num_ms();
  Eigen::VectorXd x(6 * K);
  for (int k = 0; k < K; ++k) {
    const Pose& p = s.poses[static_cast<std::size_t>(k)];
    x.segment<3>(3 * k) = p.position;
    x.segment<3>(3 * K + 3 * k) = Vec3(p.attitude.roll(), p.attitude.pitch(), p.attitude.yaw());
  }
  return x;
}

Vec3 antenna_at(const Eigen::VectorXd& pose, int K, int k, const Vec2& local) {
  const Vec3 p = pose.segment<3>(3 * k);
  const Vec3 th = pose.segment<3>(3 * K + 3 * k);
  return p + rotation_basis(th) * local;
}

std::vector<Vec2> slot_locals(const ScenarioConfig& s) {
  std::vector<Vec2> q;
  for (const GridIndex& g : s.pattern.slots()) q.push_back(ms_local_antenna_position(s.ms, g.u, g.v, s.wavelength()));
  return q;
}

// vec of the nx x ny steering matrix, i fastest.
Eigen::VectorXcd steering_vec(const SubarrayDescriptor& d, const Vec3& antenna) {
  const Eigen::MatrixXcd u = steering_matrix(d.nx, d.ny, aoa_cosines(antenna, d.ref_position));
  return Eigen::Map<const Eigen::VectorXcd>(u.data(), u.size());
}

Eigen::VectorXcd block_vec(const Eigen::MatrixXcd& samples, const PartitionPlan& plan,
                           const SubarrayDescriptor& d, int t) {
  const Eigen::MatrixXcd b = subarray_block(samples, plan, d, t);
  return Eigen::Map<const Eigen::VectorXcd>(b.data(), b.size());
}

// Exact noiseless mean for an arbitrary pose vector.
Eigen::MatrixXcd exact_mean(const ScenarioConfig& s, const Eigen::VectorXd& pose) {
  const double lambda = s.wavelength();
  const double x = std::sqrt(s.tx_power_w);
  const int K = s.num_ms(), T = s.num_slots();
  const std::vector<Vec2> q = slot_locals(s);
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(s.bs.size(), T);
  for (int v = 1; v <= s.bs.ny; ++v) {
    for (int u = 1; u <= s.bs.nx; ++u) {
      const Vec3 b = bs_antenna_position(s.bs, u, v, lambda);
      const int r = (u - 1) + (v - 1) * s.bs.nx;
      for (int t = 0; t < T; ++t) {
        for (int k = 0; k < K; ++k) {
          y(r, t) += x * nearfield_channel_coeff(b, antenna_at(pose, K, k, q[static_cast<std::size_t>(t)]), s.gain(k), lambda);
        }
      }
    }
  }
  return y;
}

struct VarPro : Eigen::DenseFunctor<double> {
  const ScenarioConfig* s;
  const PartitionPlan* plan;
  const Eigen::MatrixXcd* target;
  double scale;
  double step;
  mutable int evaluations = 0;

  VarPro(const ScenarioConfig& sc, const PartitionPlan& pl, const Eigen::MatrixXcd& tg, double st)
      : DenseFunctor<double>(6 * sc.num_ms(), 2 * static_cast<int>(tg.size())), s(&sc), plan(&pl),
        target(&tg), scale(1.0 / std::max(tg.norm(), 1e-300)), step(st) {}

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    ++evaluations;
    f = scale * projected_residual(*s, *plan, *target, x).stacked;
    return 0;
  }
  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    j.resize(values(), inputs());
    Eigen::VectorXd xp = x, fp, fm;
    for (int i = 0; i < inputs(); ++i) {
      const double h = fd_step(x(i), step);
      xp(i) = x(i) + h;
      (*this)(xp, fp);
      xp(i) = x(i) - h;
      (*this)(xp, fm);
      xp(i) = x(i);
      j.col(i) = (fp - fm) / (2.0 * h);
    }
    return 0;
  }
};

ParamVector assemble(const ScenarioConfig& s, const PartitionPlan& plan, const Eigen::VectorXd& pose,
                     const std::vector<cd>& rho) {
  const int K = s.num_ms(), M = plan.size(), T = s.num_slots();
  ParamVector p(K, M, T);
  p.values.head(6 * K) = pose;
  for (int t = 0; t < T; ++t) {
    for (int m = 0; m < M; ++m) {
      for (int k = 0; k < K; ++k) {
        const cd r = rho[static_cast<std::size_t>((t * M + m) * K + k)];
        p.values(p.rho_index(m, k, t)) = r.real();
        p.values(p.rho_index(m, k, t) + 1) = r.imag();
      }
    }
  }
  return p;
}

}  // namespace

ParamVector truth_parameters(const ScenarioConfig& scenario, const PartitionPlan& plan) {
  const SwffCoefficients c = swff_coefficients(scenario, plan);
  std::vector<cd> rho;
  for (int t = 0; t < c.T(); ++t) {
    for (int m = 0; m < c.M(); ++m) {
      for (int k = 0; k < c.K(); ++k) rho.push_back(c.at(m, k, t).gain);
    }
  }
  return assemble(scenario, plan, pose_vector(scenario), rho);
}

ProjectedResidual projected_residual(const ScenarioConfig& scenario, const PartitionPlan& plan,
                                     const Eigen::MatrixXcd& target, const Eigen::VectorXd& pose) {
  const int K = scenario.num_ms(), M = plan.size(), T = scenario.num_slots();
  const std::vector<Vec2> q = slot_locals(scenario);
  ProjectedResidual out;
  out.rho.resize(static_cast<std::size_t>(M * K * T));
  const Eigen::Index n = target.size();
  out.stacked.resize(2 * n);
  Eigen::Index offset = 0;
  for (int t = 0; t < T; ++t) {
    for (int m = 0; m < M; ++m) {
      const SubarrayDescriptor& d = plan.subarrays()[static_cast<std::size_t>(m)];
      const Eigen::VectorXcd y = block_vec(target, plan, d, t);
      Eigen::MatrixXcd a(y.size(), K);
      for (int k = 0; k < K; ++k) a.col(k) = steering_vec(d, antenna_at(pose, K, k, q[static_cast<std::size_t>(t)]));
      const Eigen::VectorXcd c = a.colPivHouseholderQr().solve(y);
      const Eigen::VectorXcd r = y - a * c;
      for (int k = 0; k < K; ++k) out.rho[static_cast<std::size_t>((t * M + m) * K + k)] = c(k);
      out.stacked.segment(offset, r.size()) = r.real();
      out.stacked.segment(n + offset, r.size()) = r.imag();
      offset += r.size();
      out.squared_norm += r.squaredNorm();
    }
  }
  return out;
}

PseudotrueFit pseudotrue_fit(const ScenarioConfig& scenario, const PartitionPlan& plan,
                             const McrbConfig& cfg) {
  const Eigen::MatrixXcd target = noiseless_received(scenario);
  Eigen::VectorXd x = pose_vector(scenario);
  PseudotrueFit fit;
  fit.truth_residual = projected_residual(scenario, plan, target, x).squared_norm;

  VarPro fn(scenario, plan, target, cfg.fd_rel_step);
  auto run_lm = [&](Eigen::VectorXd& v) {
    Eigen::LevenbergMarquardt<VarPro> lm(fn);
    lm.setMaxfev(cfg.lm_max_evaluations);
    lm.setXtol(cfg.lm_tol);
    lm.setFtol(cfg.lm_tol);
    lm.setGtol(0.0);
    const auto status = lm.minimize(v);
    return status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
           status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters;
  };
  fit.converged = run_lm(x);
  double best = projected_residual(scenario, plan, target, x).squared_norm;
  if (best > fit.truth_residual) {
    x = pose_vector(scenario);
    best = fit.truth_residual;
    fit.converged = false;
  }

  if (cfg.grid_fallback && !fit.converged) {
    // Per-coordinate grid around the current point, then one more local search.
    const int g = std::max(cfg.grid_points, 1);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const bool position = i < 3 * scenario.num_ms();
      const double span = position ? cfg.grid_span_position : cfg.grid_span_attitude;
      const double centre = x(i);
      for (int a = 0; a < g; ++a) {
        Eigen::VectorXd y = x;
        y(i) = centre + (g == 1 ? 0.0 : span * (2.0 * a / (g - 1) - 1.0));
        const double r = projected_residual(scenario, plan, target, y).squared_norm;
        if (r < best) {
          best = r;
          x = y;
        }
      }
    }
    Eigen::VectorXd y = x;
    fit.converged = run_lm(y);
    const double r = projected_residual(scenario, plan, target, y).squared_norm;
    if (r <= best) {
      x = y;
      best = r;
    }
  }

  const ProjectedResidual pr = projected_residual(scenario, plan, target, x);
  fit.params = assemble(scenario, plan, x, pr.rho);
  fit.residual = pr.squared_norm;
  fit.evaluations = fn.evaluations;
  return fit;
}

InformationMatrices information_matrices(const ParamVector& pt, const ScenarioConfig& scenario,
                                         const PartitionPlan& plan, double noise_var,
                                         const McrbConfig& cfg) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("the bound needs a positive noise variance");
  const int K = pt.K, M = pt.M, T = pt.T;
  if (K != scenario.num_ms() || M != plan.size() || T != scenario.num_slots()) {
    throw std::invalid_argument("parameter vector does not match the scenario");
  }
  const int n = pt.size();
  const Eigen::MatrixXcd target = noiseless_received(scenario);
  const std::vector<Vec2> q = slot_locals(scenario);
  const Eigen::VectorXd pose = pt.pose_part();

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::VectorXcd> eps(static_cast<std::size_t>(M * T));

  auto steer_k = [&](const SubarrayDescriptor& d, const Eigen::VectorXd& x, int k, int t) {
    return steering_vec(d, antenna_at(x, K, k, q[static_cast<std::size_t>(t)]));
  };

  for (int t = 0; t < T; ++t) {
    for (int m = 0; m < M; ++m) {
      const SubarrayDescriptor& d = plan.subarrays()[static_cast<std::size_t>(m)];
      const Eigen::VectorXcd y = block_vec(target, plan, d, t);
      const Eigen::Index nm = y.size();
      std::vector<Eigen::VectorXcd> ups(static_cast<std::size_t>(K));
      Eigen::VectorXcd model = Eigen::VectorXcd::Zero(nm);
      for (int k = 0; k < K; ++k) {
        ups[static_cast<std::size_t>(k)] = steer_k(d, pose, k, t);
        model += pt.rho(m, k, t) * ups[static_cast<std::size_t>(k)];
      }
      const Eigen::VectorXcd e = y - model;
      eps[static_cast<std::size_t>(t * M + m)] = e;

      // Local Jacobian: 6 pose columns and 2 rho columns per MS.
      Eigen::MatrixXcd jl(nm, 8 * K);
      std::vector<int> idx(static_cast<std::size_t>(8 * K));
      for (int k = 0; k < K; ++k) {
        const cd rho = pt.rho(m, k, t);
        for (int a = 0; a < 6; ++a) {
          const int gi = pt.pose_index(k, a);
          Eigen::VectorXd xp = pose, xm = pose;
          const double h = fd_step(pose(gi), cfg.fd_rel_step);
          xp(gi) += h;
          xm(gi) -= h;
          const Eigen::VectorXcd du = (steer_k(d, xp, k, t) - steer_k(d, xm, k, t)) / (2.0 * h);
          jl.col(8 * k + a) = rho * du;
          idx[static_cast<std::size_t>(8 * k + a)] = gi;
          // Mixed pose/rho second derivatives.
          const int ri = pt.rho_index(m, k, t);
          const double sre = std::real(e.dot(du));
          const double sim = std::real(e.dot(cd(0.0, 1.0) * du));
          s2(gi, ri) += sre;
          s2(ri, gi) += sre;
          s2(gi, ri + 1) += sim;
          s2(ri + 1, gi) += sim;
        }
        jl.col(8 * k + 6) = ups[static_cast<std::size_t>(k)];
        jl.col(8 * k + 7) = cd(0.0, 1.0) * ups[static_cast<std::size_t>(k)];
        idx[static_cast<std::size_t>(8 * k + 6)] = pt.rho_index(m, k, t);
        idx[static_cast<std::size_t>(8 * k + 7)] = pt.rho_index(m, k, t) + 1;
      }
      const Eigen::MatrixXd gl = (jl.adjoint() * jl).real();
      const Eigen::VectorXd sl = (jl.adjoint() * e).real();  // Re{e^H J} = Re{J^H e}
      for (int a = 0; a < 8 * K; ++a) {
        s1(idx[static_cast<std::size_t>(a)]) += sl(a);
        for (int b = 0; b < 8 * K; ++b) g(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]) += gl(a, b);
      }
    }
  }

  // Pose-pose second derivatives: h_k = Re sum eps^H rho Upsilon_k, per MS.
  for (int k = 0; k < K; ++k) {
    auto hk = [&](const Eigen::VectorXd& x) {
      double v = 0.0;
      for (int t = 0; t < T; ++t) {
        for (int m = 0; m < M; ++m) {
          const SubarrayDescriptor& d = plan.subarrays()[static_cast<std::size_t>(m)];
          v += std::real(eps[static_cast<std::size_t>(t * M + m)].dot(pt.rho(m, k, t) * steer_k(d, x, k, t)));
        }
      }
      return v;
    };
    Eigen::VectorXd x6(6);
    for (int a = 0; a < 6; ++a) x6(a) = pose(pt.pose_index(k, a));
    auto h6 = [&](const Eigen::VectorXd& z) {
      Eigen::VectorXd x = pose;
      for (int a = 0; a < 6; ++a) x(pt.pose_index(k, a)) = z(a);
      return hk(x);
    };
    const Eigen::MatrixXd hess = central_hessian(h6, x6, cfg.second_rel_step);
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) s2(pt.pose_index(k, a), pt.pose_index(k, b)) += hess(a, b);
    }
  }

  InformationMatrices out;
  out.A = (2.0 / noise_var) * (s2 - g);
  out.B = (4.0 / (noise_var * noise_var)) * s1 * s1.transpose() + (2.0 / noise_var) * g;
  out.A = 0.5 * (out.A + out.A.transpose()).eval();
  out.B = 0.5 * (out.B + out.B.transpose()).eval();
  return out;
}

McrbResult lower_bound(const InformationMatrices& im, const ParamVector& pseudotrue,
                       const ParamVector& truth, const McrbConfig& cfg) {
  const Eigen::Index n = im.A.rows();
  if (im.A.cols() != n || im.B.rows() != n || im.B.cols() != n || pseudotrue.size() != n ||
      truth.size() != n) {
    throw std::invalid_argument("information matrices and parameter vectors disagree in size");
  }
  McrbResult r;
  r.pseudotrue = pseudotrue;

  // Jacobi equilibration before inverting.
  Eigen::VectorXd dg(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::abs(im.A(i, i));
    dg(i) = a > 0.0 ? 1.0 / std::sqrt(a) : 1.0;
  }
  const Eigen::MatrixXd ae = dg.asDiagonal() * im.A * dg.asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ae, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  r.condition = sv(n - 1) > 0.0 ? sv(0) / sv(n - 1) : std::numeric_limits<double>::infinity();
  Eigen::MatrixXd ainv_e;
  if (r.condition > cfg.cond_max) {
    r.pinv_used = true;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (sv(i) > sv(0) / cfg.cond_max) inv(i) = 1.0 / sv(i);
    }
    ainv_e = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  } else {
    ainv_e = svd.solve(Eigen::MatrixXd::Identity(n, n));
  }
  const Eigen::MatrixXd ainv = dg.asDiagonal() * ainv_e * dg.asDiagonal();

  Eigen::VectorXd bias = pseudotrue.values - truth.values;
  const int K = truth.K;
  for (int i = 3 * K; i < 6 * K; ++i) bias(i) = wrap_angle(bias(i));
  Eigen::MatrixXd full = ainv * im.B * ainv.transpose() + bias * bias.transpose();
  full = 0.5 * (full + full.transpose()).eval();

  r.lb = full.topLeftCorner(6 * K, 6 * K);
  r.bias = bias.head(6 * K);
  r.bias_norm = r.bias.norm();
  for (int k = 0; k < K; ++k) {
    r.position_trace.push_back(r.lb.block(3 * k, 3 * k, 3, 3).trace());
    r.attitude_trace.push_back(r.lb.block(3 * K + 3 * k, 3 * K + 3 * k, 3, 3).trace());
  }
  return r;
}

double McrbResult::position_bound(int k) const {
  return std::sqrt(std::max(0.0, position_trace.at(static_cast<std::size_t>(k))));
}

double McrbResult::total_position_bound() const {
  double s = 0.0;
  for (double v : position_trace) s += v;
  return std::sqrt(std::max(0.0, s));
}

McrbResult compute_mcrb(const ScenarioConfig& scenario, const PartitionPlan& plan, const McrbConfig& cfg) {
  const PseudotrueFit fit = pseudotrue_fit(scenario, plan, cfg);
  const InformationMatrices im = information_matrices(fit.params, scenario, plan, scenario.noise_var_w, cfg);
  McrbResult r = lower_bound(im, fit.params, truth_parameters(scenario, plan), cfg);
  r.pseudotrue_converged = fit.converged;
  return r;
}

Eigen::MatrixXd exact_model_crb(const ScenarioConfig& scenario, const McrbConfig& cfg) {
  if (!(scenario.noise_var_w > 0.0)) throw std::invalid_argument("the bound needs a positive noise variance");
  const Eigen::VectorXd x = pose_vector(scenario);
  const Eigen::Index n = x.size();
  std::vector<Eigen::MatrixXcd> d(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    const double h = fd_step(x(i), cfg.fd_rel_step);
    xp(i) += h;
    xm(i) -= h;
    d[static_cast<std::size_t>(i)] = (exact_mean(scenario, xp) - exact_mean(scenario, xm)) / (2.0 * h);
  }
  Eigen::MatrixXd f(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = 2.0 / scenario.noise_var_w *
                       std::real((d[static_cast<std::size_t>(i)].conjugate().cwiseProduct(d[static_cast<std::size_t>(j)])).sum());
      f(i, j) = f(j, i) = v;
    }
  }
  const Eigen::MatrixXd c = f.inverse();
  return 0.5 * (c + c.transpose());
}

}  // namespace nfpose
