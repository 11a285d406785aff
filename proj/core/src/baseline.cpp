#include "nfpose/baseline.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include "nfpose/aoa_estimator.hpp"

namespace nfpose {

namespace {

Eigen::VectorXcd steering_vec(int nx, int ny, const Vec2& c) {
  const Eigen::MatrixXcd u = steering_matrix(nx, ny, c);
  return Eigen::Map<const Eigen::VectorXcd>(u.data(), u.size());
}

Vec3 direction(const Vec2& c) {
  return Vec3(c.x(), c.y(), std::sqrt(std::max(0.0, 1.0 - c.squaredNorm()))).normalized();
}

}  // namespace

std::vector<FarFieldAoa> farfield_aoa(const Eigen::VectorXcd& column, const UraSpec& bs, int K,
                                      const BaselineConfig& cfg) {
  const int nx = bs.nx, ny = bs.ny;
  if (column.size() != bs.size()) throw std::invalid_argument("column length does not match the array");
  if (K < 0) throw std::invalid_argument("negative source count");
  const double n = static_cast<double>(bs.size());
  const Eigen::MatrixXcd y = Eigen::Map<const Eigen::MatrixXcd>(column.data(), nx, ny);

  const int gx = cfg.grid_oversampling * nx, gy = cfg.grid_oversampling * ny;
  Eigen::MatrixXcd ux(gx, nx), uy(ny, gy);
  for (int a = 0; a < gx; ++a) {
    for (int i = 0; i < nx; ++i) ux(a, i) = std::polar(1.0, -kPi * (i + 1) * (-1.0 + 2.0 * a / gx));
  }
  for (int b = 0; b < gy; ++b) {
    for (int j = 0; j < ny; ++j) uy(j, b) = std::polar(1.0, -kPi * (j + 1) * (-1.0 + 2.0 * b / gy));
  }

  std::vector<FarFieldAoa> out;
  Eigen::MatrixXcd atoms(bs.size(), 0);
  Eigen::MatrixXcd r = y;
  const VmPair flat{VonMises(0.0, 0.0), VonMises(0.0, 0.0)};
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd p = (ux * r * uy).cwiseAbs2() / n;
    Eigen::Index ia = 0, ib = 0;
    const double peak = p.maxCoeff(&ia, &ib);
    const double mean = p.mean();
    Vec2 best(-1.0 + 2.0 * static_cast<double>(ia) / gx, -1.0 + 2.0 * static_cast<double>(ib) / gy);

    const SourceObjective so{&r, flat, 1.0 / n};
    // Local grid over one coarse cell either side.
    const double wx = 2.0 / gx, wy = 2.0 / gy;
    const int sx = static_cast<int>(std::ceil(wx / cfg.fine_step));
    const int sy = static_cast<int>(std::ceil(wy / cfg.fine_step));
    const Vec2 centre = best;
    double fbest = so.value(best);
    for (int a = -sx; a <= sx; ++a) {
      for (int b = -sy; b <= sy; ++b) {
        const Vec2 c = centre + cfg.fine_step * Vec2(a, b);
        const double f = so.value(c);
        if (f > fbest) {
          fbest = f;
          best = c;
        }
      }
    }
    SmoothObjective obj;
    obj.value = [&](const Eigen::VectorXd& v) { return so.value(Vec2(v(0), v(1))); };
    obj.gradient = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return so.gradient(Vec2(v(0), v(1))); };
    obj.hessian = [&](const Eigen::VectorXd& v) -> Eigen::MatrixXd { return so.hessian(Vec2(v(0), v(1))); };
    LaplaceOptions lo;
    lo.grad_tol = 1e-12;
    lo.max_iterations = 50;
    const LaplaceResult lr = laplace_fit(obj, Eigen::Vector2d(best), lo);
    Vec2 c = lr.belief.mean;
    for (int i = 0; i < 2; ++i) c(i) -= 2.0 * std::floor((c(i) + 1.0) / 2.0);

    FarFieldAoa e;
    e.cosines = c;
    e.power = so.value(c);
    e.low_power = !(mean > 0.0) || peak / mean < cfg.low_power_ratio;

    atoms.conservativeResize(Eigen::NoChange, atoms.cols() + 1);
    atoms.col(atoms.cols() - 1) = steering_vec(nx, ny, c);
    const Eigen::VectorXcd coef = atoms.colPivHouseholderQr().solve(column);
    const Eigen::VectorXcd res = column - atoms * coef;
    r = Eigen::Map<const Eigen::MatrixXcd>(res.data(), nx, ny);
    e.residual = res.squaredNorm() / n;
    out.push_back(e);
  }
  return out;
}

namespace {

struct CosineFit : Eigen::DenseFunctor<double> {
  std::vector<Vec2> local;
  std::vector<Vec2> obs;
  double prior_mean = 0.0, prior_std = 0.0;

  CosineFit(std::vector<Vec2> q, std::vector<Vec2> c, double pm, double ps)
      : DenseFunctor<double>(6, static_cast<int>(2 * c.size()) + (ps > 0.0 ? 1 : 0)), local(std::move(q)),
        obs(std::move(c)), prior_mean(pm), prior_std(ps) {}

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    const Vec3 p = x.head<3>();
    const Mat32 r = rotation_basis(Vec3(x.tail<3>()));
    f.resize(values());
    for (std::size_t t = 0; t < obs.size(); ++t) {
      const Vec3 a = p + r * local[t];
      const double n = a.norm();
      const Vec2 c = n > 0.0 ? Vec2(a.x() / n, a.y() / n) : Vec2::Zero();
      f.segment<2>(static_cast<Eigen::Index>(2 * t)) = c - obs[t];
    }
    if (prior_std > 0.0) f(values() - 1) = (p.norm() - prior_mean) / prior_std;
    return 0;
  }
};

}  // namespace

BaselinePose pose_from_aoas(const std::vector<Vec2>& cosines, const TransmitPattern& pattern,
                            const UraSpec& ms, double lambda, const BaselineConfig& cfg) {
  const int T = pattern.size();
  if (static_cast<int>(cosines.size()) != T) throw std::invalid_argument("one cosine pair per slot is required");
  if (T < 1) throw std::invalid_argument("empty transmit pattern");
  std::vector<Vec2> local;
  std::vector<Vec3> l3;
  for (const GridIndex& g : pattern.slots()) {
    local.push_back(ms_local_antenna_position(ms, g.u, g.v, lambda));
    l3.emplace_back(local.back().x(), local.back().y(), 0.0);
  }
  BaselinePose out;
  {
    Eigen::MatrixXd c(2, T);
    Vec2 mean = Vec2::Zero();
    for (const Vec2& q : local) mean += q;
    mean /= T;
    for (int t = 0; t < T; ++t) c.col(t) = local[static_cast<std::size_t>(t)] - mean;
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(c).singularValues();
    out.collinear = T < 3 || sv.size() < 2 || sv(1) <= 1e-9 * std::max(sv(0), 1e-300);
  }

  std::vector<Vec3> rays;
  for (const Vec2& c : cosines) rays.push_back(direction(c));
  std::vector<Eigen::VectorXd> starts;
  for (double r0 : cfg.start_ranges) {
    std::vector<Vec3> pts;
    for (const Vec3& u : rays) pts.push_back(r0 * u);
    for (int flip = 0; flip < 2; ++flip) {
      std::vector<Vec3> use = pts;
      if (flip) {
        Vec3 cen = Vec3::Zero();
        for (const Vec3& p : pts) cen += p;
        cen /= static_cast<double>(pts.size());
        const Vec3 los = cen.normalized();
        for (Vec3& p : use) p -= 2.0 * (p - cen).dot(los) * los;
      }
      const auto [rot, pos] = kabsch(l3, use);
      Eigen::VectorXd x(6);
      x << pos, euler_from_rotation(rot);
      starts.push_back(x);
    }
  }

  using Diff = Eigen::NumericalDiff<CosineFit, Eigen::Central>;
  Diff fn(CosineFit(local, cosines, cfg.range_prior_mean, cfg.range_prior_std));
  Eigen::VectorXd best;
  double best_cost = std::numeric_limits<double>::infinity();
  bool best_ok = false;
  for (Eigen::VectorXd x : starts) {
    Eigen::LevenbergMarquardt<Diff> lm(fn);
    lm.setMaxfev(cfg.lm_max_evaluations);
    lm.setXtol(1e-14);
    lm.setFtol(1e-14);
    const auto status = lm.minimize(x);
    Eigen::VectorXd f;
    fn(x, f);
    const double cost = f.squaredNorm();
    if (x.allFinite() && cost < best_cost) {
      best_cost = cost;
      best = x;
      best_ok = status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation;
    }
  }
  if (best.size() == 0) best = starts.front();

  // Reconstruct antenna points on the measured rays and align.
  const Vec3 p = best.head<3>();
  const Mat32 r = rotation_basis(Vec3(best.tail<3>()));
  std::vector<Vec3> pts;
  for (int t = 0; t < T; ++t) {
    const Vec3& u = rays[static_cast<std::size_t>(t)];
    const Vec3 a = p + r * local[static_cast<std::size_t>(t)];
    pts.push_back(std::max(a.dot(u), 0.0) * u);
  }
  const auto [rf, pf] = kabsch(l3, pts);
  out.pose.position = pf;
  out.pose.attitude = EulerAngles::canonical(euler_from_rotation(rf));
  out.pose.basis = rotation_basis(out.pose.attitude);
  out.pose.covariance = Mat6::Identity() * std::numeric_limits<double>::quiet_NaN();
  out.pose.converged = best_ok && !out.collinear;
  out.cost = best_cost;
  return out;
}

BaselineResult run_baseline(const ReceivedSignal& signal, const EstimationContext& ctx,
                            const BaselineConfig& cfg) {
  const int T = ctx.T(), K = ctx.K;
  if (signal.rows() != ctx.bs.size() || signal.slots() != T) {
    throw std::invalid_argument("signal dimensions do not match the estimation context");
  }
  BaselineResult res;
  std::vector<std::vector<Vec2>> per_ms(static_cast<std::size_t>(K));
  std::vector<Vec2> prev;
  for (int t = 0; t < T; ++t) {
    const std::vector<FarFieldAoa> peaks = farfield_aoa(signal.samples.col(t), ctx.bs, K, cfg);
    std::vector<Vec2> c;
    for (const FarFieldAoa& e : peaks) {
      c.push_back(e.cosines);
      if (e.low_power) ++res.low_power_peaks;
    }
    // Slot 0 labels by descending power; later slots follow the previous one.
    std::vector<int> perm(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) perm[static_cast<std::size_t>(k)] = k;
    if (t > 0 && K > 1) perm = best_assignment(prev, c);
    std::vector<Vec2> ordered(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) ordered[static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
    for (int k = 0; k < K; ++k) per_ms[static_cast<std::size_t>(k)].push_back(ordered[static_cast<std::size_t>(k)]);
    prev = ordered;
  }
  for (int k = 0; k < K; ++k) {
    const BaselinePose bp = pose_from_aoas(per_ms[static_cast<std::size_t>(k)], ctx.pattern, ctx.ms, ctx.lambda, cfg);
    if (bp.collinear) ++res.collinear;
    res.poses.push_back(bp.pose);
  }
  return res;
}

}  // namespace nfpose
