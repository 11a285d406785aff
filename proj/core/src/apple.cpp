#include "nfpose/apple.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nfpose {

Vec2 EstimationContext::local(int t) const {
  const GridIndex& g = pattern[t];
  return ms_local_antenna_position(ms, g.u, g.v, lambda);
}

EstimationContext estimation_context(const ScenarioConfig& scenario) {
  EstimationContext c;
  c.bs = scenario.bs;
  c.ms = scenario.ms;
  c.pattern = scenario.pattern;
  c.lambda = scenario.wavelength();
  c.K = scenario.num_ms();
  c.noise_var = scenario.noise_var_w;
  c.tx_power_w = scenario.tx_power_w;
  return c;
}

double AppleConfig::resolved_coef_prior_var(const EstimationContext& ctx) const {
  if (coef_prior_var > 0.0) return coef_prior_var;
  const double a = ctx.lambda / (4.0 * kPi * nominal_range);
  return std::max(a * a * ctx.tx_power_w, 1e-300);
}

// ---------------------------------------------------------------------------

FusionObjective::FusionObjective(std::vector<Vec3> refs, std::vector<VmPair> ext)
    : refs_(std::move(refs)), ext_(std::move(ext)) {
  if (refs_.size() != ext_.size()) throw std::invalid_argument("refs/extrinsics length mismatch");
}

double FusionObjective::total_kappa() const {
  double s = 0.0;
  for (const auto& e : ext_) s += e.x.kappa() + e.y.kappa();
  return s;
}

double FusionObjective::value(const Vec3& p) const {
  double f = 0.0;
  for (std::size_t m = 0; m < refs_.size(); ++m) {
    const Vec3 d = p - refs_[m];
    const double r = d.norm();
    const double hx = std::sin(0.5 * (kPi * d.x() / r - ext_[m].x.mean()));
    const double hy = std::sin(0.5 * (kPi * d.y() / r - ext_[m].y.mean()));
    f -= 2.0 * (ext_[m].x.kappa() * hx * hx + ext_[m].y.kappa() * hy * hy);
  }
  return f;
}

Vec3 FusionObjective::gradient(const Vec3& p) const {
  Vec3 g = Vec3::Zero();
  for (std::size_t m = 0; m < refs_.size(); ++m) {
    const Vec3 d = p - refs_[m];
    const double r = d.norm();
    const Vec3 dh = d / r;
    for (int a = 0; a < 2; ++a) {
      const VonMises& v = a == 0 ? ext_[m].x : ext_[m].y;
      const double phi = dh(a);
      Vec3 grad_phi = -phi * dh;
      grad_phi(a) += 1.0;
      grad_phi /= r;
      g -= v.kappa() * kPi * std::sin(kPi * phi - v.mean()) * grad_phi;
    }
  }
  return g;
}

Mat3 FusionObjective::hessian(const Vec3& p) const {
  Mat3 h = Mat3::Zero();
  for (std::size_t m = 0; m < refs_.size(); ++m) {
    const Vec3 d = p - refs_[m];
    const double r = d.norm();
    const Vec3 dh = d / r;
    for (int a = 0; a < 2; ++a) {
      const VonMises& v = a == 0 ? ext_[m].x : ext_[m].y;
      const double phi = dh(a);
      const Vec3 e = Vec3::Unit(a);
      const Vec3 grad_phi = (e - phi * dh) / r;
      const Mat3 hess_phi = -(e * dh.transpose() + dh * e.transpose()) / (r * r) -
                            phi * (Mat3::Identity() - 3.0 * dh * dh.transpose()) / (r * r);
      const double arg = kPi * phi - v.mean();
      h -= v.kappa() * (kPi * kPi * std::cos(arg) * grad_phi * grad_phi.transpose() +
                        kPi * std::sin(arg) * hess_phi);
    }
  }
  return h;
}

SmoothObjective FusionObjective::smooth() const {
  SmoothObjective s;
  s.value = [this](const Eigen::VectorXd& x) { return value(Vec3(x)); };
  s.gradient = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd { return gradient(Vec3(x)); };
  s.hessian = [this](const Eigen::VectorXd& x) -> Eigen::MatrixXd { return hessian(Vec3(x)); };
  return s;
}

// ---------------------------------------------------------------------------

PoseObjective::PoseObjective(std::vector<Vec2> local, std::vector<GaussianBelief> obs,
                             double position_prior_std, std::array<VonMises, 3> attitude_prior)
    : local_(std::move(local)), inv_var_p_(1.0 / (position_prior_std * position_prior_std)),
      prior_(attitude_prior) {
  if (local_.size() != obs.size()) throw std::invalid_argument("local/observation length mismatch");
  for (const auto& o : obs) {
    mean_.push_back(o.mean);
    precision_.push_back(spd_inverse(o.cov));
  }
}

namespace {
double vm_shifted(const VonMises& v, double angle) {
  const double s = std::sin(0.5 * (angle - v.mean()));
  return -2.0 * v.kappa() * s * s;
}
}  // namespace

double PoseObjective::value(const Vec6& x) const {
  const Vec3 p = x.head<3>();
  const Mat32 r = rotation_basis(Vec3(x.tail<3>()));
  double f = -0.5 * inv_var_p_ * p.squaredNorm();
  for (std::size_t t = 0; t < local_.size(); ++t) {
    const Vec3 e = mean_[t] - p - r * local_[t];
    f -= 0.5 * e.dot(precision_[t] * e);
  }
  f += vm_shifted(prior_[0], x(3)) + vm_shifted(prior_[1], 2.0 * x(4)) + vm_shifted(prior_[2], x(5));
  return f;
}

Vec6 PoseObjective::gradient(const Vec6& x) const {
  const Vec3 p = x.head<3>();
  const Vec3 th = x.tail<3>();
  const Mat32 r = rotation_basis(th);
  const auto dr = rotation_basis_derivatives(th);
  Vec6 g = Vec6::Zero();
  g.head<3>() = -inv_var_p_ * p;
  for (std::size_t t = 0; t < local_.size(); ++t) {
    const Vec3 w = precision_[t] * (mean_[t] - p - r * local_[t]);
    g.head<3>() += w;
    for (int l = 0; l < 3; ++l) g(3 + l) += (dr[static_cast<std::size_t>(l)] * local_[t]).dot(w);
  }
  g(3) -= prior_[0].kappa() * std::sin(x(3) - prior_[0].mean());
  g(4) -= 2.0 * prior_[1].kappa() * std::sin(2.0 * x(4) - prior_[1].mean());
  g(5) -= prior_[2].kappa() * std::sin(x(5) - prior_[2].mean());
  return g;
}

SmoothObjective PoseObjective::smooth() const {
  SmoothObjective s;
  s.value = [this](const Eigen::VectorXd& x) { return value(Vec6(x)); };
  s.gradient = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd { return gradient(Vec6(x)); };
  return s;
}

// ---------------------------------------------------------------------------

MessageState init_messages(int M, int K, int T, const AppleConfig& cfg) {
  if (!(cfg.sigma_ini > 0.0)) throw std::invalid_argument("sigma_ini must be positive");
  if (M < 0 || K < 0 || T < 0) throw std::invalid_argument("negative dimensions");
  MessageState s;
  s.M = M;
  s.K = K;
  s.T = T;
  GaussianBelief g{Vec3(0.0, 0.0, 1.0), cfg.sigma_ini * cfg.sigma_ini * Mat3::Identity()};
  s.to_aoa.assign(static_cast<std::size_t>(M * K * T), g);
  s.prior_vm.resize(s.to_aoa.size());
  s.posterior.resize(s.to_aoa.size());
  s.extrinsic.resize(s.to_aoa.size());
  s.fused.assign(static_cast<std::size_t>(K * T), g);
  s.fused_valid.assign(static_cast<std::size_t>(K * T), false);
  s.pose.resize(static_cast<std::size_t>(K * T));
  s.from_pose.assign(static_cast<std::size_t>(K * T), g);
  return s;
}

namespace {

double cosine_distance(const Vec2& a, const Vec2& b) {
  Vec2 d = a - b;
  for (int i = 0; i < 2; ++i) d(i) -= 2.0 * std::round(d(i) / 2.0);
  return d.norm();
}

}  // namespace

std::vector<int> best_assignment(const std::vector<Vec2>& ref, const std::vector<Vec2>& comp) {
  const int K = static_cast<int>(ref.size());
  std::vector<int> perm(static_cast<std::size_t>(K)), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int l = 0; l < K; ++l) c += cosine_distance(ref[static_cast<std::size_t>(l)], comp[static_cast<std::size_t>(perm[static_cast<std::size_t>(l)])]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

namespace {

void associate_first_iteration(MessageState& s, const PartitionPlan& plan) {
  const int K = s.K;
  int anchor = 0;
  for (int m = 1; m < s.M; ++m) {
    if (plan.subarrays()[static_cast<std::size_t>(m)].ref_position.norm() <
        plan.subarrays()[static_cast<std::size_t>(anchor)].ref_position.norm()) {
      anchor = m;
    }
  }
  auto apply = [&](int m, int t, const std::vector<int>& perm) {
    std::vector<AoaSourcePosterior> post(static_cast<std::size_t>(K));
    std::vector<VmPair> pri(static_cast<std::size_t>(K));
    for (int l = 0; l < K; ++l) {
      post[static_cast<std::size_t>(l)] = s.posterior[s.mkt(m, perm[static_cast<std::size_t>(l)], t)];
      pri[static_cast<std::size_t>(l)] = s.prior_vm[s.mkt(m, perm[static_cast<std::size_t>(l)], t)];
    }
    for (int l = 0; l < K; ++l) {
      s.posterior[s.mkt(m, l, t)] = post[static_cast<std::size_t>(l)];
      s.prior_vm[s.mkt(m, l, t)] = pri[static_cast<std::size_t>(l)];
    }
  };
  auto cosines = [&](int m, int t) {
    std::vector<Vec2> c(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) c[static_cast<std::size_t>(k)] = s.posterior[s.mkt(m, k, t)].cosines;
    return c;
  };
  // Labels at the anchor, first slot: descending coefficient magnitude.
  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(s.posterior[s.mkt(anchor, a, 0)].coef_mean) >
           std::abs(s.posterior[s.mkt(anchor, b, 0)].coef_mean);
  });
  apply(anchor, 0, order);
  const std::vector<Vec2> anchor0 = cosines(anchor, 0);
  for (int t = 1; t < s.T; ++t) apply(anchor, t, best_assignment(anchor0, cosines(anchor, t)));
  for (int t = 0; t < s.T; ++t) {
    const std::vector<Vec2> ref = cosines(anchor, t);
    for (int m = 0; m < s.M; ++m) {
      if (m != anchor) apply(m, t, best_assignment(ref, cosines(m, t)));
    }
  }
}

Vec3 ray_direction(const VmPair& v) {
  const double cx = v.x.mean() / kPi, cy = v.y.mean() / kPi;
  return Vec3(cx, cy, std::sqrt(std::max(0.0, 1.0 - cx * cx - cy * cy))).normalized();
}

Vec3 coarse_fix(const PartitionPlan& plan, const std::vector<VmPair>& ext, double nominal_range) {
  const int M = plan.size();
  double kmax = 0.0;
  for (const auto& e : ext) kmax = std::max(kmax, std::min(e.x.kappa(), e.y.kappa()));
  std::vector<int> inf;
  for (int m = 0; m < M; ++m) {
    const auto& e = ext[static_cast<std::size_t>(m)];
    if (kmax > 0.0 && std::min(e.x.kappa(), e.y.kappa()) >= 1e-3 * kmax) inf.push_back(m);
  }
  auto ref = [&](int m) { return plan.subarrays()[static_cast<std::size_t>(m)].ref_position; };
  Vec3 mean_dir = Vec3::Zero();
  for (int m : inf) mean_dir += ray_direction(ext[static_cast<std::size_t>(m)]);
  if (inf.empty() || !(mean_dir.norm() > 0.0)) return Vec3(0.0, 0.0, nominal_range);
  const Vec3 fallback = nominal_range * mean_dir.normalized();
  auto plausible = [&](const Vec3& p) {
    return p.allFinite() && p.z() > 0.0 && p.norm() < 1e3 * nominal_range;
  };
  if (inf.size() >= 2) {
    int a = inf[0], b = inf[1];
    double best = -1.0;
    for (std::size_t i = 0; i < inf.size(); ++i) {
      for (std::size_t j = i + 1; j < inf.size(); ++j) {
        const double d = (ref(inf[i]) - ref(inf[j])).norm();
        if (d > best) {
          best = d;
          a = inf[i];
          b = inf[j];
        }
      }
    }
    const Vec3 ua = ray_direction(ext[static_cast<std::size_t>(a)]);
    const Vec3 ub = ray_direction(ext[static_cast<std::size_t>(b)]);
    Eigen::Matrix<double, 3, 2> A;
    A.col(0) = ua;
    A.col(1) = -ub;
    const Eigen::Vector2d s = A.colPivHouseholderQr().solve(ref(b) - ref(a));
    const Vec3 p = 0.5 * (ref(a) + s(0) * ua + ref(b) + s(1) * ub);
    if (s(0) > 0.0 && s(1) > 0.0 && plausible(p)) return p;
    // All informative rays.
    Mat3 n = Mat3::Zero();
    Vec3 rhs = Vec3::Zero();
    for (int m : inf) {
      const Vec3 u = ray_direction(ext[static_cast<std::size_t>(m)]);
      const Mat3 proj = Mat3::Identity() - u * u.transpose();
      n += proj;
      rhs += proj * ref(m);
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(n);
    if (es.eigenvalues()(0) > 1e-12 * es.eigenvalues()(2)) {
      const Vec3 q = n.ldlt().solve(rhs);
      if (plausible(q)) return q;
    }
  }
  return fallback;
}

PoseMessage ascend(const PoseObjective& obj, const Vec6& init, const LaplaceOptions& opts,
                   bool* regularized, double* value) {
  const LaplaceResult lr = laplace_fit(obj.smooth(), Eigen::VectorXd(init), opts);
  PoseMessage msg;
  msg.position = lr.belief.mean.head<3>();
  msg.attitude = lr.belief.mean.tail<3>();
  msg.cov = lr.belief.cov;
  msg.valid = true;
  if (regularized) *regularized = lr.regularized;
  if (value) *value = lr.value;
  return msg;
}

}  // namespace

PoseMessage fit_pose(const PoseObjective& objective, const std::vector<Vec2>& local,
                     const std::vector<Vec3>& points, const LaplaceOptions& opts,
                     const PoseMessage* warm_start, bool* regularized) {
  std::vector<Vec6> starts;
  if (warm_start && warm_start->valid) {
    Vec6 x;
    x << warm_start->position, warm_start->attitude;
    starts.push_back(x);
  } else {
    std::vector<Vec3> l3;
    for (const auto& q : local) l3.emplace_back(q.x(), q.y(), 0.0);
    const auto [r0, p0] = kabsch(l3, points);
    Vec6 x;
    x << p0, euler_from_rotation(r0);
    starts.push_back(x);
    // Mirror the points in depth about their centroid and refit.
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    c /= static_cast<double>(points.size());
    if (c.norm() > 0.0) {
      const Vec3 los = c.normalized();
      std::vector<Vec3> mirrored;
      for (const auto& p : points) mirrored.push_back(p - 2.0 * (p - c).dot(los) * los);
      const auto [r1, p1] = kabsch(l3, mirrored);
      // Mirrored points give the mirrored attitude; keep the measured centroid.
      x << p1, euler_from_rotation(r1);
      starts.push_back(x);
    }
  }
  PoseMessage best;
  double best_value = -std::numeric_limits<double>::infinity();
  bool best_reg = false;
  for (const Vec6& s : starts) {
    bool reg = false;
    double v = 0.0;
    PoseMessage m = ascend(objective, s, opts, &reg, &v);
    if (v > best_value) {
      best_value = v;
      best = m;
      best_reg = reg;
    }
  }
  if (regularized) *regularized = best_reg;
  return best;
}

PoseEstimate to_pose_estimate(const PoseMessage& msg, bool converged) {
  PoseEstimate e;
  e.position = msg.position;
  e.attitude = EulerAngles::canonical(msg.attitude);
  e.basis = rotation_basis(e.attitude);
  e.covariance = msg.cov;
  e.converged = converged;
  return e;
}

void aoa_module_pass(MessageState& state, const ReceivedSignal& signal, const PartitionPlan& plan,
                     const EstimationContext& ctx, const AppleConfig& cfg) {
  const double coef_var = cfg.resolved_coef_prior_var(ctx);
  for (int t = 0; t < state.T; ++t) {
    for (int m = 0; m < state.M; ++m) {
      const auto& d = plan.subarrays()[static_cast<std::size_t>(m)];
      SubarraySnapshot snap{subarray_block(signal.samples, plan, d, t), ctx.noise_var};
      std::vector<VmPair> priors(static_cast<std::size_t>(state.K));
      for (int k = 0; k < state.K; ++k) {
        priors[static_cast<std::size_t>(k)] = gaussian_to_vm(state.to_aoa[state.mkt(m, k, t)], d.ref_position);
        state.prior_vm[state.mkt(m, k, t)] = priors[static_cast<std::size_t>(k)];
      }
      const AoaEstimate est = estimate_aoa_posteriors(snap, priors, coef_var, cfg.aoa);
      for (int k = 0; k < state.K; ++k) {
        state.posterior[state.mkt(m, k, t)] = est.sources[static_cast<std::size_t>(k)];
        if (est.sources[static_cast<std::size_t>(k)].curvature_fallback) ++state.diag.aoa_curvature_fallbacks;
      }
    }
  }
  if (state.iteration == 0 && state.K > 1) associate_first_iteration(state, plan);
  for (std::size_t i = 0; i < state.posterior.size(); ++i) {
    state.extrinsic[i] = {vm_extrinsic(state.posterior[i].aoa.x, state.prior_vm[i].x),
                          vm_extrinsic(state.posterior[i].aoa.y, state.prior_vm[i].y)};
  }
}

namespace {
FusionObjective fusion_objective(const MessageState& state, const PartitionPlan& plan, int k, int t,
                                 int skip_m) {
  std::vector<Vec3> refs;
  std::vector<VmPair> ext;
  for (int m = 0; m < state.M; ++m) {
    if (m == skip_m) continue;
    refs.push_back(plan.subarrays()[static_cast<std::size_t>(m)].ref_position);
    ext.push_back(state.extrinsic[state.mkt(m, k, t)]);
  }
  return FusionObjective(std::move(refs), std::move(ext));
}
}  // namespace

GaussianBelief fuse_antenna_position(MessageState& state, const PartitionPlan& plan, int k, int t,
                                     const AppleConfig& cfg) {
  const std::size_t i = state.kt(k, t);
  const FusionObjective obj = fusion_objective(state, plan, k, t, -1);
  Vec3 init;
  if (state.fused_valid[i]) {
    init = state.fused[i].mean;
  } else {
    std::vector<VmPair> ext;
    for (int m = 0; m < state.M; ++m) ext.push_back(state.extrinsic[state.mkt(m, k, t)]);
    init = coarse_fix(plan, ext, cfg.nominal_range);
  }
  if (!(obj.total_kappa() > 0.0)) {
    ++state.diag.fusion_flat;
    state.fused[i] = {init, cfg.sigma_ini * cfg.sigma_ini * Mat3::Identity()};
    return state.fused[i];
  }
  const LaplaceResult lr = laplace_fit(obj.smooth(), Eigen::VectorXd(init), cfg.ascent);
  if (!lr.converged) ++state.diag.fusion_nonconverged;
  state.fused[i] = lr.belief;
  state.fused_valid[i] = true;
  return state.fused[i];
}

void update_pose_messages(MessageState& state, const EstimationContext& ctx, int k,
                          const AppleConfig& cfg) {
  for (int t = 0; t < state.T; ++t) {
    std::vector<Vec2> local;
    std::vector<GaussianBelief> obs;
    std::vector<Vec3> points;
    for (int u = 0; u < state.T; ++u) {
      if (u == t) continue;
      local.push_back(ctx.local(u));
      obs.push_back(state.fused[state.kt(k, u)]);
      points.push_back(state.fused[state.kt(k, u)].mean);
    }
    if (obs.empty()) {
      // Single slot: only the priors remain.
      local.push_back(ctx.local(t));
      obs.push_back(state.fused[state.kt(k, t)]);
      points.push_back(state.fused[state.kt(k, t)].mean);
      obs.back().cov = cfg.position_prior_std * cfg.position_prior_std * Mat3::Identity();
    }
    const PoseObjective j(local, obs, cfg.position_prior_std, cfg.attitude_prior);
    PoseMessage& msg = state.pose[state.kt(k, t)];
    bool reg = false;
    msg = fit_pose(j, local, points, cfg.ascent, msg.valid ? &msg : nullptr, &reg);
    if (reg) ++state.diag.pose_regularized;
  }
}

GaussianBelief project_pose_to_antennas(const PoseMessage& pose, const Vec2& local) {
  const Mat32 r = rotation_basis(pose.attitude);
  const auto dr = rotation_basis_derivatives(pose.attitude);
  Mat3 q;
  for (int l = 0; l < 3; ++l) q.col(l) = dr[static_cast<std::size_t>(l)] * local;
  const Mat3 cp = pose.cov.topLeftCorner<3, 3>();
  const Mat3 ct = pose.cov.bottomRightCorner<3, 3>();
  Mat3 c = cp + q * ct * q.transpose();
  c = 0.5 * (c + c.transpose()).eval();
  return {pose.position + r * local, c};
}

GaussianBelief feedback_message(MessageState& state, const PartitionPlan& plan, int m, int k, int t,
                                const AppleConfig& cfg) {
  const GaussianBelief& from = state.from_pose[state.kt(k, t)];
  if (state.M <= 1) return from;
  const FusionObjective obj = fusion_objective(state, plan, k, t, m);
  if (!(obj.total_kappa() > 0.0)) return from;
  const LaplaceResult lr =
      laplace_fit(obj.smooth(), Eigen::VectorXd(state.fused[state.kt(k, t)].mean), cfg.ascent);
  if (lr.regularized) {
    ++state.diag.gamma_dropped;
    return from;
  }
  return gaussian_product(from, lr.belief);
}

std::vector<PoseEstimate> final_map(MessageState& state, const EstimationContext& ctx,
                                    const AppleConfig& cfg) {
  std::vector<PoseEstimate> out;
  for (int k = 0; k < state.K; ++k) {
    std::vector<Vec2> local;
    std::vector<GaussianBelief> obs;
    std::vector<Vec3> points;
    for (int t = 0; t < state.T; ++t) {
      local.push_back(ctx.local(t));
      obs.push_back(state.fused[state.kt(k, t)]);
      points.push_back(state.fused[state.kt(k, t)].mean);
    }
    const PoseObjective q(local, obs, cfg.position_prior_std, cfg.attitude_prior);
    // Warm start from the pose message with the highest Q.
    const PoseMessage* warm = nullptr;
    double warm_value = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < state.T; ++t) {
      const PoseMessage& pm = state.pose[state.kt(k, t)];
      if (!pm.valid) continue;
      Vec6 x;
      x << pm.position, pm.attitude;
      const double v = q.value(x);
      if (v > warm_value) {
        warm_value = v;
        warm = &pm;
      }
    }
    PoseMessage best = fit_pose(q, local, points, cfg.ascent, nullptr);
    Vec6 xb;
    xb << best.position, best.attitude;
    double best_value = q.value(xb);
    if (warm) {
      PoseMessage w = fit_pose(q, local, points, cfg.ascent, warm);
      Vec6 xw;
      xw << w.position, w.attitude;
      if (q.value(xw) > best_value) best = w;
    }
    const Vec6 g = [&] {
      Vec6 x;
      x << best.position, best.attitude;
      return q.gradient(x);
    }();
    const bool converged = g.allFinite();
    if (!converged) ++state.diag.final_nonconverged;
    out.push_back(to_pose_estimate(best, converged));
  }
  return out;
}

AppleResult run_apple(const ReceivedSignal& signal, const EstimationContext& ctx,
                      const PartitionPlan& plan, const AppleConfig& cfg) {
  if (signal.rows() != ctx.bs.size() || signal.slots() != ctx.T()) {
    throw std::invalid_argument("signal dimensions do not match the estimation context");
  }
  if (ctx.pattern.size() < 1) throw std::invalid_argument("empty transmit pattern");
  MessageState state = init_messages(plan.size(), ctx.K, ctx.T(), cfg);
  const int iters = cfg.resolved_iterations(ctx.K);
  for (int it = 0; it < iters; ++it) {
    state.iteration = it;
    aoa_module_pass(state, signal, plan, ctx, cfg);
    for (int t = 0; t < state.T; ++t) {
      for (int k = 0; k < state.K; ++k) fuse_antenna_position(state, plan, k, t, cfg);
    }
    for (int k = 0; k < state.K; ++k) update_pose_messages(state, ctx, k, cfg);
    if (it + 1 == iters) break;  // feedback would not reach the output
    for (int t = 0; t < state.T; ++t) {
      for (int k = 0; k < state.K; ++k) {
        state.from_pose[state.kt(k, t)] = project_pose_to_antennas(state.pose[state.kt(k, t)], ctx.local(t));
      }
    }
    for (int t = 0; t < state.T; ++t) {
      for (int m = 0; m < state.M; ++m) {
        for (int k = 0; k < state.K; ++k) {
          state.to_aoa[state.mkt(m, k, t)] = feedback_message(state, plan, m, k, t, cfg);
        }
      }
    }
  }
  AppleResult res;
  res.poses = final_map(state, ctx, cfg);
  res.diagnostics = state.diag;
  return res;
}

}  // namespace nfpose
