#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "nfpose/apple.hpp"
#include "nfpose/metrics.hpp"
#include "scenes.hpp"

namespace nfpose {
namespace {

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

bool symmetric_psd(const Eigen::MatrixXd& c) {
  if (!c.allFinite()) return false;
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, c.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  return es.eigenvalues().minCoeff() >= -1e-9 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
}

VmPair exact_ext(const Vec3& p, const Vec3& ref, double kappa) {
  const Vec2 c = aoa_cosines(p, ref);
  return {VonMises(kPi * c.x(), kappa), VonMises(kPi * c.y(), kappa)};
}

// Noiseless data from the subarray model, so the estimator's model is exact.
ReceivedSignal swff_signal(const ScenarioConfig& s, const PartitionPlan& plan) {
  return swff_received(swff_coefficients(s, plan), plan, 0.0, 0);
}

TEST(AppleInit, DefaultMessages) {
  const AppleConfig cfg;
  const MessageState s = init_messages(4, 2, 5, cfg);
  ASSERT_EQ(s.to_aoa.size(), 40u);
  for (const GaussianBelief& g : s.to_aoa) {
    EXPECT_EQ(g.mean, Vec3(0, 0, 1));
    EXPECT_EQ(g.cov, Mat3::Identity() * cfg.sigma_ini * cfg.sigma_ini);
  }
  EXPECT_EQ(s.from_pose.size(), 10u);
  AppleConfig bad;
  bad.sigma_ini = 0.0;
  EXPECT_THROW(init_messages(4, 2, 5, bad), std::invalid_argument);
  const MessageState empty = init_messages(4, 0, 5, cfg);
  EXPECT_TRUE(empty.to_aoa.empty());
  EXPECT_TRUE(empty.pose.empty());
}

TEST(AppleAoaPass, PriorsAtTruthGiveConsistentExtrinsics) {
  const ExperimentConfig cfg = test::desk_config();
  const ScenarioConfig s = test::desk_scene(cfg, 3);
  const PartitionPlan plan = make_plan(cfg);
  const SwffCoefficients c = swff_coefficients(s, plan);
  const ReceivedSignal y = swff_received(c, plan, 0.0, 0);
  const EstimationContext ctx = estimation_context(s);
  MessageState st = init_messages(plan.size(), 1, ctx.T(), cfg.apple);
  st.iteration = 1;
  for (int t = 0; t < ctx.T(); ++t) {
    for (int m = 0; m < plan.size(); ++m) st.to_aoa[st.mkt(m, 0, t)] = {s.active_antenna(0, t), 1e-4 * Mat3::Identity()};
  }
  aoa_module_pass(st, y, plan, ctx, cfg.apple);
  for (int t = 0; t < ctx.T(); ++t) {
    for (int m = 0; m < plan.size(); ++m) {
      const VmPair& e = st.extrinsic[st.mkt(m, 0, t)];
      const Vec2 truth = c.at(m, 0, t).cosines;
      EXPECT_LT(std::abs(e.x.mean() / kPi - truth.x()), 1e-5);
      EXPECT_LT(std::abs(e.y.mean() / kPi - truth.y()), 1e-5);
      EXPECT_GT(e.x.kappa(), 0.0);
    }
  }
}

TEST(AppleAoaPass, ZeroSignalGivesNoExtrinsicInformation) {
  const ExperimentConfig cfg = test::desk_config();
  const ScenarioConfig s = test::desk_scene(cfg, 3);
  const PartitionPlan plan = make_plan(cfg);
  EstimationContext ctx = estimation_context(s);
  ReceivedSignal y;
  y.samples = Eigen::MatrixXcd::Zero(ctx.bs.size(), ctx.T());
  MessageState st = init_messages(plan.size(), 1, ctx.T(), cfg.apple);
  aoa_module_pass(st, y, plan, ctx, cfg.apple);
  for (const VmPair& e : st.extrinsic) {
    EXPECT_LT(e.x.kappa(), 1e-6);
    EXPECT_LT(e.y.kappa(), 1e-6);
  }
}

TEST(AppleAoaPass, FirstIterationAssociationIsConsistent) {
  ExperimentConfig cfg = test::desk_config(3);
  const ScenarioConfig s = test::desk_scene(cfg, 8);
  const PartitionPlan plan = make_plan(cfg);
  const SwffCoefficients c = swff_coefficients(s, plan);
  const EstimationContext ctx = estimation_context(s);
  MessageState st = init_messages(plan.size(), 3, ctx.T(), cfg.apple);
  aoa_module_pass(st, swff_received(c, plan, 0.0, 0), plan, ctx, cfg.apple);
  // One labelling must explain every (m, t).
  std::vector<int> label(3, -1);
  for (int l = 0; l < 3; ++l) {
    const Vec2 got = st.posterior[st.mkt(0, l, 0)].cosines;
    for (int k = 0; k < 3; ++k) {
      if ((got - c.at(0, k, 0).cosines).norm() < 1e-3) label[static_cast<std::size_t>(l)] = k;
    }
    ASSERT_GE(label[static_cast<std::size_t>(l)], 0);
  }
  for (int t = 0; t < ctx.T(); ++t) {
    for (int m = 0; m < plan.size(); ++m) {
      for (int l = 0; l < 3; ++l) {
        const Vec2 got = st.posterior[st.mkt(m, l, t)].cosines;
        EXPECT_LT((got - c.at(m, label[static_cast<std::size_t>(l)], t).cosines).norm(), 1e-3);
      }
    }
  }
}

TEST(AppleFusion, TwoSubarrayTriangulation) {
  const double lambda = kSpeedOfLight / 28e9;
  const PartitionPlan plan = uniform_partition({32, 32}, 2, 1, lambda);
  ASSERT_EQ(plan.size(), 2);
  Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 p = 5.0 * Vec3(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), 1.0).normalized();
    MessageState st = init_messages(2, 1, 1, AppleConfig{});
    for (int m = 0; m < 2; ++m) st.extrinsic[st.mkt(m, 0, 0)] = exact_ext(p, plan.subarrays()[static_cast<std::size_t>(m)].ref_position, 1e6);
    const GaussianBelief fused = fuse_antenna_position(st, plan, 0, 0, AppleConfig{});
    // Midpoint of the common perpendicular of the two rays.
    const Vec3 a = plan.subarray(1).ref_position, b = plan.subarray(2).ref_position;
    const Vec3 u = (p - a).normalized(), v = (p - b).normalized();
    const Vec3 w = a - b;
    const double uu = u.dot(u), uv = u.dot(v), vv = v.dot(v), uw = u.dot(w), vw = v.dot(w);
    const double den = uu * vv - uv * uv;
    const Vec3 oracle = 0.5 * (a + (uv * vw - vv * uw) / den * u + b + (uu * vw - uv * uw) / den * v);
    EXPECT_LT((fused.mean - p).norm(), 1e-4);
    EXPECT_LT((oracle - p).norm(), 1e-6);
    EXPECT_TRUE(symmetric_psd(fused.cov));
  }
}

TEST(AppleFusion, FlatObjectiveReturnsInit) {
  const ExperimentConfig cfg = test::desk_config();
  const PartitionPlan plan = make_plan(cfg);
  MessageState st = init_messages(plan.size(), 1, 1, cfg.apple);
  for (VmPair& e : st.extrinsic) e = {VonMises(0.2, 0.0), VonMises(-0.1, 0.0)};
  const GaussianBelief g = fuse_antenna_position(st, plan, 0, 0, cfg.apple);
  EXPECT_EQ(g.cov, cfg.apple.sigma_ini * cfg.apple.sigma_ini * Mat3::Identity());
  EXPECT_EQ(st.diag.fusion_flat, 1);
}

TEST(AppleFusion, GradientAndHessianMatchFiniteDifferences) {
  Rng rng(52);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> refs;
    std::vector<VmPair> ext;
    for (int m = 0; m < 9; ++m) {
      refs.emplace_back(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), 0.0);
      ext.push_back({VonMises(uniform(rng, -kPi, kPi), uniform(rng, 0, 1e3)), VonMises(uniform(rng, -kPi, kPi), uniform(rng, 0, 1e3))});
    }
    const FusionObjective f(refs, ext);
    const Vec3 p(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, 1, 8));
    const SmoothObjective s = f.smooth();
    const Eigen::VectorXd fd = fd_gradient(s.value, p, 1e-6);
    const Vec3 g = f.gradient(p);
    EXPECT_LT((g - fd).norm() / g.norm(), 1e-5);
    const Mat3 h = f.hessian(p);
    Mat3 fh;
    for (int i = 0; i < 3; ++i) {
      Vec3 a = p, b = p;
      a(i) += 1e-6;
      b(i) -= 1e-6;
      fh.col(i) = (f.gradient(a) - f.gradient(b)) / 2e-6;
    }
    EXPECT_LT((h - fh).norm() / h.norm(), 1e-5);
  }
}

TEST(AppleFusion, InvariantToSubarrayRelabeling) {
  Rng rng(53);
  std::vector<Vec3> refs;
  std::vector<VmPair> ext;
  for (int m = 0; m < 16; ++m) {
    refs.emplace_back(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), 0.0);
    ext.push_back({VonMises(uniform(rng, -kPi, kPi), uniform(rng, 0, 100)), VonMises(uniform(rng, -kPi, kPi), uniform(rng, 0, 100))});
  }
  std::vector<int> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Vec3> r2;
  std::vector<VmPair> e2;
  for (int i : perm) {
    r2.push_back(refs[static_cast<std::size_t>(i)]);
    e2.push_back(ext[static_cast<std::size_t>(i)]);
  }
  const FusionObjective a(refs, ext), b(r2, e2);
  for (int i = 0; i < 20; ++i) {
    const Vec3 p(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, 1, 8));
    EXPECT_NEAR(a.value(p), b.value(p), 1e-12 * std::max(1.0, std::abs(a.value(p))));
  }
}

TEST(ApplePose, ObjectiveGradientsMatchFiniteDifferences) {
  Rng rng(54);
  const UraSpec ms{16, 16};
  const double lambda = kSpeedOfLight / 28e9;
  const TransmitPattern pat = TransmitPattern::t5(16);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec2> local;
    std::vector<GaussianBelief> obs;
    for (int t = 0; t < pat.size(); ++t) {
      local.push_back(ms_local_antenna_position(ms, pat[t].u, pat[t].v, lambda));
      Mat3 l = Mat3::Random();
      obs.push_back({Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, 3, 8)),
                     1e-4 * (l * l.transpose() + 0.1 * Mat3::Identity())});
    }
    const std::array<VonMises, 3> pri{VonMises(uniform(rng, -3, 3), uniform(rng, 0, 5)),
                                      VonMises(uniform(rng, -3, 3), uniform(rng, 0, 5)),
                                      VonMises(uniform(rng, -3, 3), uniform(rng, 0, 5))};
    const std::vector<Vec2> lj(local.begin() + 1, local.end());
    const std::vector<GaussianBelief> oj(obs.begin() + 1, obs.end());
    const PoseObjective q(local, obs, 1e3, pri), j(lj, oj, 1e3, pri);
    Vec6 x;
    x << obs[0].mean + Vec3(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)),
        uniform(rng, -3, 3), uniform(rng, -1.5, 1.5), uniform(rng, -3, 3);
    for (const PoseObjective* o : {&q, &j}) {
      const Eigen::VectorXd fd = fd_gradient(o->smooth().value, x, 1e-7);
      const Vec6 g = o->gradient(x);
      EXPECT_LT((g - fd).norm() / g.norm(), 1e-5);
    }
  }
}

struct ExactPoseCase {
  EstimationContext ctx;
  Pose truth;
  MessageState state;
};

ExactPoseCase exact_fused(const Pose& truth, const TransmitPattern& pat, double var) {
  ExactPoseCase c;
  c.ctx.bs = {32, 32};
  c.ctx.ms = {16, 16};
  c.ctx.pattern = pat;
  c.ctx.lambda = kSpeedOfLight / 28e9;
  c.truth = truth;
  c.state = init_messages(16, 1, pat.size(), AppleConfig{});
  for (int t = 0; t < pat.size(); ++t) {
    c.state.fused[c.state.kt(0, t)] = {ms_antenna_global_position(truth, c.ctx.local(t)), var * Mat3::Identity()};
    c.state.fused_valid[c.state.kt(0, t)] = true;
  }
  return c;
}

TEST(ApplePose, ExactPointsRecoverPose) {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    Pose truth{Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, 4, 7)), test::random_attitude(rng)};
    ExactPoseCase c = exact_fused(truth, TransmitPattern::t5(16), 1e-8);
    const AppleConfig cfg;
    update_pose_messages(c.state, c.ctx, 0, cfg);
    for (int t = 0; t < 5; ++t) {
      const PoseMessage& m = c.state.pose[c.state.kt(0, t)];
      EXPECT_LT((m.position - truth.position).norm(), 1e-6);
      EXPECT_LT((rotation_basis(m.attitude) - rotation_basis(truth.attitude).matrix()).norm(), 1e-6);
      EXPECT_TRUE(symmetric_psd(m.cov));
    }
    const std::vector<PoseEstimate> est = final_map(c.state, c.ctx, cfg);
    EXPECT_LT((est[0].position - truth.position).norm(), 1e-6);
    EXPECT_LT((est[0].basis.matrix() - rotation_basis(truth.attitude).matrix()).norm(), 1e-6);
  }
}

TEST(ApplePose, ZeroAttitudeGivesIdentityBasis) {
  ExactPoseCase c = exact_fused(Pose{Vec3(0.5, -0.3, 6.0), EulerAngles(0, 0, 0)}, TransmitPattern::t5(16), 1e-8);
  const std::vector<PoseEstimate> est = final_map(c.state, c.ctx, AppleConfig{});
  EXPECT_LT((est[0].basis.ex - Vec3::UnitX()).norm(), 1e-7);
  EXPECT_LT((est[0].basis.ey - Vec3::UnitY()).norm(), 1e-7);
}

TEST(ApplePose, CollinearPatternLeavesRotationAboutLineUnobservable) {
  const TransmitPattern line({GridIndex{1, 8}, GridIndex{8, 8}, GridIndex{16, 8}});
  ExactPoseCase c = exact_fused(Pose{Vec3(0.5, -0.3, 6.0), EulerAngles(0.2, 0.1, -0.4)}, line, 1e-6);
  const std::vector<PoseEstimate> est = final_map(c.state, c.ctx, AppleConfig{});
  Eigen::SelfAdjointEigenSolver<Mat3> es(est[0].covariance.bottomRightCorner<3, 3>());
  EXPECT_GT(es.eigenvalues().maxCoeff(), 1e3);
  // The line sits off the array centre, so only the antennas on it are pinned down.
  for (const GridIndex& g : line.slots()) {
    const Vec2 q = ms_local_antenna_position(c.ctx.ms, g.u, g.v, c.ctx.lambda);
    EXPECT_LT((est[0].position + est[0].basis.matrix() * q - ms_antenna_global_position(c.truth, q)).norm(), 1e-4);
  }
}

TEST(ApplePose, ConcentratedPriorsWinOverFlatData) {
  Pose truth{Vec3(0.5, -0.3, 6.0), EulerAngles(0.4, -0.3, 1.2)};
  ExactPoseCase c = exact_fused(truth, TransmitPattern::t5(16), 1e12);
  AppleConfig cfg;
  cfg.position_prior_std = 1e-3;
  cfg.attitude_prior = {VonMises(0.4, 1e8), VonMises(-0.6, 1e8), VonMises(1.2, 1e8)};
  const std::vector<PoseEstimate> est = final_map(c.state, c.ctx, cfg);
  EXPECT_LT(est[0].position.norm(), 1e-3);
  EXPECT_LT((est[0].attitude.vector() - truth.attitude.vector()).norm(), 1e-4);
}

TEST(AppleProjection, Rules) {
  PoseMessage pm;
  pm.position = Vec3(1, 2, 5);
  pm.attitude = Vec3(0.3, -0.2, 0.9);
  pm.cov = Mat6::Zero();
  pm.cov.topLeftCorner<3, 3>() = (Mat3() << 2e-4, 1e-5, 0, 1e-5, 3e-4, 0, 0, 0, 1e-4).finished();
  const Vec2 q(0.03, -0.02);
  const GaussianBelief a = project_pose_to_antennas(pm, q);
  EXPECT_EQ(a.cov, Mat3(pm.cov.topLeftCorner<3, 3>()));
  EXPECT_LT((a.mean - (pm.position + rotation_basis(pm.attitude) * q)).norm(), 1e-15);
  pm.cov.bottomRightCorner<3, 3>() = 1e-2 * Mat3::Identity();
  const GaussianBelief c = project_pose_to_antennas(pm, Vec2::Zero());
  EXPECT_EQ(c.mean, pm.position);
  EXPECT_LT((c.cov - pm.cov.topLeftCorner<3, 3>()).norm(), 1e-18);
  const GaussianBelief d = project_pose_to_antennas(pm, q);
  EXPECT_GT(d.cov.trace(), a.cov.trace());
  EXPECT_TRUE(symmetric_psd(d.cov));
}

TEST(AppleFeedback, SingleSubarrayPassesPoseMessage) {
  const double lambda = kSpeedOfLight / 28e9;
  const PartitionPlan plan = uniform_partition({8, 8}, 1, 1, lambda);
  MessageState st = init_messages(1, 1, 1, AppleConfig{});
  st.from_pose[0] = {Vec3(1, 2, 3), 0.5 * Mat3::Identity()};
  st.extrinsic[0] = {VonMises(0.1, 10), VonMises(0.2, 10)};
  const GaussianBelief g = feedback_message(st, plan, 0, 0, 0, AppleConfig{});
  EXPECT_EQ(g.mean, st.from_pose[0].mean);
  EXPECT_EQ(g.cov, st.from_pose[0].cov);
}

TEST(AppleFeedback, InformationFormProduct) {
  const double lambda = kSpeedOfLight / 28e9;
  const PartitionPlan plan = uniform_partition({32, 32}, 4, 4, lambda);
  const Vec3 p(0.4, -0.2, 5.0);
  MessageState st = init_messages(16, 1, 1, AppleConfig{});
  for (int m = 0; m < 16; ++m) st.extrinsic[st.mkt(m, 0, 0)] = exact_ext(p, plan.subarrays()[static_cast<std::size_t>(m)].ref_position, 1e4);
  fuse_antenna_position(st, plan, 0, 0, AppleConfig{});
  st.from_pose[0] = {p + Vec3(0.01, 0, -0.02), 1e-3 * Mat3::Identity()};
  const GaussianBelief g = feedback_message(st, plan, 3, 0, 0, AppleConfig{});
  // Gamma: the fusion of every subarray except 3.
  std::vector<Vec3> refs;
  std::vector<VmPair> ext;
  for (int m = 0; m < 16; ++m) {
    if (m == 3) continue;
    refs.push_back(plan.subarrays()[static_cast<std::size_t>(m)].ref_position);
    ext.push_back(st.extrinsic[st.mkt(m, 0, 0)]);
  }
  const LaplaceResult gamma = laplace_fit(FusionObjective(refs, ext).smooth(), Eigen::VectorXd(st.fused[0].mean));
  const Mat3 info = st.from_pose[0].cov.inverse() + Mat3(gamma.belief.cov.inverse());
  EXPECT_LT((Mat3(g.cov.inverse()) - info).norm() / info.norm(), 1e-9);
  EXPECT_TRUE(symmetric_psd(g.cov));
}

TEST(AppleRun, SingleMsRunsOneIteration) {
  EXPECT_EQ(AppleConfig{}.resolved_iterations(1), 1);
  EXPECT_EQ(AppleConfig{}.resolved_iterations(3), 5);
}

TEST(AppleRun, DeterministicReplay) {
  const ExperimentConfig cfg = test::desk_config(2, 15.0);
  const ScenarioConfig s = test::desk_scene(cfg, 21);
  const PartitionPlan plan = make_plan(cfg);
  const ReceivedSignal y = simulate_received(s, 99);
  const EstimationContext ctx = estimation_context(s);
  const AppleResult a = run_apple(y, ctx, plan, cfg.apple);
  const AppleResult b = run_apple(y, ctx, plan, cfg.apple);
  for (std::size_t k = 0; k < a.poses.size(); ++k) {
    EXPECT_EQ(a.poses[k].position, b.poses[k].position);
    EXPECT_EQ(a.poses[k].attitude.vector(), b.poses[k].attitude.vector());
    EXPECT_EQ(a.poses[k].covariance, b.poses[k].covariance);
  }
}

TEST(AppleRun, ManualPipelineMatchesRunAndKeepsMessagesPsd) {
  const ExperimentConfig cfg = test::desk_config(2, 20.0);
  const ScenarioConfig s = test::desk_scene(cfg, 4);
  const PartitionPlan plan = make_plan(cfg);
  const ReceivedSignal y = simulate_received(s, 5);
  const EstimationContext ctx = estimation_context(s);
  const AppleConfig& ac = cfg.apple;
  MessageState st = init_messages(plan.size(), ctx.K, ctx.T(), ac);
  const int iters = ac.resolved_iterations(ctx.K);
  for (int it = 0; it < iters; ++it) {
    st.iteration = it;
    aoa_module_pass(st, y, plan, ctx, ac);
    for (int t = 0; t < st.T; ++t) {
      for (int k = 0; k < st.K; ++k) EXPECT_TRUE(symmetric_psd(fuse_antenna_position(st, plan, k, t, ac).cov));
    }
    for (int k = 0; k < st.K; ++k) update_pose_messages(st, ctx, k, ac);
    for (const PoseMessage& pm : st.pose) EXPECT_TRUE(symmetric_psd(pm.cov));
    if (it + 1 == iters) break;
    for (int t = 0; t < st.T; ++t) {
      for (int k = 0; k < st.K; ++k) {
        st.from_pose[st.kt(k, t)] = project_pose_to_antennas(st.pose[st.kt(k, t)], ctx.local(t));
        EXPECT_TRUE(symmetric_psd(st.from_pose[st.kt(k, t)].cov));
      }
    }
    for (int t = 0; t < st.T; ++t) {
      for (int m = 0; m < st.M; ++m) {
        for (int k = 0; k < st.K; ++k) {
          st.to_aoa[st.mkt(m, k, t)] = feedback_message(st, plan, m, k, t, ac);
          EXPECT_TRUE(symmetric_psd(st.to_aoa[st.mkt(m, k, t)].cov));
        }
      }
    }
  }
  const std::vector<PoseEstimate> manual = final_map(st, ctx, ac);
  const AppleResult run = run_apple(y, ctx, plan, ac);
  for (std::size_t k = 0; k < manual.size(); ++k) {
    EXPECT_EQ(manual[k].position, run.poses[k].position);
    EXPECT_TRUE(symmetric_psd(manual[k].covariance));
  }
}

TEST(AppleRun, LeaveOneOutIgnoresOwnSlot) {
  Pose truth{Vec3(0.4, 0.3, 6.0), EulerAngles(0.1, 0.2, 0.3)};
  const TransmitPattern two({GridIndex{1, 1}, GridIndex{16, 16}});
  ExactPoseCase a = exact_fused(truth, two, 1e-6);
  ExactPoseCase b = a;
  b.state.fused[b.state.kt(0, 0)].mean += Vec3(0.05, -0.02, 0.1);
  update_pose_messages(a.state, a.ctx, 0, AppleConfig{});
  update_pose_messages(b.state, b.ctx, 0, AppleConfig{});
  EXPECT_EQ(a.state.pose[0].position, b.state.pose[0].position);
  EXPECT_EQ(a.state.pose[0].attitude, b.state.pose[0].attitude);
  EXPECT_NE(a.state.pose[1].position, b.state.pose[1].position);
}

TEST(AppleRun, TranslationEquivariance) {
  ExperimentConfig cfg = test::desk_config();
  const PartitionPlan plan = make_plan(cfg);
  for (std::uint64_t seed : {2u, 6u, 10u}) {
    const ScenarioConfig s = test::desk_scene(cfg, seed);
    ScenarioConfig moved = s;
    const Vec3 d(0.12, -0.07, 0.25);
    moved.poses[0].position += d;
    const AppleResult a = run_apple(swff_signal(s, plan), estimation_context(s), plan, cfg.apple);
    const AppleResult b = run_apple(swff_signal(moved, plan), estimation_context(moved), plan, cfg.apple);
    EXPECT_LT((b.poses[0].position - a.poses[0].position - d).norm(), 1e-4);
  }
}

TEST(AppleRun, ThreeMsNoiselessDeskScale) {
  ExperimentConfig cfg = test::desk_config(3);
  cfg.scenario.noise_var_w = 0.0;
  const ScenarioConfig s = test::desk_scene(cfg, 1);
  const PartitionPlan plan = make_plan(cfg);
  const AppleResult r = run_apple(simulate_received(s, 1), estimation_context(s), plan, cfg.apple);
  const TrialErrors e = trial_errors(r.poses, s.poses);
  EXPECT_LT(std::sqrt(e.squared_position / 3.0), 0.02);
  EXPECT_LT(e.rotation_nmse / 3.0, 1e-2);
}

TEST(AppleAssignment, BestPermutation) {
  const std::vector<Vec2> ref{Vec2(0.1, 0.2), Vec2(-0.5, 0.3), Vec2(0.9, -0.9)};
  const std::vector<Vec2> comp{Vec2(-0.95, -0.9), Vec2(0.11, 0.19), Vec2(-0.5, 0.31)};
  const std::vector<int> p = best_assignment(ref, comp);
  EXPECT_EQ(p, (std::vector<int>{1, 2, 0}));  // 0.9 and -0.95 are close after wrapping
}

}  // namespace
}  // namespace nfpose
