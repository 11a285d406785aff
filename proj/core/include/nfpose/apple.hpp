#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "nfpose/aoa_estimator.hpp"
#include "nfpose/channel.hpp"
#include "nfpose/circular.hpp"
#include "nfpose/laplace.hpp"
#include "nfpose/partition.hpp"

namespace nfpose {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// What an estimator may know about a scenario: geometry, not poses.
struct EstimationContext {
  UraSpec bs;
  UraSpec ms;
  TransmitPattern pattern;
  double lambda = 0.0;
  int K = 1;
  double noise_var = 0.0;
  double tx_power_w = 0.0;

  int T() const { return pattern.size(); }
  Vec2 local(int t) const;
};

EstimationContext estimation_context(const ScenarioConfig& scenario);

struct PoseEstimate {
  Vec3 position = Vec3::Zero();
  EulerAngles attitude;
  RotationBasis basis;
  Mat6 covariance = Mat6::Identity();
  bool converged = false;
};

struct AppleConfig {
  int iterations = 0;  // 0 selects 1 for K = 1 and 5 otherwise
  double sigma_ini = 100.0;
  double coef_prior_var = 0.0;  // 0 selects the link budget at nominal_range
  double nominal_range = 6.5;
  double position_prior_std = 1e3;
  std::array<VonMises, 3> attitude_prior{VonMises(0.0, 1e-6), VonMises(0.0, 1e-6),
                                         VonMises(0.0, 1e-6)};
  LaplaceOptions ascent;
  AoaEstimatorOptions aoa;

  int resolved_iterations(int K) const { return iterations > 0 ? iterations : (K == 1 ? 1 : 5); }
  double resolved_coef_prior_var(const EstimationContext& ctx) const;
};

struct PoseMessage {
  Vec3 position = Vec3::Zero();
  Vec3 attitude = Vec3::Zero();  // unconstrained roll, pitch, yaw
  Mat6 cov = Mat6::Identity();
  bool valid = false;
};

struct AppleDiagnostics {
  int aoa_curvature_fallbacks = 0;
  int fusion_nonconverged = 0;
  int fusion_flat = 0;
  int pose_regularized = 0;
  int gamma_dropped = 0;
  int final_nonconverged = 0;
};

struct MessageState {
  int M = 0, K = 0, T = 0;
  int iteration = 0;
  std::vector<GaussianBelief> to_aoa;           // (m,k,t) position -> AoA factor
  std::vector<VmPair> prior_vm;                 // (m,k,t)
  std::vector<AoaSourcePosterior> posterior;    // (m,k,t)
  std::vector<VmPair> extrinsic;                // (m,k,t)
  std::vector<GaussianBelief> fused;            // (k,t) antenna position -> pose factor
  std::vector<bool> fused_valid;                // (k,t)
  std::vector<PoseMessage> pose;                // (k,t) leave-one-out pose
  std::vector<GaussianBelief> from_pose;        // (k,t) pose factor -> antenna position
  AppleDiagnostics diag;

  std::size_t mkt(int m, int k, int t) const { return static_cast<std::size_t>((t * M + m) * K + k); }
  std::size_t kt(int k, int t) const { return static_cast<std::size_t>(t * K + k); }
};

// Sum over subarrays of kappa_ext (cos(pi phi_l(p) - chi_ext) - 1); the shift
// by -sum(kappa) keeps values small near the mode.
class FusionObjective {
 public:
  FusionObjective(std::vector<Vec3> refs, std::vector<VmPair> ext);

  double value(const Vec3& p) const;
  Vec3 gradient(const Vec3& p) const;
  Mat3 hessian(const Vec3& p) const;
  double total_kappa() const;
  SmoothObjective smooth() const;

 private:
  std::vector<Vec3> refs_;
  std::vector<VmPair> ext_;
};

// Log-posterior of one MS pose given Gaussian antenna-position observations.
// Leaving one observation out gives J; using all gives Q.
class PoseObjective {
 public:
  PoseObjective(std::vector<Vec2> local, std::vector<GaussianBelief> obs, double position_prior_std,
                std::array<VonMises, 3> attitude_prior);

  double value(const Vec6& x) const;
  Vec6 gradient(const Vec6& x) const;
  SmoothObjective smooth() const;

 private:
  std::vector<Vec2> local_;
  std::vector<Vec3> mean_;
  std::vector<Mat3> precision_;
  double inv_var_p_;
  std::array<VonMises, 3> prior_;
};

MessageState init_messages(int M, int K, int T, const AppleConfig& cfg);

void aoa_module_pass(MessageState& state, const ReceivedSignal& signal, const PartitionPlan& plan,
                     const EstimationContext& ctx, const AppleConfig& cfg);

GaussianBelief fuse_antenna_position(MessageState& state, const PartitionPlan& plan, int k, int t,
                                     const AppleConfig& cfg);

void update_pose_messages(MessageState& state, const EstimationContext& ctx, int k,
                          const AppleConfig& cfg);

GaussianBelief project_pose_to_antennas(const PoseMessage& pose, const Vec2& local);

GaussianBelief feedback_message(MessageState& state, const PartitionPlan& plan, int m, int k, int t,
                                const AppleConfig& cfg);

std::vector<PoseEstimate> final_map(MessageState& state, const EstimationContext& ctx,
                                    const AppleConfig& cfg);

struct AppleResult {
  std::vector<PoseEstimate> poses;
  AppleDiagnostics diagnostics;
};

AppleResult run_apple(const ReceivedSignal& signal, const EstimationContext& ctx,
                      const PartitionPlan& plan, const AppleConfig& cfg = {});

// Kabsch fit of a rigid MS to antenna points followed by local ascent of the
// pose objective; also tries the depth-mirrored fit. Used by final_map and
// update_pose_messages when no previous estimate exists.
PoseMessage fit_pose(const PoseObjective& objective, const std::vector<Vec2>& local,
                     const std::vector<Vec3>& points, const LaplaceOptions& opts,
                     const PoseMessage* warm_start, bool* regularized = nullptr);

PoseEstimate to_pose_estimate(const PoseMessage& msg, bool converged);

// perm[l] = index into comp matched to ref[l], minimizing the summed wrapped
// cosine distance over all permutations.
std::vector<int> best_assignment(const std::vector<Vec2>& ref, const std::vector<Vec2>& comp);

}  // namespace nfpose
