#pragma once

#include <vector>

#include <Eigen/Dense>

#include "nfpose/channel.hpp"
#include "nfpose/partition.hpp"

namespace nfpose {

// Steps and thresholds used by the bound, in one place.
struct McrbConfig {
  double fd_rel_step = 1e-6;      // first derivatives of the steering matrices
  double second_rel_step = 1e-4;  // pose-pose second derivatives
  int lm_max_evaluations = 400;
  double lm_tol = 1e-14;
  double cond_max = 1e12;  // equilibrated condition number before pinv
  bool grid_fallback = false;
  double grid_span_position = 0.02;  // meters, each side
  double grid_span_attitude = 0.02;  // radians, each side
  int grid_points = 5;               // per axis, odd
};

// [p_1..p_K, theta_1..theta_K, Re/Im rho_(m,k,t) interleaved, m slowest, t fastest].
struct ParamVector {
  int K = 0, M = 0, T = 0;
  Eigen::VectorXd values;

  ParamVector() = default;
  ParamVector(int k, int m, int t);

  int pose_size() const { return 6 * K; }
  int size() const { return 6 * K + 2 * M * K * T; }
  int position_index(int k, int c) const { return 3 * k + c; }
  int attitude_index(int k, int c) const { return 3 * K + 3 * k + c; }
  // a in 0..5: position components then roll, pitch, yaw.
  int pose_index(int k, int a) const { return a < 3 ? position_index(k, a) : attitude_index(k, a - 3); }
  int rho_index(int m, int k, int t) const { return 6 * K + 2 * ((m * K + k) * T + t); }

  Vec3 position(int k) const { return values.segment<3>(position_index(k, 0)); }
  Vec3 attitude(int k) const { return values.segment<3>(attitude_index(k, 0)); }
  cd rho(int m, int k, int t) const;
  Eigen::VectorXd pose_part() const { return values.head(pose_size()); }
};

// True gamma_FF: scenario poses and the SWFF coefficients they induce.
ParamVector truth_parameters(const ScenarioConfig& scenario, const PartitionPlan& plan);

struct PseudotrueFit {
  ParamVector params;
  double residual = 0.0;        // sum_t |Omega_t - Omega_FF,t|_F^2 at the fit
  double truth_residual = 0.0;  // same with the pose held at the truth
  bool converged = false;
  int evaluations = 0;
};

// Minimizes the squared Frobenius mismatch over all slots: rho by linear least
// squares per (m, t), the pose by Levenberg-Marquardt from the truth.
PseudotrueFit pseudotrue_fit(const ScenarioConfig& scenario, const PartitionPlan& plan,
                             const McrbConfig& cfg = {});

// Projected mismatch and the optimal rho for a fixed pose vector (6K).
struct ProjectedResidual {
  double squared_norm = 0.0;
  Eigen::VectorXd stacked;  // [Re; Im] of every residual entry
  std::vector<cd> rho;      // indexed like SwffCoefficients, (t*M+m)*K+k
};
ProjectedResidual projected_residual(const ScenarioConfig& scenario, const PartitionPlan& plan,
                                     const Eigen::MatrixXcd& target, const Eigen::VectorXd& pose);

struct InformationMatrices {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

InformationMatrices information_matrices(const ParamVector& pseudotrue, const ScenarioConfig& scenario,
                                         const PartitionPlan& plan, double noise_var,
                                         const McrbConfig& cfg = {});

struct McrbResult {
  Eigen::MatrixXd lb;  // 6K x 6K
  ParamVector pseudotrue;
  Eigen::VectorXd bias;  // pseudotrue - truth over the pose part
  double bias_norm = 0.0;
  std::vector<double> position_trace;  // per MS, m^2
  std::vector<double> attitude_trace;  // per MS, rad^2
  double condition = 0.0;              // of the equilibrated A
  bool pinv_used = false;
  bool pseudotrue_converged = true;

  double position_bound(int k) const;  // sqrt of the trace
  double total_position_bound() const;  // sqrt of the summed traces
};

McrbResult lower_bound(const InformationMatrices& m, const ParamVector& pseudotrue,
                       const ParamVector& truth, const McrbConfig& cfg = {});

// Convenience: fit, matrices and bound for a scenario's noise level.
McrbResult compute_mcrb(const ScenarioConfig& scenario, const PartitionPlan& plan,
                        const McrbConfig& cfg = {});

// Inverse Fisher matrix of the exact near-field model over the 6K pose entries
// (gains known).
Eigen::MatrixXd exact_model_crb(const ScenarioConfig& scenario, const McrbConfig& cfg = {});

}  // namespace nfpose
