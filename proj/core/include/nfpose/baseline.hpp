#pragma once

#include <vector>

#include <Eigen/Dense>

#include "nfpose/apple.hpp"

namespace nfpose {

struct BaselineConfig {
  int grid_oversampling = 4;
  double fine_step = 1e-3;          // cosine step of the local grid
  double low_power_ratio = 25.0;    // peak / mean periodogram below this is flagged
  std::vector<double> start_ranges{1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
  double range_prior_mean = 0.0;
  double range_prior_std = 0.0;     // 0 disables the range prior
  int lm_max_evaluations = 2000;
};

struct FarFieldAoa {
  Vec2 cosines = Vec2::Zero();
  double power = 0.0;     // |a^H y|^2 / N at the peak
  double residual = 0.0;  // power left after cancelling this and earlier peaks
  bool low_power = false;
};

// Greedy peak picking with successive cancellation over the whole array.
std::vector<FarFieldAoa> farfield_aoa(const Eigen::VectorXcd& column, const UraSpec& bs, int K,
                                      const BaselineConfig& cfg = {});

struct BaselinePose {
  PoseEstimate pose;
  double cost = 0.0;  // summed squared cosine residuals
  bool collinear = false;
};

// Pose of one rigid MS from the direction cosines of its active antennas,
// seen from the array centre.
BaselinePose pose_from_aoas(const std::vector<Vec2>& cosines, const TransmitPattern& pattern,
                            const UraSpec& ms, double lambda, const BaselineConfig& cfg = {});

struct BaselineResult {
  std::vector<PoseEstimate> poses;
  int low_power_peaks = 0;
  int collinear = 0;
};

BaselineResult run_baseline(const ReceivedSignal& signal, const EstimationContext& ctx,
                            const BaselineConfig& cfg = {});

}  // namespace nfpose
