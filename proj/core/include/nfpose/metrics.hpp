#pragma once

#include <vector>

#include "nfpose/apple.hpp"

namespace nfpose {

// Errors of one trial, summed over MSs after matching estimates to truths.
struct TrialErrors {
  double squared_position = 0.0;  // sum_k |p_k - p_hat_k|^2
  double rotation_nmse = 0.0;     // sum_k |R_k - R_hat_k|_F^2 / |R_k|_F^2
  std::vector<int> assignment;    // assignment[k] = estimate used for truth k
};

// Estimates carry no MS labels, so the permutation with the smallest summed
// squared position error is used.
TrialErrors trial_errors(const std::vector<PoseEstimate>& estimates, const std::vector<Pose>& truths);

struct Metrics {
  double rmse = 0.0;
  double nmse = 0.0;
  int trials = 0;
};

Metrics compute_metrics(const std::vector<std::vector<PoseEstimate>>& estimates,
                        const std::vector<std::vector<Pose>>& truths);

// Trial-averaged form used by the sweep runner.
Metrics aggregate(const std::vector<TrialErrors>& trials);

}  // namespace nfpose
