#include "nfpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nfpose {

TrialErrors trial_errors(const std::vector<PoseEstimate>& estimates, const std::vector<Pose>& truths) {
  if (estimates.size() != truths.size()) throw std::invalid_argument("estimate/truth count mismatch");
  const std::size_t K = truths.size();
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  TrialErrors best;
  double best_pos = std::numeric_limits<double>::infinity();
  do {
    double pos = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      pos += (truths[k].position - estimates[static_cast<std::size_t>(perm[k])].position).squaredNorm();
    }
    if (pos < best_pos) {
      best_pos = pos;
      best.assignment = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.squared_position = K == 0 ? 0.0 : best_pos;
  for (std::size_t k = 0; k < K; ++k) {
    const Mat32 r = rotation_basis(truths[k].attitude).matrix();
    const Mat32 rh = estimates[static_cast<std::size_t>(best.assignment[k])].basis.matrix();
    best.rotation_nmse += (r - rh).squaredNorm() / r.squaredNorm();
  }
  return best;
}

Metrics aggregate(const std::vector<TrialErrors>& trials) {
  Metrics m;
  m.trials = static_cast<int>(trials.size());
  if (trials.empty()) {
    m.rmse = m.nmse = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  double sp = 0.0, sr = 0.0;
  for (const TrialErrors& t : trials) {
    sp += t.squared_position;
    sr += t.rotation_nmse;
  }
  m.rmse = std::sqrt(sp / m.trials);
  m.nmse = sr / m.trials;
  return m;
}

Metrics compute_metrics(const std::vector<std::vector<PoseEstimate>>& estimates,
                        const std::vector<std::vector<Pose>>& truths) {
  if (estimates.size() != truths.size()) throw std::invalid_argument("trial count mismatch");
  std::vector<TrialErrors> t;
  for (std::size_t i = 0; i < truths.size(); ++i) t.push_back(trial_errors(estimates[i], truths[i]));
  return aggregate(t);
}

}  // namespace nfpose
