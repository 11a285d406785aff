#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nfpose/circular.hpp"
#include "nfpose/laplace.hpp"

namespace nfpose {

struct SubarraySnapshot {
  Eigen::MatrixXcd samples;  // nx x ny, (i, j) 0-based storage of 1-based (i, j)
  double noise_var = 0.0;
};

struct AoaEstimatorOptions {
  int max_sweeps = 20;
  double move_tol = 1e-6;
  int grid_oversampling = 4;
  // Noise variance used when the supplied one is zero, relative to mean |Y|^2.
  double noise_floor_rel = 1e-14;
  LaplaceOptions ascent{.grad_tol = 1e-10, .max_iterations = 50};
};

struct AoaSourcePosterior {
  VmPair aoa;                      // over pi*phi
  Vec2 cosines = Vec2::Zero();     // maximizer, wrapped to [-1, 1)
  std::complex<double> coef_mean;
  double coef_var = 0.0;
  bool curvature_fallback = false;  // kappa_post replaced by kappa_pri on some axis
};

struct AoaEstimate {
  std::vector<AoaSourcePosterior> sources;  // same order as priors
  int sweeps = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // joint MAP objective after init and each sweep
};

AoaEstimate estimate_aoa_posteriors(const SubarraySnapshot& snapshot, std::span<const VmPair> priors,
                                    double coef_prior_var, const AoaEstimatorOptions& opts = {});

std::vector<VmPair> extrinsic_from_posterior(std::span<const AoaSourcePosterior> post,
                                             std::span<const VmPair> priors);

// Local objective of one source given the residual: marginal log-likelihood of
// the coefficient plus VM log-priors (constants dropped). Exposed for tests.
struct SourceObjective {
  const Eigen::MatrixXcd* residual = nullptr;
  VmPair prior;
  double weight = 0.0;  // coef_var_prior / (noise (noise + N coef_var_prior))

  double value(const Vec2& phi) const;
  Vec2 gradient(const Vec2& phi) const;
  Eigen::Matrix2d hessian(const Vec2& phi) const;
};

}  // namespace nfpose
