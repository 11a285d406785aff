#pragma once

#include <Eigen/Dense>

#include "nfpose/geometry.hpp"

namespace nfpose {

inline constexpr double kKappaMax = 1e20;

// Mean direction wrapped to [-pi, pi); concentration clamped to [0, kKappaMax].
class VonMises {
 public:
  VonMises() = default;
  VonMises(double mean, double kappa);

  double mean() const { return mean_; }
  double kappa() const { return kappa_; }

 private:
  double mean_ = 0.0;
  double kappa_ = 0.0;
};

struct VmPair {
  VonMises x;
  VonMises y;
};

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

double log_bessel_i0(double kappa);
double vm_log_pdf(const VonMises& d, double angle);

VonMises vm_multiply(const VonMises& a, const VonMises& b);
VonMises vm_extrinsic(const VonMises& post, const VonMises& pri);

// VM approximation of the AoA cosines (scaled by pi) induced by a Gaussian
// position belief, seen from a subarray reference antenna.
VmPair gaussian_to_vm(const GaussianBelief& belief, const Vec3& subarray_ref);

// Inverse of a symmetric positive definite matrix through its eigenvalues.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m);

// Information-form product of two Gaussians.
GaussianBelief gaussian_product(const GaussianBelief& a, const GaussianBelief& b);

}  // namespace nfpose
