#include "nfpose/circular.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace nfpose {

VonMises::VonMises(double mean, double kappa) {
  if (!std::isfinite(mean)) throw std::invalid_argument("VM mean must be finite");
  if (std::isnan(kappa) || kappa < 0.0) throw std::invalid_argument("VM concentration must be >= 0");
  mean_ = wrap_angle(mean);
  kappa_ = std::min(kappa, kKappaMax);
}

double log_bessel_i0(double kappa) {
  if (kappa < 0.0) kappa = -kappa;
  if (kappa <= 50.0) {
    const double q = kappa * kappa / 4.0;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 500; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::log(sum);
  }
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 30; ++k) {
    const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (k * 8.0 * kappa);
    if (next > term) break;
    term = next;
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return kappa - 0.5 * std::log(2.0 * kPi * kappa) + std::log(sum);
}

double vm_log_pdf(const VonMises& d, double angle) {
  return d.kappa() * std::cos(angle - d.mean()) - std::log(2.0 * kPi) - log_bessel_i0(d.kappa());
}

namespace {
VonMises from_phasor(std::complex<double> z) {
  const double k = std::abs(z);
  return VonMises(k > 0.0 ? std::arg(z) : 0.0, k);
}
}  // namespace

VonMises vm_multiply(const VonMises& a, const VonMises& b) {
  return from_phasor(std::polar(a.kappa(), a.mean()) + std::polar(b.kappa(), b.mean()));
}

VonMises vm_extrinsic(const VonMises& post, const VonMises& pri) {
  return from_phasor(std::polar(post.kappa(), post.mean()) - std::polar(pri.kappa(), pri.mean()));
}

VmPair gaussian_to_vm(const GaussianBelief& belief, const Vec3& subarray_ref) {
  if (belief.mean.size() != 3 || belief.cov.rows() != 3 || belief.cov.cols() != 3) {
    throw std::invalid_argument("gaussian_to_vm expects a 3-D belief");
  }
  const Vec3 d = belief.mean - subarray_ref;
  const double dist = d.norm();
  if (!(dist > 0.0)) throw std::invalid_argument("belief mean coincides with the subarray reference");
  const Vec3 dh = d / dist;
  const Eigen::Matrix3d c = belief.cov;
  auto axis = [&](const Vec3& e) {
    const double phi = std::clamp(dh.dot(e), -1.0, 1.0);
    const Vec3 w = e - phi * dh;
    const double wn = w.norm();
    const double one_minus = 1.0 - phi * phi;
    if (wn < 1e-12 || one_minus <= 0.0) return VonMises(kPi * phi, kKappaMax);
    const Vec3 v = w / wn;
    const double denom = kPi * kPi * one_minus * v.dot(c * v);
    if (!(denom > 0.0)) return VonMises(kPi * phi, kKappaMax);
    return VonMises(kPi * phi, dist * dist / denom);
  };
  return {axis(Vec3::UnitX()), axis(Vec3::UnitY())};
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(std::numeric_limits<double>::min());
  const Eigen::MatrixXd inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (inv + inv.transpose());
}

GaussianBelief gaussian_product(const GaussianBelief& a, const GaussianBelief& b) {
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("dimension mismatch");
  const Eigen::MatrixXd ia = spd_inverse(a.cov);
  const Eigen::MatrixXd ib = spd_inverse(b.cov);
  GaussianBelief out;
  out.cov = spd_inverse(ia + ib);
  out.mean = out.cov * (ia * a.mean + ib * b.mean);
  return out;
}

}  // namespace nfpose
