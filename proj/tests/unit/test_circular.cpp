#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "nfpose/circular.hpp"
#include "scenes.hpp"

namespace nfpose {
namespace {

constexpr int kGrid = 8192;

double grid_angle(int i) { return -kPi + 2.0 * kPi * i / kGrid; }

// Rectangle rule on a periodic integrand.
double integrate(const std::function<double(double)>& f) {
  double s = 0.0;
  for (int i = 0; i < kGrid; ++i) s += f(grid_angle(i));
  return s * 2.0 * kPi / kGrid;
}

double sup_distance(const std::function<double(double)>& f, const VonMises& d) {
  double worst = 0.0;
  for (int i = 0; i < kGrid; ++i) worst = std::max(worst, std::abs(f(grid_angle(i)) - std::exp(vm_log_pdf(d, grid_angle(i)))));
  return worst;
}

TEST(VonMises, UniformAtZeroConcentration) {
  for (double a : {-3.0, -1.0, 0.0, 2.5}) EXPECT_NEAR(vm_log_pdf(VonMises(0.7, 0.0), a), -std::log(2 * kPi), 1e-15);
}

TEST(VonMises, LogPdfAtMean) {
  EXPECT_NEAR(log_bessel_i0(1.0), 0.235914358, 1e-9);
  EXPECT_NEAR(vm_log_pdf(VonMises(0.4, 1.0), 0.4), 1.0 - std::log(2 * kPi) - 0.23591435850717854, 1e-12);
}

TEST(VonMises, LogBesselMatchesLibrary) {
  for (double k : {1e-6, 0.3, 4.0, 49.9, 50.1, 120.0, 600.0}) {
    EXPECT_NEAR(log_bessel_i0(k), std::log(std::cyl_bessel_i(0.0, k)), 1e-12 * std::max(1.0, k));
  }
}

TEST(VonMises, DensityIntegratesToOne) {
  for (double k : {0.0, 0.5, 3.0, 40.0, 300.0}) {
    const VonMises d(1.1, k);
    EXPECT_NEAR(integrate([&](double a) { return std::exp(vm_log_pdf(d, a)); }), 1.0, 1e-8);
  }
}

TEST(VonMises, MultiplyAlignedAndOpposed) {
  const VonMises a = vm_multiply(VonMises(0, 2), VonMises(0, 3));
  EXPECT_NEAR(a.mean(), 0.0, 1e-15);
  EXPECT_NEAR(a.kappa(), 5.0, 1e-15);
  EXPECT_NEAR(vm_multiply(VonMises(0, 2), VonMises(kPi, 2)).kappa(), 0.0, 1e-14);
}

TEST(VonMises, MultiplyMatchesDenseGrid) {
  Rng rng(31);
  for (int i = 0; i < 50; ++i) {
    const VonMises a(uniform(rng, -kPi, kPi), uniform(rng, 0, 20));
    const VonMises b(uniform(rng, -kPi, kPi), uniform(rng, 0, 20));
    auto prod = [&](double x) { return std::exp(vm_log_pdf(a, x) + vm_log_pdf(b, x)); };
    const double z = integrate(prod);
    EXPECT_LT(sup_distance([&](double x) { return prod(x) / z; }, vm_multiply(a, b)), 1e-9);
  }
}

TEST(VonMises, ExtrinsicExamples) {
  const VonMises e = vm_extrinsic(VonMises(0, 5), VonMises(0, 2));
  EXPECT_NEAR(e.mean(), 0.0, 1e-15);
  EXPECT_NEAR(e.kappa(), 3.0, 1e-15);
  EXPECT_NEAR(vm_extrinsic(VonMises(1.3, 7), VonMises(1.3, 7)).kappa(), 0.0, 1e-15);
}

TEST(VonMises, ExtrinsicMatchesComplexArithmetic) {
  Rng rng(32);
  for (int i = 0; i < 200; ++i) {
    const double kp = uniform(rng, 0, 50), xp = uniform(rng, -kPi, kPi);
    const double kq = uniform(rng, 0, 50), xq = uniform(rng, -kPi, kPi);
    const std::complex<double> z = kp * std::exp(std::complex<double>(0, xp)) - kq * std::exp(std::complex<double>(0, xq));
    const VonMises e = vm_extrinsic(VonMises(xp, kp), VonMises(xq, kq));
    EXPECT_NEAR(e.kappa(), std::abs(z), 1e-12 * std::max(1.0, std::abs(z)));
    if (std::abs(z) > 1e-6) EXPECT_NEAR(std::abs(std::remainder(e.mean() - std::arg(z), 2 * kPi)), 0.0, 1e-12);
  }
}

TEST(VonMises, ExtrinsicMatchesDenseGridRatio) {
  Rng rng(33);
  for (int i = 0; i < 30; ++i) {
    const VonMises post(uniform(rng, -kPi, kPi), uniform(rng, 5, 20));
    const VonMises pri(uniform(rng, -kPi, kPi), uniform(rng, 0, 5));
    auto ratio = [&](double x) { return std::exp(vm_log_pdf(post, x) - vm_log_pdf(pri, x)); };
    const double z = integrate(ratio);
    EXPECT_LT(sup_distance([&](double x) { return ratio(x) / z; }, vm_extrinsic(post, pri)), 1e-9);
  }
}

TEST(VonMises, ConcentrationClamped) {
  EXPECT_EQ(VonMises(0, 1e300).kappa(), kKappaMax);
  EXPECT_THROW(VonMises(0, -1), std::invalid_argument);
  EXPECT_NEAR(VonMises(3 * kPi, 1).mean(), -kPi, 1e-12);
}

TEST(GaussianToVm, BroadsideExample) {
  const VmPair v = gaussian_to_vm({Vec3(0, 0, 10), 0.01 * Mat3::Identity()}, Vec3::Zero());
  EXPECT_NEAR(v.x.mean(), 0.0, 1e-15);
  EXPECT_NEAR(v.y.mean(), 0.0, 1e-15);
  EXPECT_NEAR(v.x.kappa(), 100.0 / (0.01 * kPi * kPi), 1e-9);
  EXPECT_NEAR(v.y.kappa(), 1013.21, 0.01);
}

TEST(GaussianToVm, PointMassClamps) {
  const VmPair v = gaussian_to_vm({Vec3(0.3, -0.2, 4), Mat3::Zero()}, Vec3(0.01, 0, 0));
  EXPECT_EQ(v.x.kappa(), kKappaMax);
  EXPECT_EQ(v.y.kappa(), kKappaMax);
}

TEST(GaussianToVm, MatchesMonteCarloMoments) {
  Rng rng(34);
  const Vec3 ref(0.05, -0.03, 0.0);
  const std::vector<std::pair<Vec3, Mat3>> cases{
      {Vec3(1.0, 0.5, 6.0), Eigen::Vector3d(0.01, 0.02, 0.015).asDiagonal()},
      {Vec3(-2.0, 1.5, 4.0), 0.004 * Mat3::Identity()},
      {Vec3(0.3, -3.0, 5.0), (Mat3() << 0.02, 0.005, 0, 0.005, 0.01, -0.003, 0, -0.003, 0.03).finished()}};
  for (const auto& [mean, cov] : cases) {
    ASSERT_GT((mean - ref).squaredNorm() / cov.trace(), 100.0);
    const VmPair fit = gaussian_to_vm({mean, cov}, ref);
    const Eigen::LLT<Mat3> llt(cov);
    const int n = 200000;
    std::complex<double> sx = 0, sy = 0;
    std::normal_distribution<double> g(0, 1);
    for (int i = 0; i < n; ++i) {
      const Vec3 p = mean + llt.matrixL() * Vec3(g(rng), g(rng), g(rng));
      const Vec2 c = aoa_cosines(p, ref);
      sx += std::exp(std::complex<double>(0, kPi * c.x()));
      sy += std::exp(std::complex<double>(0, kPi * c.y()));
    }
    sx /= n;
    sy /= n;
    for (const auto& [s, vm] : {std::pair{sx, fit.x}, std::pair{sy, fit.y}}) {
      const double var_mc = 1.0 - std::abs(s);
      const double var_vm = 1.0 - std::cyl_bessel_i(1.0, vm.kappa()) / std::cyl_bessel_i(0.0, vm.kappa());
      EXPECT_LT(std::abs(var_mc - var_vm) / var_vm, 0.05);
      EXPECT_LT(std::abs(std::remainder(std::arg(s) - vm.mean(), 2 * kPi)), 0.05 * std::sqrt(2 * var_vm));
    }
  }
}

TEST(GaussianProduct, IdenticalHalvesCovariance) {
  const GaussianBelief a{Vec3(1, 2, 3), (Mat3() << 2, 0.3, 0, 0.3, 1, 0.1, 0, 0.1, 0.5).finished()};
  const GaussianBelief p = gaussian_product(a, a);
  EXPECT_LT((p.mean - a.mean).norm(), 1e-12);
  EXPECT_LT((p.cov - 0.5 * a.cov).norm(), 1e-12);
}

TEST(GaussianProduct, MatchesClosedForm) {
  Rng rng(35);
  for (int i = 0; i < 100; ++i) {
    Mat3 l1 = Mat3::Random(), l2 = Mat3::Random();
    const Mat3 c1 = l1 * l1.transpose() + 0.1 * Mat3::Identity();
    const Mat3 c2 = l2 * l2.transpose() + 0.1 * Mat3::Identity();
    const Vec3 m1 = Vec3::Random(), m2 = Vec3::Random();
    const Mat3 s = (c1 + c2).inverse();
    const Mat3 c = c1 * s * c2;
    const Vec3 m = c2 * s * m1 + c1 * s * m2;
    const GaussianBelief p = gaussian_product({m1, c1}, {m2, c2});
    EXPECT_LT((p.cov - c).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((p.mean - m).cwiseAbs().maxCoeff(), 1e-10);
    // Information form.
    EXPECT_LT((p.cov.inverse() - c1.inverse() - c2.inverse()).cwiseAbs().maxCoeff(), 1e-8 * c1.inverse().norm());
  }
}

}  // namespace
}  // namespace nfpose
