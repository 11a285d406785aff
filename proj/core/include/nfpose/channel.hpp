#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "nfpose/geometry.hpp"
#include "nfpose/partition.hpp"

namespace nfpose {

using cd = std::complex<double>;

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

struct ScenarioConfig {
  double carrier_hz = 28e9;
  UraSpec bs{32, 32};
  UraSpec ms{16, 16};
  std::vector<Pose> poses;
  TransmitPattern pattern;
  double tx_power_w = 0.1;
  double noise_var_w = 1e-10;
  std::vector<double> gains;  // empty means beta_k = 1
  double rician_k = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  bool allow_reactive = false;  // skip the Fresnel-distance check

  double wavelength() const { return wavelength_from_frequency(carrier_hz); }
  int num_ms() const { return static_cast<int>(poses.size()); }
  int num_slots() const { return pattern.size(); }
  double gain(int k) const;
  // Global position of MS k's antenna active in slot t (both 0-based).
  Vec3 active_antenna(int k, int t) const;
  void validate() const;
};

// N_B x T; row (u-1) + (v-1)*nx, column t.
struct ReceivedSignal {
  Eigen::MatrixXcd samples;

  int rows() const { return static_cast<int>(samples.rows()); }
  int slots() const { return static_cast<int>(samples.cols()); }
};

cd nearfield_channel_coeff(const Vec3& bs_antenna, const Vec3& ms_antenna, double beta, double lambda);

// Exact LoS signal without noise or scattering.
Eigen::MatrixXcd noiseless_received(const ScenarioConfig& scenario);

// Noise and NLoS streams are derived from seed independently of each other.
ReceivedSignal simulate_received(const ScenarioConfig& scenario, std::uint64_t seed);
inline ReceivedSignal simulate_received(const ScenarioConfig& scenario) {
  return simulate_received(scenario, scenario.seed);
}

struct SwffLink {
  cd gain;
  Vec2 cosines = Vec2::Zero();
  double distance = 0.0;
};

// Storage positions (m, k, t) are 0-based; subarray m here is descriptor m+1.
class SwffCoefficients {
 public:
  SwffCoefficients() = default;
  SwffCoefficients(int m, int k, int t)
      : M_(m), K_(k), T_(t), links_(static_cast<std::size_t>(m * k * t)) {}

  int M() const { return M_; }
  int K() const { return K_; }
  int T() const { return T_; }
  SwffLink& at(int m, int k, int t) { return links_[index(m, k, t)]; }
  const SwffLink& at(int m, int k, int t) const { return links_[index(m, k, t)]; }

 private:
  std::size_t index(int m, int k, int t) const {
    return static_cast<std::size_t>((t * M_ + m) * K_ + k);
  }
  int M_ = 0, K_ = 0, T_ = 0;
  std::vector<SwffLink> links_;
};

SwffCoefficients swff_coefficients(const ScenarioConfig& scenario, const PartitionPlan& plan);

// Upsilon(i,j) = exp(+j pi (i phi_x + j phi_y)), i, j 1-based; nx x ny.
Eigen::MatrixXcd steering_matrix(int nx, int ny, const Vec2& cosines);

ReceivedSignal swff_received(const SwffCoefficients& coeffs, const PartitionPlan& plan,
                             double noise_var, std::uint64_t seed);

// Y_{m,t} as an nx x ny matrix for subarray descriptor d.
Eigen::MatrixXcd subarray_block(const Eigen::MatrixXcd& samples, const PartitionPlan& plan,
                                const SubarrayDescriptor& d, int t);

}  // namespace nfpose
