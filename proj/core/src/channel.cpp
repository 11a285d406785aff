#include "nfpose/channel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nfpose/rng.hpp"

namespace nfpose {

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

double ScenarioConfig::gain(int k) const {
  return gains.empty() ? 1.0 : gains.at(static_cast<std::size_t>(k));
}

Vec3 ScenarioConfig::active_antenna(int k, int t) const {
  const GridIndex& g = pattern[t];
  return ms_antenna_global_position(poses.at(static_cast<std::size_t>(k)),
                                    ms_local_antenna_position(ms, g.u, g.v, wavelength()));
}

void ScenarioConfig::validate() const {
  const double lambda = wavelength();
  bs.validate();
  ms.validate();
  if (poses.empty()) throw std::invalid_argument("scenario needs at least one MS");
  pattern.validate(ms);
  if (!gains.empty() && gains.size() != poses.size()) {
    throw std::invalid_argument("gain list length differs from MS count");
  }
  if (!(tx_power_w >= 0.0) || !(noise_var_w >= 0.0)) {
    throw std::invalid_argument("powers must be non-negative");
  }
  if (!(rician_k > 0.0)) throw std::invalid_argument("Rician K-factor must be positive");
  for (const auto& p : poses) {
    if (!p.position.allFinite()) throw std::invalid_argument("MS position must be finite");
  }
  if (!allow_reactive && bs.size() > 1) {
    const double df = fresnel_distance(ura_largest_dimension(bs, lambda), lambda);
    for (int k = 0; k < num_ms(); ++k) {
      for (int t = 0; t < num_slots(); ++t) {
        const double r = active_antenna(k, t).norm();
        if (r < df) {
          throw std::invalid_argument("MS " + std::to_string(k + 1) + " antenna at " +
                                      std::to_string(r) + " m is inside the Fresnel distance " +
                                      std::to_string(df) + " m");
        }
      }
    }
  }
}

cd nearfield_channel_coeff(const Vec3& bs_antenna, const Vec3& ms_antenna, double beta,
                           double lambda) {
  const double r = (ms_antenna - bs_antenna).norm();
  if (!(r > 0.0)) throw std::invalid_argument("BS and MS antennas coincide");
  return beta * lambda / (4.0 * kPi * r) * std::polar(1.0, -2.0 * kPi * r / lambda);
}

Eigen::MatrixXcd noiseless_received(const ScenarioConfig& scenario) {
  const double lambda = scenario.wavelength();
  const double x = std::sqrt(scenario.tx_power_w);
  const int nb = scenario.bs.size();
  const int T = scenario.num_slots();
  std::vector<Vec3> bs_pos(static_cast<std::size_t>(nb));
  for (int v = 1; v <= scenario.bs.ny; ++v) {
    for (int u = 1; u <= scenario.bs.nx; ++u) {
      bs_pos[static_cast<std::size_t>((u - 1) + (v - 1) * scenario.bs.nx)] =
          bs_antenna_position(scenario.bs, u, v, lambda);
    }
  }
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(nb, T);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < scenario.num_ms(); ++k) {
      const Vec3 a = scenario.active_antenna(k, t);
      const double beta = scenario.gain(k);
      for (int r = 0; r < nb; ++r) {
        y(r, t) += x * nearfield_channel_coeff(bs_pos[static_cast<std::size_t>(r)], a, beta, lambda);
      }
    }
  }
  return y;
}

ReceivedSignal simulate_received(const ScenarioConfig& scenario, std::uint64_t seed) {
  scenario.validate();
  ReceivedSignal out;
  if (std::isinf(scenario.rician_k)) {
    out.samples = noiseless_received(scenario);
  } else {
    // Per-MS LoS terms are needed to scale each NLoS draw.
    Rng nlos(mix_seed({seed, 2}));
    const int nb = scenario.bs.size();
    out.samples = Eigen::MatrixXcd::Zero(nb, scenario.num_slots());
    for (int k = 0; k < scenario.num_ms(); ++k) {
      ScenarioConfig one = scenario;
      one.poses = {scenario.poses[static_cast<std::size_t>(k)]};
      one.gains = {scenario.gain(k)};
      const Eigen::MatrixXcd los = noiseless_received(one);
      for (int t = 0; t < los.cols(); ++t) {
        for (int r = 0; r < nb; ++r) {
          const cd h = los(r, t);
          out.samples(r, t) += h + cscg(nlos, std::norm(h) / scenario.rician_k);
        }
      }
    }
  }
  if (scenario.noise_var_w > 0.0) {
    Rng noise(mix_seed({seed, 1}));
    for (int t = 0; t < out.samples.cols(); ++t) {
      for (int r = 0; r < out.samples.rows(); ++r) out.samples(r, t) += cscg(noise, scenario.noise_var_w);
    }
  }
  return out;
}

SwffCoefficients swff_coefficients(const ScenarioConfig& scenario, const PartitionPlan& plan) {
  const double lambda = scenario.wavelength();
  const double x = std::sqrt(scenario.tx_power_w);
  SwffCoefficients c(plan.size(), scenario.num_ms(), scenario.num_slots());
  for (int t = 0; t < c.T(); ++t) {
    for (int k = 0; k < c.K(); ++k) {
      const Vec3 a = scenario.active_antenna(k, t);
      for (int m = 0; m < c.M(); ++m) {
        const auto& d = plan.subarrays()[static_cast<std::size_t>(m)];
        SwffLink& l = c.at(m, k, t);
        l.distance = (a - d.ref_position).norm();
        l.cosines = aoa_cosines(a, d.ref_position);
        const double rho = lambda / (4.0 * kPi * l.distance);
        const double offset = -kPi * (d.ref_i * l.cosines.x() + d.ref_j * l.cosines.y());
        l.gain = x * scenario.gain(k) * rho *
                 std::polar(1.0, -2.0 * kPi * l.distance / lambda + offset);
      }
    }
  }
  return c;
}

Eigen::MatrixXcd steering_matrix(int nx, int ny, const Vec2& cosines) {
  Eigen::VectorXcd ax(nx), ay(ny);
  for (int i = 0; i < nx; ++i) ax(i) = std::polar(1.0, kPi * (i + 1) * cosines.x());
  for (int j = 0; j < ny; ++j) ay(j) = std::polar(1.0, kPi * (j + 1) * cosines.y());
  return ax * ay.transpose();
}

ReceivedSignal swff_received(const SwffCoefficients& coeffs, const PartitionPlan& plan,
                             double noise_var, std::uint64_t seed) {
  if (coeffs.M() != plan.size()) throw std::invalid_argument("coefficients do not match plan");
  ReceivedSignal out;
  out.samples = Eigen::MatrixXcd::Zero(plan.bs().size(), coeffs.T());
  for (int t = 0; t < coeffs.T(); ++t) {
    for (int m = 0; m < coeffs.M(); ++m) {
      const auto& d = plan.subarrays()[static_cast<std::size_t>(m)];
      Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(d.nx, d.ny);
      for (int k = 0; k < coeffs.K(); ++k) {
        const SwffLink& l = coeffs.at(m, k, t);
        block += l.gain * steering_matrix(d.nx, d.ny, l.cosines);
      }
      for (int j = 0; j < d.ny; ++j) {
        for (int i = 0; i < d.nx; ++i) {
          out.samples(plan.vec_row(d.u0 + i, d.v0 + j), t) = block(i, j);
        }
      }
    }
  }
  if (noise_var > 0.0) {
    Rng noise(mix_seed({seed, 1}));
    for (int t = 0; t < out.samples.cols(); ++t) {
      for (int r = 0; r < out.samples.rows(); ++r) out.samples(r, t) += cscg(noise, noise_var);
    }
  }
  return out;
}

Eigen::MatrixXcd subarray_block(const Eigen::MatrixXcd& samples, const PartitionPlan& plan,
                                const SubarrayDescriptor& d, int t) {
  Eigen::MatrixXcd b(d.nx, d.ny);
  for (int j = 0; j < d.ny; ++j) {
    for (int i = 0; i < d.nx; ++i) b(i, j) = samples(plan.vec_row(d.u0 + i, d.v0 + j), t);
  }
  return b;
}

}  // namespace nfpose
