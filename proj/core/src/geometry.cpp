#include "nfpose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nfpose {

double wavelength_from_frequency(double carrier_hz) {
  if (!(carrier_hz > 0.0) || !std::isfinite(carrier_hz)) {
    throw std::invalid_argument("carrier frequency must be positive");
  }
  return kSpeedOfLight / carrier_hz;
}

double wrap_angle(double a) {
  if (!std::isfinite(a)) throw std::invalid_argument("angle must be finite");
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  w -= kPi;
  if (w >= kPi) w -= 2.0 * kPi;
  return w;
}

EulerAngles::EulerAngles(double roll, double pitch, double yaw)
    : roll_(wrap_angle(roll)), pitch_(pitch), yaw_(wrap_angle(yaw)) {
  if (!std::isfinite(pitch) || pitch < -kPi / 2.0 || pitch > kPi / 2.0) {
    throw std::invalid_argument("pitch outside [-pi/2, pi/2]: " + std::to_string(pitch));
  }
}

EulerAngles EulerAngles::canonical(double roll, double pitch, double yaw) {
  double p = wrap_angle(pitch);
  // (r, p, y) and (r + pi, pi - p, y + pi) give the same rotation.
  if (p > kPi / 2.0) {
    p = kPi - p;
    roll += kPi;
    yaw += kPi;
  } else if (p < -kPi / 2.0) {
    p = -kPi - p;
    roll += kPi;
    yaw += kPi;
  }
  return EulerAngles(roll, p, yaw);
}

void UraSpec::validate() const {
  if (nx < 1 || ny < 1) {
    throw std::invalid_argument("array dimensions must be >= 1");
  }
}

TransmitPattern::TransmitPattern(std::vector<GridIndex> slots) : slots_(std::move(slots)) {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (slots_[i] == slots_[j]) {
        throw std::invalid_argument("transmit pattern contains a duplicate slot");
      }
    }
  }
}

namespace {
int ceil_half(int n) { return (n + 1) / 2; }
}  // namespace

TransmitPattern TransmitPattern::t5(int n) {
  const int c = ceil_half(n + 1);
  return TransmitPattern({{1, 1}, {1, n}, {n, 1}, {n, n}, {c, c}});
}

TransmitPattern TransmitPattern::t3(int n) {
  return TransmitPattern({{1, 1}, {1, n}, {n, ceil_half(n - 1)}});
}

TransmitPattern TransmitPattern::t9(int n) {
  std::vector<GridIndex> s = t5(n).slots();
  const int h = ceil_half(n - 1);
  s.push_back({1, h});
  s.push_back({n, h});
  s.push_back({h, 1});
  s.push_back({h, n});
  return TransmitPattern(std::move(s));
}

void TransmitPattern::validate(const UraSpec& ms) const {
  if (slots_.empty()) throw std::invalid_argument("transmit pattern is empty");
  for (const auto& g : slots_) {
    if (g.u < 1 || g.u > ms.nx || g.v < 1 || g.v > ms.ny) {
      throw std::invalid_argument("transmit pattern slot outside the MS grid");
    }
  }
}

Mat32 RotationBasis::matrix() const {
  Mat32 r;
  r.col(0) = ex;
  r.col(1) = ey;
  return r;
}

Mat3 rotation_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Mat32 rotation_basis(const Vec3& rpy) {
  const double cx = std::cos(rpy.x()), sx = std::sin(rpy.x());
  const double cy = std::cos(rpy.y()), sy = std::sin(rpy.y());
  const double cz = std::cos(rpy.z()), sz = std::sin(rpy.z());
  Mat32 r;
  r << cz * cy, cz * sy * sx - sz * cx,
       sz * cy, sz * sy * sx + cz * cx,
       -sy, cy * sx;
  return r;
}

RotationBasis rotation_basis(const EulerAngles& angles) {
  const Mat32 r = rotation_basis(angles.vector());
  return {r.col(0), r.col(1)};
}

std::array<Mat32, 3> rotation_basis_derivatives(const Vec3& rpy) {
  const double cx = std::cos(rpy.x()), sx = std::sin(rpy.x());
  const double cy = std::cos(rpy.y()), sy = std::sin(rpy.y());
  const double cz = std::cos(rpy.z()), sz = std::sin(rpy.z());
  std::array<Mat32, 3> d;
  d[0] << 0.0, cz * sy * cx + sz * sx,
          0.0, sz * sy * cx - cz * sx,
          0.0, cy * cx;
  d[1] << -cz * sy, cz * cy * sx,
          -sz * sy, sz * cy * sx,
          -cy, -sy * sx;
  d[2] << -sz * cy, -sz * sy * sx - cz * cx,
          cz * cy, cz * sy * sx - sz * cx,
          0.0, 0.0;
  return d;
}

namespace {
void check_index(const UraSpec& spec, int a, int b) {
  if (a < 1 || a > spec.nx || b < 1 || b > spec.ny) {
    throw std::out_of_range("antenna index (" + std::to_string(a) + ", " + std::to_string(b) +
                            ") outside " + std::to_string(spec.nx) + "x" + std::to_string(spec.ny));
  }
}
}  // namespace

Vec3 bs_antenna_position(const UraSpec& spec, int u, int v, double lambda) {
  check_index(spec, u, v);
  return {(u - (spec.nx + 1) / 2.0) * lambda / 2.0, (v - (spec.ny + 1) / 2.0) * lambda / 2.0, 0.0};
}

Vec2 ms_local_antenna_position(const UraSpec& spec, int q, int s, double lambda) {
  check_index(spec, q, s);
  return {(q - (spec.nx + 1) / 2.0) * lambda / 2.0, (s - (spec.ny + 1) / 2.0) * lambda / 2.0};
}

Vec3 ms_antenna_global_position(const Pose& pose, const Vec2& local) {
  return pose.position + rotation_basis(pose.attitude.vector()) * local;
}

double fresnel_distance(double largest_dimension, double lambda) {
  if (!(largest_dimension > 0.0) || !(lambda > 0.0)) {
    throw std::invalid_argument("fresnel_distance needs positive inputs");
  }
  const double s2 = largest_dimension * largest_dimension;
  return std::cbrt(s2 * s2 / (8.0 * lambda));
}

double rayleigh_distance(double largest_dimension, double lambda) {
  if (!(largest_dimension > 0.0) || !(lambda > 0.0)) {
    throw std::invalid_argument("rayleigh_distance needs positive inputs");
  }
  return 2.0 * largest_dimension * largest_dimension / lambda;
}

double ura_largest_dimension(const UraSpec& spec, double lambda) {
  const double sx = (spec.nx - 1) * lambda / 2.0;
  const double sy = (spec.ny - 1) * lambda / 2.0;
  return std::sqrt(sx * sx + sy * sy);
}

Vec2 aoa_cosines(const Vec3& target, const Vec3& reference) {
  const Vec3 d = target - reference;
  const double n = d.norm();
  if (!(n > 0.0)) throw std::invalid_argument("aoa_cosines: target coincides with reference");
  return {d.x() / n, d.y() / n};
}

std::pair<Mat3, Vec3> kabsch(const std::vector<Vec3>& local, const std::vector<Vec3>& global) {
  if (local.size() != global.size() || local.empty()) {
    throw std::invalid_argument("kabsch: point sets must be non-empty and equal length");
  }
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t i = 0; i < local.size(); ++i) {
    ca += local[i];
    cb += global[i];
  }
  ca /= static_cast<double>(local.size());
  cb /= static_cast<double>(local.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < local.size(); ++i) {
    h += (local[i] - ca) * (global[i] - cb).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return {r, cb - r * ca};
}

Vec3 euler_from_rotation(const Mat3& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

}  // namespace nfpose
