#pragma once

#include <array>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nfpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

double wavelength_from_frequency(double carrier_hz);

// Maps any angle to [-pi, pi).
double wrap_angle(double a);

// Roll and yaw are wrapped on construction; pitch outside [-pi/2, pi/2] is rejected.
class EulerAngles {
 public:
  EulerAngles() = default;
  EulerAngles(double roll, double pitch, double yaw);

  // Accepts any triple and returns the equivalent one inside the supports.
  static EulerAngles canonical(double roll, double pitch, double yaw);
  static EulerAngles canonical(const Vec3& rpy) { return canonical(rpy.x(), rpy.y(), rpy.z()); }

  double roll() const { return roll_; }
  double pitch() const { return pitch_; }
  double yaw() const { return yaw_; }
  Vec3 vector() const { return {roll_, pitch_, yaw_}; }

 private:
  double roll_ = 0.0;
  double pitch_ = 0.0;
  double yaw_ = 0.0;
};

struct Pose {
  Vec3 position = Vec3::Zero();
  EulerAngles attitude;
};

struct UraSpec {
  int nx = 1;
  int ny = 1;

  int size() const { return nx * ny; }
  void validate() const;
};

struct GridIndex {
  int u = 1;
  int v = 1;
  bool operator==(const GridIndex&) const = default;
};

class TransmitPattern {
 public:
  TransmitPattern() = default;
  explicit TransmitPattern(std::vector<GridIndex> slots);

  // Corners and centre of an n x n grid.
  static TransmitPattern t5(int n);
  static TransmitPattern t3(int n);
  static TransmitPattern t9(int n);

  const std::vector<GridIndex>& slots() const { return slots_; }
  int size() const { return static_cast<int>(slots_.size()); }
  const GridIndex& operator[](int t) const { return slots_[static_cast<std::size_t>(t)]; }

  void validate(const UraSpec& ms) const;

 private:
  std::vector<GridIndex> slots_;
};

struct RotationBasis {
  Vec3 ex = Vec3::UnitX();
  Vec3 ey = Vec3::UnitY();

  Mat32 matrix() const;
};

// Full Rz(yaw) Ry(pitch) Rx(roll). Takes an unconstrained triple.
Mat3 rotation_matrix(const Vec3& rpy);
RotationBasis rotation_basis(const EulerAngles& angles);
Mat32 rotation_basis(const Vec3& rpy);
// d R(theta) / d theta_l for l = roll, pitch, yaw.
std::array<Mat32, 3> rotation_basis_derivatives(const Vec3& rpy);

Vec3 bs_antenna_position(const UraSpec& spec, int u, int v, double lambda);
Vec2 ms_local_antenna_position(const UraSpec& spec, int q, int s, double lambda);
Vec3 ms_antenna_global_position(const Pose& pose, const Vec2& local);

double fresnel_distance(double largest_dimension, double lambda);
double rayleigh_distance(double largest_dimension, double lambda);
// Largest dimension of an nx x ny half-wavelength grid: the diagonal.
double ura_largest_dimension(const UraSpec& spec, double lambda);

// Direction cosines of target seen from reference, against e_x and e_y.
Vec2 aoa_cosines(const Vec3& target, const Vec3& reference);

// Rigid alignment: R, p minimizing sum |p + R a_i - b_i|^2 (Kabsch).
std::pair<Mat3, Vec3> kabsch(const std::vector<Vec3>& local, const std::vector<Vec3>& global);

// Roll, pitch, yaw of a rotation matrix, pitch in [-pi/2, pi/2].
Vec3 euler_from_rotation(const Mat3& r);

}  // namespace nfpose
