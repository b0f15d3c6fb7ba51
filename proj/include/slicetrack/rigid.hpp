#pragma once

#include <Eigen/Dense>

namespace slicetrack {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Normalize an angle to (-pi, pi].
double normalize_angle(double a);

// 6-DOF rigid motion: intrinsic Z-Y-X Euler angles (radians) plus a
// translation (mm). Angles are radians everywhere in-process; degrees
// appear only at I/O boundaries.
struct RigidParams {
  double alpha = 0.0;  // rotation about z
  double beta = 0.0;   // rotation about y
  double gamma = 0.0;  // rotation about x
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;

  Vec6 to_vec6() const;
  static RigidParams from_vec6(const Vec6& v);

  Vec3 translation() const { return Vec3(dx, dy, dz); }

  // Angles wrapped to (-pi, pi].
  RigidParams normalized() const;

  bool all_finite() const;
};

// Static scanner-to-reference transform plus the head rotation center and
// the random-walk covariance of the motion model.
struct Calibration {
  Mat3 r_s = Mat3::Identity();
  Vec3 q_s = Vec3::Zero();
  Vec3 c = Vec3::Zero();
  Mat6 sigma_d = Mat6::Zero();
  bool center_degenerate = false;

  static Calibration identity() { return Calibration{}; }

  // Throws Errc::bad_config when r_s is not a rotation, sigma_d is not
  // symmetric PSD, or any entry is non-finite.
  void validate() const;
};

// R = Rz(alpha) * Ry(beta) * Rx(gamma).
Mat3 euler_to_matrix(const RigidParams& p);

// Principal-branch inverse of euler_to_matrix (translation left zero).
// At gimbal lock (|beta| = pi/2) the convention gamma := 0 applies.
RigidParams matrix_to_euler(const Mat3& r);

// Eq.-of-motion coordinate chain: x_r = R_t((R_s x_o + q_s) - c) + q_t + c.
Vec3 scanner_to_reference(const Vec3& x_o, const RigidParams& p, const Calibration& cal);

// Affine form of the chain for a fixed (p, cal): x_r = A x_o + b.
struct AffineChain {
  Mat3 a;
  Vec3 b;
  Vec3 apply(const Vec3& x) const { return a * x + b; }
};
AffineChain chain_affine(const RigidParams& p, const Calibration& cal);

// Least squares rotation-center estimate: argmin_c sum_t |q_t - (I - R_t) c|^2.
// Rank deficiency is resolved by the minimum-norm pseudo-inverse (singular
// values below 1e-8 * sigma_max treated as zero). When every rotation is the
// identity the center is unidentifiable: c = 0 with the degenerate flag set.
struct RotationCenterEstimate {
  Vec3 c = Vec3::Zero();
  bool degenerate = false;
  double residual = 0.0;
};
RotationCenterEstimate estimate_rotation_center(
    const std::vector<std::pair<Mat3, Vec3>>& trajectory);

// Symmetric PSD square root via eigendecomposition; negative eigenvalues
// (numerical noise) are clamped to zero.
Mat6 psd_sqrt(const Mat6& m);

}  // namespace slicetrack
