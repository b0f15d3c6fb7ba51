#include "slicetrack/rigid.hpp"

#include <cmath>
#include <vector>

#include "slicetrack/errors.hpp"

namespace slicetrack {

double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);  // [-pi, pi]
  if (r <= -M_PI) r = M_PI;
  return r;
}

Vec6 RigidParams::to_vec6() const {
  Vec6 v;
  v << alpha, beta, gamma, dx, dy, dz;
  return v;
}

RigidParams RigidParams::from_vec6(const Vec6& v) {
  return RigidParams{v[0], v[1], v[2], v[3], v[4], v[5]};
}

RigidParams RigidParams::normalized() const {
  RigidParams p = *this;
  p.alpha = normalize_angle(p.alpha);
  p.beta = normalize_angle(p.beta);
  p.gamma = normalize_angle(p.gamma);
  return p;
}

bool RigidParams::all_finite() const {
  return std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma) &&
         std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dz);
}

void Calibration::validate() const {
  if (!r_s.allFinite() || !q_s.allFinite() || !c.allFinite() || !sigma_d.allFinite())
    raise(Errc::bad_config, "calibration contains non-finite entries");
  Mat3 should_be_i = r_s.transpose() * r_s;
  if ((should_be_i - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-8 ||
      std::abs(r_s.determinant() - 1.0) > 1e-8)
    raise(Errc::bad_config, "calibration r_s is not a rotation matrix");
  if ((sigma_d - sigma_d.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    raise(Errc::bad_config, "calibration sigma_d is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat6> es(sigma_d);
  if (es.eigenvalues().minCoeff() < -1e-10)
    raise(Errc::bad_config, "calibration sigma_d has a negative eigenvalue");
}

Mat3 euler_to_matrix(const RigidParams& p) {
  const double ca = std::cos(p.alpha), sa = std::sin(p.alpha);
  const double cb = std::cos(p.beta), sb = std::sin(p.beta);
  const double cg = std::cos(p.gamma), sg = std::sin(p.gamma);
  Mat3 r;
  r << ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg,
       sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg,
       -sb,     cb * sg,               cb * cg;
  return r;
}

RigidParams matrix_to_euler(const Mat3& r) {
  RigidParams p;
  const double sb = -r(2, 0);
  p.beta = std::asin(std::clamp(sb, -1.0, 1.0));
  const double cb = std::cos(p.beta);
  if (cb > 1e-10) {
    p.alpha = std::atan2(r(1, 0), r(0, 0));
    p.gamma = std::atan2(r(2, 1), r(2, 2));
  } else {
    // Gimbal lock: only alpha -/+ gamma is determined; take gamma = 0.
    p.gamma = 0.0;
    p.alpha = std::atan2(-r(0, 1), r(1, 1));
  }
  return p.normalized();
}

Vec3 scanner_to_reference(const Vec3& x_o, const RigidParams& p, const Calibration& cal) {
  const Mat3 r_t = euler_to_matrix(p);
  return r_t * ((cal.r_s * x_o + cal.q_s) - cal.c) + p.translation() + cal.c;
}

AffineChain chain_affine(const RigidParams& p, const Calibration& cal) {
  const Mat3 r_t = euler_to_matrix(p);
  AffineChain ch;
  ch.a = r_t * cal.r_s;
  ch.b = r_t * (cal.q_s - cal.c) + p.translation() + cal.c;
  return ch;
}

RotationCenterEstimate estimate_rotation_center(
    const std::vector<std::pair<Mat3, Vec3>>& trajectory) {
  RotationCenterEstimate est;
  if (trajectory.empty()) raise(Errc::bad_config, "rotation-center fit needs >= 1 entry");

  bool any_rotation = false;
  for (const auto& [r, q] : trajectory) {
    if ((r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12) {
      any_rotation = true;
      break;
    }
  }
  if (!any_rotation) {
    est.degenerate = true;
    double res = 0.0;
    for (const auto& [r, q] : trajectory) res += q.squaredNorm();
    est.residual = res;
    return est;
  }

  Mat3 m = Mat3::Zero();
  Vec3 v = Vec3::Zero();
  for (const auto& [r, q] : trajectory) {
    const Mat3 a = Mat3::Identity() - r;
    m += a.transpose() * a;
    v += a.transpose() * q;
  }

  // Minimum-norm solve of m c = v with small-singular-value cutoff.
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-8 * sv[0];
  Vec3 y = svd.matrixU().transpose() * v;
  for (int i = 0; i < 3; ++i) y[i] = (sv[i] > cutoff) ? y[i] / sv[i] : 0.0;
  est.c = svd.matrixV() * y;

  double res = 0.0;
  for (const auto& [r, q] : trajectory)
    res += (q - (Mat3::Identity() - r) * est.c).squaredNorm();
  est.residual = res;
  return est;
}

Mat6 psd_sqrt(const Mat6& m) {
  Eigen::SelfAdjointEigenSolver<Mat6> es(m);
  Vec6 ev = es.eigenvalues();
  for (int i = 0; i < 6; ++i) ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace slicetrack
