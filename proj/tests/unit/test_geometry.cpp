#include <doctest.h>

#include <cmath>

#include "slicetrack/rigid.hpp"
#include "slicetrack/rng.hpp"

using namespace slicetrack;

namespace {
constexpr double kPi = M_PI;

Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}
Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}
Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}
}  // namespace

TEST_CASE("euler_to_matrix identity and quarter turn") {
  CHECK((euler_to_matrix(RigidParams{}) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);

  const Mat3 r = euler_to_matrix(RigidParams{kPi / 2, 0, 0, 0, 0, 0});
  const Vec3 v = r * Vec3(1, 0, 0);
  CHECK((v - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("euler_to_matrix is orthonormal with det 1 for random angles") {
  RngStream rs = RngStream::from(5, rng_tag::test);
  for (int i = 0; i < 200; ++i) {
    RigidParams p;
    p.alpha = (rs.next_double() - 0.5) * 2 * kPi;
    p.beta = (rs.next_double() - 0.5) * 2 * kPi;
    p.gamma = (rs.next_double() - 0.5) * 2 * kPi;
    const Mat3 r = euler_to_matrix(p);
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-10);
  }
}

TEST_CASE("matrix_to_euler round trip on the principal branch") {
  RngStream rs = RngStream::from(6, rng_tag::test);
  for (int i = 0; i < 500; ++i) {
    RigidParams p;
    p.alpha = (rs.next_double() - 0.5) * 2 * kPi * 0.999;
    p.beta = (rs.next_double() - 0.5) * 0.98 * kPi / 2 * 2;  // inside (-pi/2, pi/2)
    p.gamma = (rs.next_double() - 0.5) * 2 * kPi * 0.999;
    const RigidParams q = matrix_to_euler(euler_to_matrix(p));
    CHECK(std::abs(normalize_angle(q.alpha - p.alpha)) < 1e-9);
    CHECK(std::abs(normalize_angle(q.beta - p.beta)) < 1e-9);
    CHECK(std::abs(normalize_angle(q.gamma - p.gamma)) < 1e-9);
  }
}

TEST_CASE("matrix_to_euler gimbal lock convention gamma = 0") {
  const RigidParams p = matrix_to_euler(rot_y(kPi / 2));
  CHECK(std::abs(p.alpha) < 1e-12);
  CHECK(std::abs(p.beta - kPi / 2) < 1e-12);
  CHECK(p.gamma == 0.0);
  CHECK(matrix_to_euler(Mat3::Identity()).to_vec6().norm() == 0.0);
}

TEST_CASE("matrix_to_euler composition check against direct products") {
  // Oracle: multiply the three axis rotations directly.
  const Mat3 oracle = rot_z(0.3) * rot_y(0.2) * rot_x(0.1);
  const RigidParams p = matrix_to_euler(oracle);
  CHECK(p.alpha == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(p.beta == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p.gamma == doctest::Approx(0.1).epsilon(1e-12));
  CHECK((euler_to_matrix(RigidParams{0.3, 0.2, 0.1, 0, 0, 0}) - oracle)
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("scanner_to_reference identity, offset and hand-evaluated chains") {
  Calibration cal = Calibration::identity();
  const Vec3 x(3, -2, 5);
  CHECK((scanner_to_reference(x, RigidParams{}, cal) - x).norm() == 0.0);

  cal.q_s = Vec3(5, 0, 0);
  CHECK((scanner_to_reference(x, RigidParams{}, cal) - (x + Vec3(5, 0, 0))).norm() == 0.0);

  // Hand evaluation: R_t = R_z(pi), c = (1,0,0), x_o = (2,0,0):
  // R_t(x - c) + c = (-1, 0, 0) + (1, 0, 0) = 0.
  Calibration cal2 = Calibration::identity();
  cal2.c = Vec3(1, 0, 0);
  const Vec3 y = scanner_to_reference(Vec3(2, 0, 0), RigidParams{kPi, 0, 0, 0, 0, 0}, cal2);
  CHECK(y.norm() < 1e-12);
}

TEST_CASE("scanner_to_reference is an isometry for fixed (p, cal)") {
  RngStream rs = RngStream::from(7, rng_tag::test);
  Calibration cal;
  cal.r_s = euler_to_matrix(RigidParams{0.2, -0.1, 0.3, 0, 0, 0});
  cal.q_s = Vec3(4, -2, 7);
  cal.c = Vec3(10, 5, -20);
  const RigidParams p{0.4, 0.2, -0.3, 3, -1, 2};
  for (int i = 0; i < 100; ++i) {
    const Vec3 a(rs.next_double() * 100, rs.next_double() * 100, rs.next_double() * 100);
    const Vec3 b(rs.next_double() * 100, rs.next_double() * 100, rs.next_double() * 100);
    const double d0 = (a - b).norm();
    const double d1 = (scanner_to_reference(a, p, cal) - scanner_to_reference(b, p, cal)).norm();
    CHECK(std::abs(d0 - d1) < 1e-9);
  }
}

TEST_CASE("estimate_rotation_center analytic single-entry solution") {
  // R = R_z(pi), q = (2,0,0): normal equations diag(2,2,0) c = (2,0,0),
  // minimum-norm solution (1,0,0).
  const auto est = estimate_rotation_center({{rot_z(kPi), Vec3(2, 0, 0)}});
  CHECK_FALSE(est.degenerate);
  CHECK((est.c - Vec3(1, 0, 0)).norm() < 1e-10);
}

TEST_CASE("estimate_rotation_center flags the all-identity case") {
  const auto est = estimate_rotation_center(
      {{Mat3::Identity(), Vec3(1, 2, 3)}, {Mat3::Identity(), Vec3(0, 1, 0)}});
  CHECK(est.degenerate);
  CHECK(est.c.norm() == 0.0);
}

TEST_CASE("estimate_rotation_center recovers a synthesized center") {
  // Oracle: generate q_t = (I - R_t) c* and solve the 3x3 normal equations
  // with an independent Cramer's-rule solver.
  const Vec3 c_star(4.5, -7.25, 12.0);
  RngStream rs = RngStream::from(9, rng_tag::test);
  std::vector<std::pair<Mat3, Vec3>> traj;
  Mat3 m = Mat3::Zero();
  Vec3 v = Vec3::Zero();
  for (int i = 0; i < 25; ++i) {
    RigidParams p;
    p.alpha = (rs.next_double() - 0.5) * 0.2;
    p.beta = (rs.next_double() - 0.5) * 0.2;
    p.gamma = (rs.next_double() - 0.5) * 0.2;
    const Mat3 r = euler_to_matrix(p);
    traj.push_back({r, (Mat3::Identity() - r) * c_star});
    const Mat3 a = Mat3::Identity() - r;
    m += a.transpose() * a;
    v += a.transpose() * ((Mat3::Identity() - r) * c_star);
  }
  // Cramer's rule oracle.
  const double det = m.determinant();
  REQUIRE(std::abs(det) > 1e-12);
  Vec3 oracle;
  for (int k = 0; k < 3; ++k) {
    Mat3 mk = m;
    mk.col(k) = v;
    oracle[k] = mk.determinant() / det;
  }

  const auto est = estimate_rotation_center(traj);
  CHECK((est.c - c_star).norm() < 1e-8);
  CHECK((est.c - oracle).norm() < 1e-8);
}

TEST_CASE("estimate_rotation_center beats 1000 random probes") {
  RngStream rs = RngStream::from(10, rng_tag::test);
  std::vector<std::pair<Mat3, Vec3>> traj;
  for (int i = 0; i < 12; ++i) {
    RigidParams p;
    p.alpha = (rs.next_double() - 0.5) * 0.3;
    p.gamma = (rs.next_double() - 0.5) * 0.3;
    const Mat3 r = euler_to_matrix(p);
    traj.push_back({r, Vec3(rs.next_double(), rs.next_double(), rs.next_double())});
  }
  const auto est = estimate_rotation_center(traj);
  auto residual = [&](const Vec3& c) {
    double s = 0.0;
    for (const auto& [r, q] : traj) s += (q - (Mat3::Identity() - r) * c).squaredNorm();
    return s;
  };
  const double best = residual(est.c);
  CHECK(best == doctest::Approx(est.residual).epsilon(1e-12));
  for (int i = 0; i < 1000; ++i) {
    const Vec3 probe(100 * (rs.next_double() - 0.5), 100 * (rs.next_double() - 0.5),
                     100 * (rs.next_double() - 0.5));
    CHECK(residual(probe) >= best - 1e-9);
  }
}

TEST_CASE("normalize_angle wraps to (-pi, pi]") {
  CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(normalize_angle(0.25) == doctest::Approx(0.25));
}

TEST_CASE("psd_sqrt squares back and clamps tiny negatives") {
  Mat6 s = Mat6::Zero();
  s.diagonal() << 4.0, 1.0, 0.25, 0.0, 9.0, 1e-18;
  const Mat6 a = psd_sqrt(s);
  CHECK((a * a - s).cwiseAbs().maxCoeff() < 1e-12);
}
