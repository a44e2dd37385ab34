#include "itx/geom/rotation.hpp"

#include <cmath>

#include "itx/util/error.hpp"

namespace itx::geom {

namespace {

Mat3 cross_matrix(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return k;
}

}  // namespace

bool is_rotation(const Mat3& R, double tol) {
  const Mat3 err = R.transpose() * R - Mat3::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && R.determinant() > 0.0;
}

Mat3 rotation_aligning(const Vec3& a_in, const Vec3& b_in) {
  const double an = a_in.norm(), bn = b_in.norm();
  require(an > 1e-12 && bn > 1e-12, "rotation_aligning: zero-length input");
  const Vec3 a = a_in / an, b = b_in / bn;
  const double c = a.dot(b);

  if (c > -0.99) {
    const Vec3 v = a.cross(b);
    const Mat3 k = cross_matrix(v);
    return Mat3::Identity() + k + k * k / (1.0 + c);
  }

  // Nearly antiparallel: compose a half turn (about the smallest-index
  // coordinate axis most orthogonal to a, Gram-Schmidt corrected) with the
  // well-conditioned alignment of -a to b.
  int axis = 0;
  double best = std::abs(a.x());
  if (std::abs(a.y()) < best) {
    axis = 1;
    best = std::abs(a.y());
  }
  if (std::abs(a.z()) < best) axis = 2;
  Vec3 u = Vec3::Unit(axis) - Vec3::Unit(axis).dot(a) * a;
  u.normalize();
  const Mat3 half_turn = 2.0 * u * u.transpose() - Mat3::Identity();

  const Vec3 a2 = -a;  // = half_turn * a
  const double c2 = a2.dot(b);
  const Vec3 v2 = a2.cross(b);
  const Mat3 k2 = cross_matrix(v2);
  const Mat3 align = Mat3::Identity() + k2 + k2 * k2 / (1.0 + c2);
  return align * half_turn;
}

Mat3 random_rotation(Rng& rng) {
  // Normalized 4-vector of Gaussians is uniform on S^3, hence uniform on
  // SO(3) after the double cover.
  double q[4];
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& qi : q) {
      qi = rng.normal();
      norm2 += qi * qi;
    }
  } while (norm2 < 1e-12);
  const double inv = 1.0 / std::sqrt(norm2);
  const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
  Mat3 R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

Mat3 axis_angle_to_matrix(const Vec3& w) {
  const double theta = w.norm();
  const Mat3 k = cross_matrix(w);
  double sinc = 0.0, cosc = 0.0;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    sinc = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    cosc = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  } else {
    sinc = std::sin(theta) / theta;
    cosc = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Mat3::Identity() + sinc * k + cosc * k * k;
}

Vec3 matrix_to_axis_angle(const Mat3& R) {
  const double tr = R.trace();
  const double cos_theta = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta < 1e-8) {
    // First order: R = I + [w]x.
    return Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1)) / 2.0;
  }
  if (theta < 3.14159265358979323846 - 1e-4) {
    const Vec3 axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    return (theta / (2.0 * std::sin(theta))) * axis;
  }
  // Near pi the skew part nearly vanishes, so recover the axis from the
  // symmetric part instead: (R + R^T)/2 = cos(t) I + (1 - cos(t)) aa^T, and
  // 1 - cos(t) ~ 2 keeps the division well conditioned.  Symmetrizing first
  // matters: the residual skew term (~sin t) would otherwise contaminate the
  // off-diagonal axis entries.
  const Mat3 S = (0.5 * (R + R.transpose()) - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
  int k = 0;
  if (S(1, 1) > S(k, k)) k = 1;
  if (S(2, 2) > S(k, k)) k = 2;
  Vec3 axis;
  axis[k] = std::sqrt(std::max(0.0, S(k, k)));
  for (int i = 0; i < 3; ++i) {
    if (i != k) axis[i] = S(i, k) / axis[k];
  }
  axis.normalize();
  // Fix the sign using the skew part (may vanish exactly at pi, where the
  // sign is immaterial).
  const Vec3 skew(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (skew.dot(axis) < 0.0) axis = -axis;
  return theta * axis;
}

}  // namespace itx::geom
