#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

namespace itx::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Axis-aligned bounding box.
struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void expand(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool valid() const { return (hi.array() >= lo.array()).all(); }

  // Grown (or shrunk) by `factor` about the center.
  Aabb scaled(double factor) const {
    const Vec3 c = center();
    const Vec3 h = 0.5 * factor * extent();
    return Aabb{c - h, c + h};
  }

  static Aabb intersection(const Aabb& a, const Aabb& b) {
    return Aabb{a.lo.cwiseMax(b.lo), a.hi.cwiseMin(b.hi)};
  }
};

inline Eigen::MatrixXd to_matrix(const std::vector<Vec3>& pts) {
  Eigen::MatrixXd m(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts[i];
  return m;
}

inline std::vector<Vec3> from_matrix(const Eigen::MatrixXd& m) {
  std::vector<Vec3> pts(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) pts[static_cast<std::size_t>(j)] = m.col(j);
  return pts;
}

}  // namespace itx::geom
