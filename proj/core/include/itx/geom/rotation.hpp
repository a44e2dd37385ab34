#pragma once

#include "itx/geom/types.hpp"
#include "itx/util/rng.hpp"

namespace itx::geom {

// True when R^T R = I within tol and det(R) > 0.
bool is_rotation(const Mat3& R, double tol = 1e-9);

// Minimal-angle rotation taking unit vector a to unit vector b (R a = b).
// For the antiparallel case the half-turn axis is built from the
// smallest-index coordinate axis most orthogonal to a.
Mat3 rotation_aligning(const Vec3& a, const Vec3& b);

// Uniform over SO(3) (random unit quaternion).
Mat3 random_rotation(Rng& rng);

// Rodrigues map and its inverse.  axis_angle_to_matrix is stable at zero;
// matrix_to_axis_angle handles angles near pi via the symmetric part.
Mat3 axis_angle_to_matrix(const Vec3& w);
Vec3 matrix_to_axis_angle(const Mat3& R);

}  // namespace itx::geom
