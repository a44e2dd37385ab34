#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "itx/geom/types.hpp"

namespace itx::geom {

enum class PrimitiveKind { Sphere, Box, Cylinder, Capsule, Torus };

// A posed analytic solid.  `size` is interpreted per kind (local axis is z
// where an axis exists):
//   Sphere   - size.x() = radius
//   Box      - size = half extents
//   Cylinder - size.x() = radius, size.y() = half height
//   Capsule  - size.x() = radius, size.y() = half length of the core segment
//   Torus    - size.x() = ring (major) radius, size.y() = tube (minor) radius
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Sphere;
  Mat3 R = Mat3::Identity();  // local -> world rotation
  Vec3 t = Vec3::Zero();      // local -> world translation
  Vec3 size = Vec3::Zero();
  std::string label;          // semantic part name carried into sampling

  double sdf(const Vec3& world_p) const;
  double surface_area() const;
  Aabb bounds() const;  // tight world-space box
};

// Union of primitives with generative provenance.  The signed distance is the
// pointwise minimum over the parts: exact outside the solid, a lower bound on
// the true distance in overlap regions inside, and correctly signed
// everywhere.
struct AnalyticShape {
  std::vector<Primitive> prims;
  std::string family = "custom";            // "mug" | "chair" | "custom"
  std::map<std::string, double> params;     // generative parameters
  std::uint64_t seed = 0;

  double sdf(const Vec3& p) const;
  // Index of the primitive attaining the minimum at p.
  int nearest_primitive(const Vec3& p) const;
  // Central-difference gradient; h is the half step.
  Vec3 sdf_gradient(const Vec3& p, double h = 1e-6) const;
  Aabb bounds() const;
};

// Draws family parameters from the documented ranges, builds the primitive
// set, normalizes so the shape fits the unit box (max extent 1, centered),
// and recenters so the canonical surface-sample centroid sits at the origin.
//
// Documented parameter ranges (drawn uniformly, before normalization):
//   mug:   body_radius in [0.25, 0.45], body_height in [0.5, 1.0],
//          handle present with probability 0.8,
//          handle_major in [0.16, 0.26], handle_minor in [0.035, 0.06]
//   chair: seat_w in [0.25, 0.40], seat_d in [0.25, 0.40],
//          seat_t in [0.03, 0.06], leg_h in [0.30, 0.50],
//          leg_t in [0.03, 0.05], back_h in [0.40, 0.70],
//          back_t in [0.03, 0.06], arms present with probability 0.5,
//          arm_t in [0.025, 0.04], arm_h in [0.15, 0.25]
AnalyticShape generate_shape(const std::string& family, std::uint64_t seed);

// Same, but with explicit parameters (keys as above, booleans as 0/1).
AnalyticShape build_family_shape(const std::string& family,
                                 const std::map<std::string, double>& params,
                                 std::uint64_t seed = 0);

// Flat key=value serialization of family + params (re-buildable record).
void save_shape(const AnalyticShape& shape, const std::string& path);
AnalyticShape load_shape(const std::string& path);

}  // namespace itx::geom
