#pragma once

#include <vector>

#include "itx/field/network.hpp"
#include "itx/geom/point_cloud.hpp"
#include "itx/geom/types.hpp"

namespace itx::corr {

using geom::Vec3;

// Point correspondences resolved through the shared template field: each
// source object point maps to the index of the target object point whose
// template image is nearest, and each source agent point maps to the position
// of the nearest-in-template grid candidate around the target.  Residuals are
// the template-space distances at the winning candidates.
struct Correspondence {
  std::vector<int> surface;              // per source object point: target index
  std::vector<Vec3> spatial;             // per source agent point: matched position
  std::vector<double> surface_residual;  // template distance of each surface match
  std::vector<double> spatial_residual;  // template distance of each spatial match
};

// Template image of a single point under the given shape code.
Vec3 to_template(const Vec3& p, const field::ShapeCode& code, const field::FieldEvaluator& eval);

// For each source point, the index of the target point with the nearest
// template image (ties resolve to the lowest target index).  If `residuals`
// is non-null it receives the winning template distances.
std::vector<int> correspond_surface(const geom::PointCloud& source, const field::ShapeCode& code_s,
                                    const geom::PointCloud& target, const field::ShapeCode& code_t,
                                    const field::FieldEvaluator& eval,
                                    std::vector<double>* residuals = nullptr);

// Spatial candidate set X^t: a res^3 lattice over the target bounds scaled by
// 1.2 about its center, with template images computed once so repeated
// queries against the same target reuse them.
struct SpatialCandidates {
  std::vector<Vec3> grid;             // candidate positions (x fastest, then y, z)
  std::vector<Vec3> template_images;  // aligned with grid
  double spacing = 0.0;               // largest per-axis lattice step
};

SpatialCandidates spatial_candidates(const geom::Aabb& target_bounds, int resolution,
                                     const field::ShapeCode& code_t,
                                     const field::FieldEvaluator& eval);

// For each agent point, the candidate grid position whose template image is
// nearest to the point's own template image (ties -> lowest grid index).
std::vector<Vec3> correspond_spatial(const std::vector<Vec3>& agent_points,
                                     const field::ShapeCode& code_s,
                                     const SpatialCandidates& candidates,
                                     const field::FieldEvaluator& eval,
                                     std::vector<double>* residuals = nullptr);

// Convenience overload that builds the candidate set internally.
std::vector<Vec3> correspond_spatial(const std::vector<Vec3>& agent_points,
                                     const field::ShapeCode& code_s,
                                     const geom::Aabb& target_bounds,
                                     const field::ShapeCode& code_t, int resolution,
                                     const field::FieldEvaluator& eval,
                                     std::vector<double>* residuals = nullptr);

// Full correspondence for one transfer: surface map plus spatial positions,
// with residual diagnostics filled in.
Correspondence correspond(const geom::PointCloud& source_object, const field::ShapeCode& code_s,
                          const std::vector<Vec3>& agent_points,
                          const geom::PointCloud& target_object, const field::ShapeCode& code_t,
                          int resolution, const field::FieldEvaluator& eval);

}  // namespace itx::corr
