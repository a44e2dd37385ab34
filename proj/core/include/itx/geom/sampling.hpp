#pragma once

#include <cstdint>
#include <vector>

#include "itx/geom/point_cloud.hpp"
#include "itx/geom/shape.hpp"

namespace itx::geom {

namespace detail {
// Area-weighted rejection sampling over the primitive surfaces; points lying
// inside the union are rejected.  No recentering.  When `labels` is non-null
// it receives the owning primitive index per sample.
std::vector<Vec3> raw_surface_samples(const AnalyticShape& shape, int n, std::uint64_t seed,
                                      std::vector<int>* labels);
}  // namespace detail

// Draws exactly n points on the surface (|sdf| < 1e-4 at every point) with
// normals set to the normalized SDF gradient.  The returned cloud is then
// centered: points are shifted by the residual centroid and re-projected onto
// the surface until the centroid magnitude drops below 1e-6, so both the
// on-surface and the centered invariants hold simultaneously.  Shapes whose
// surface centroid is far from the origin (beyond 0.2) are returned without
// centering.
PointCloud sample_surface(const AnalyticShape& shape, int n, std::uint64_t seed);

// Same, additionally reporting which primitive owns each sample (by minimal
// signed distance at the final point positions).
PointCloud sample_surface_labeled(const AnalyticShape& shape, int n, std::uint64_t seed,
                                  std::vector<int>& labels);

// Inclusive res^3 lattice over `box` (res >= 2).  Ordering: x varies fastest,
// then y, then z; index = ix + res*(iy + res*iz).
std::vector<Vec3> sample_grid(const Aabb& box, int res);

// Free-space supervision samples: uniform draws in the shape's bounding box
// scaled by `box_scale` about its center, with the analytic signed distance
// recorded per point.
struct FreeSamples {
  std::vector<Vec3> points;
  std::vector<double> sdf;
};
FreeSamples sample_free_space(const AnalyticShape& shape, int n, std::uint64_t seed,
                              double box_scale = 1.3);

}  // namespace itx::geom
