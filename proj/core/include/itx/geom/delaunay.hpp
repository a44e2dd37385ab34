#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "itx/geom/types.hpp"

namespace itx::geom {

struct DelaunayResult {
  // Tetrahedra over the input indices, each positively oriented.
  std::vector<std::array<int, 4>> tets;
  // Unique undirected edges (first < second), sorted lexicographically.
  std::vector<std::pair<int, int>> edges;
  // Degeneracy fallback bookkeeping: how many jittered rebuilds were needed.
  bool jittered = false;
  int jitter_attempts = 0;
};

// Incremental Bowyer-Watson tetrahedralization.  Inputs are normalized into
// the unit cube internally (the triangulation is similarity-invariant).
// Determinant predicates run in double precision with relative tolerances;
// when a degenerate configuration is detected (cospherical or coplanar
// subsets, duplicate points) the whole build is retried with the points
// jittered by uniform noise of magnitude 1e-6 (in normalized coordinates),
// up to 3 times, after which an error is thrown.
//
// Fewer than 4 points, or an entirely coplanar input, is rejected.
DelaunayResult delaunay_tetrahedralize(const std::vector<Vec3>& pts, std::uint64_t seed = 0);

}  // namespace itx::geom
