#pragma once

#include <unordered_map>
#include <vector>

#include "itx/geom/types.hpp"

namespace itx::geom {

// Nearest-neighbor lookups over a fixed point set via a uniform spatial hash
// grid, with exhaustive scan as the small-set fallback.  Ties on exact
// distance resolve to the lowest point index, matching the exhaustive oracle.
class NearestIndex {
 public:
  explicit NearestIndex(std::vector<Vec3> pts);

  int nearest(const Vec3& q) const;
  // Convenience: nearest index for a batch of queries.
  std::vector<int> nearest(const std::vector<Vec3>& queries) const;

  std::size_t size() const { return pts_.size(); }
  const std::vector<Vec3>& points() const { return pts_; }

  // Exhaustive reference implementation (same tie-break rule).
  static int brute_force(const std::vector<Vec3>& pts, const Vec3& q);

 private:
  std::int64_t cell_of(double v, int axis) const;
  std::uint64_t key(std::int64_t cx, std::int64_t cy, std::int64_t cz) const;

  std::vector<Vec3> pts_;
  bool use_grid_ = false;
  double cell_ = 1.0;
  Vec3 origin_ = Vec3::Zero();
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace itx::geom
