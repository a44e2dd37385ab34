#include "itx/geom/nearest.hpp"

#include <cmath>

#include "itx/util/error.hpp"

namespace itx::geom {

namespace {

struct Best {
  double d2 = std::numeric_limits<double>::max();
  int idx = -1;
  void consider(double d2_new, int i) {
    if (d2_new < d2 || (d2_new == d2 && i < idx)) {
      d2 = d2_new;
      idx = i;
    }
  }
};

}  // namespace

int NearestIndex::brute_force(const std::vector<Vec3>& pts, const Vec3& q) {
  require(!pts.empty(), "NearestIndex: empty point set");
  Best best;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i)
    best.consider((pts[static_cast<std::size_t>(i)] - q).squaredNorm(), i);
  return best.idx;
}

NearestIndex::NearestIndex(std::vector<Vec3> pts) : pts_(std::move(pts)) {
  require(!pts_.empty(), "NearestIndex: empty point set");
  if (pts_.size() < 64) return;  // brute force is faster at this size

  Aabb box;
  for (const Vec3& p : pts_) box.expand(p);
  const double max_extent = box.extent().maxCoeff();
  if (max_extent <= 0.0) return;  // all points coincide

  // Aim for a handful of points per occupied cell.
  const double cells_per_axis = std::cbrt(static_cast<double>(pts_.size()));
  cell_ = max_extent / std::max(2.0, cells_per_axis);
  origin_ = box.lo;
  use_grid_ = true;
  cells_.reserve(pts_.size());
  for (int i = 0; i < static_cast<int>(pts_.size()); ++i) {
    const Vec3& p = pts_[static_cast<std::size_t>(i)];
    cells_[key(cell_of(p.x(), 0), cell_of(p.y(), 1), cell_of(p.z(), 2))].push_back(i);
  }
}

std::int64_t NearestIndex::cell_of(double v, int axis) const {
  return static_cast<std::int64_t>(std::floor((v - origin_[axis]) / cell_));
}

std::uint64_t NearestIndex::key(std::int64_t cx, std::int64_t cy, std::int64_t cz) const {
  // Offset to keep coordinates positive and pack 21 bits each.
  const std::uint64_t ux = static_cast<std::uint64_t>(cx + (1 << 20)) & 0x1FFFFF;
  const std::uint64_t uy = static_cast<std::uint64_t>(cy + (1 << 20)) & 0x1FFFFF;
  const std::uint64_t uz = static_cast<std::uint64_t>(cz + (1 << 20)) & 0x1FFFFF;
  return (ux << 42) | (uy << 21) | uz;
}

int NearestIndex::nearest(const Vec3& q) const {
  if (!use_grid_) return brute_force(pts_, q);

  const std::int64_t qx = cell_of(q.x(), 0), qy = cell_of(q.y(), 1), qz = cell_of(q.z(), 2);
  Best best;
  // Expand Chebyshev shells until the current best ball is fully covered.
  for (std::int64_t ring = 0;; ++ring) {
    if (best.idx >= 0) {
      // Every cell within distance (ring-1) cells is examined; once the best
      // distance fits inside that examined region we can stop.
      const double safe = (static_cast<double>(ring) - 1.0) * cell_;
      if (safe >= 0.0 && best.d2 <= safe * safe) break;
    }
    // Queries far outside the indexed region would need very wide sweeps;
    // hand those to the exhaustive scan instead.
    if (ring > 64) return brute_force(pts_, q);
    for (std::int64_t dx = -ring; dx <= ring; ++dx) {
      for (std::int64_t dy = -ring; dy <= ring; ++dy) {
        for (std::int64_t dz = -ring; dz <= ring; ++dz) {
          if (std::max({std::llabs(dx), std::llabs(dy), std::llabs(dz)}) != ring) continue;
          auto it = cells_.find(key(qx + dx, qy + dy, qz + dz));
          if (it == cells_.end()) continue;
          for (const int i : it->second)
            best.consider((pts_[static_cast<std::size_t>(i)] - q).squaredNorm(), i);
        }
      }
    }
  }
  return best.idx;
}

std::vector<int> NearestIndex::nearest(const std::vector<Vec3>& queries) const {
  std::vector<int> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = nearest(queries[i]);
  return out;
}

}  // namespace itx::geom
