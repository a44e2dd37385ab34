#pragma once

#include <string>
#include <vector>

#include "itx/geom/types.hpp"

namespace itx::geom {

// A surface sample set: positions plus (optionally) unit normals.  When
// normals are present there is exactly one per point.  Clouds produced by
// sample_surface are centered: their centroid sits at the origin to within
// 1e-6.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool has_normals() const { return !normals.empty(); }

  Vec3 centroid() const;
  Aabb bounds() const;

  // Throws unless sizes agree, normals (when present and required) are unit
  // length within `normal_tol`, and (when `check_centered`) the centroid is
  // within `center_tol` of the origin.
  void validate(bool require_normals = true, bool check_centered = false,
                double normal_tol = 1e-4, double center_tol = 1e-6) const;
};

// ASCII PLY with double precision x y z nx ny nz (plus an optional integer
// label per vertex).  Values are written with 9 significant digits.
void save_ply(const PointCloud& cloud, const std::string& path,
              const std::vector<int>* labels = nullptr);
PointCloud load_ply(const std::string& path, std::vector<int>* labels = nullptr);

// OBJ with vertex-only "v x y z" records; normals are not representable, so
// importing yields a cloud without normals.
void save_obj(const PointCloud& cloud, const std::string& path);
PointCloud load_obj(const std::string& path);

}  // namespace itx::geom
