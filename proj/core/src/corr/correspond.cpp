#include "itx/corr/correspond.hpp"

#include <algorithm>

#include "itx/geom/nearest.hpp"
#include "itx/geom/sampling.hpp"
#include "itx/util/error.hpp"

namespace itx::corr {

namespace {

constexpr double kBoundsScale = 1.2;

// Match queries against candidate template images (ties -> lowest index via
// the nearest-neighbor structure's own rule).
std::vector<int> match_images(const std::vector<Vec3>& query_images,
                              const std::vector<Vec3>& candidate_images,
                              std::vector<double>* residuals) {
  geom::NearestIndex index(candidate_images);
  std::vector<int> out(query_images.size());
  if (residuals) residuals->assign(query_images.size(), 0.0);
  for (std::size_t i = 0; i < query_images.size(); ++i) {
    const int j = index.nearest(query_images[i]);
    out[i] = j;
    if (residuals)
      (*residuals)[i] = (query_images[i] - candidate_images[static_cast<std::size_t>(j)]).norm();
  }
  return out;
}

}  // namespace

Vec3 to_template(const Vec3& p, const field::ShapeCode& code, const field::FieldEvaluator& eval) {
  return eval.to_template(code, {p})[0];
}

std::vector<int> correspond_surface(const geom::PointCloud& source, const field::ShapeCode& code_s,
                                    const geom::PointCloud& target, const field::ShapeCode& code_t,
                                    const field::FieldEvaluator& eval,
                                    std::vector<double>* residuals) {
  require(!source.points.empty(), "surface correspondence needs source points");
  require(!target.points.empty(), "surface correspondence needs target points");
  const std::vector<Vec3> target_images = eval.to_template(code_t, target.points);
  const std::vector<Vec3> source_images = eval.to_template(code_s, source.points);
  return match_images(source_images, target_images, residuals);
}

SpatialCandidates spatial_candidates(const geom::Aabb& target_bounds, int resolution,
                                     const field::ShapeCode& code_t,
                                     const field::FieldEvaluator& eval) {
  require(resolution >= 2, "spatial correspondence needs resolution >= 2");
  const geom::Aabb box = target_bounds.scaled(kBoundsScale);
  const Vec3 extent = box.hi - box.lo;
  require(extent.minCoeff() > 0.0, "spatial correspondence needs non-degenerate target bounds");

  SpatialCandidates c;
  c.grid = geom::sample_grid(box, resolution);
  c.template_images = eval.to_template(code_t, c.grid);
  c.spacing = extent.maxCoeff() / static_cast<double>(resolution - 1);
  return c;
}

std::vector<Vec3> correspond_spatial(const std::vector<Vec3>& agent_points,
                                     const field::ShapeCode& code_s,
                                     const SpatialCandidates& candidates,
                                     const field::FieldEvaluator& eval,
                                     std::vector<double>* residuals) {
  require(!agent_points.empty(), "spatial correspondence needs agent points");
  require(!candidates.grid.empty() && candidates.grid.size() == candidates.template_images.size(),
          "spatial candidate cache is incomplete");
  const std::vector<Vec3> agent_images = eval.to_template(code_s, agent_points);
  const std::vector<int> match = match_images(agent_images, candidates.template_images, residuals);
  std::vector<Vec3> out(agent_points.size());
  for (std::size_t i = 0; i < match.size(); ++i)
    out[i] = candidates.grid[static_cast<std::size_t>(match[i])];
  return out;
}

std::vector<Vec3> correspond_spatial(const std::vector<Vec3>& agent_points,
                                     const field::ShapeCode& code_s,
                                     const geom::Aabb& target_bounds,
                                     const field::ShapeCode& code_t, int resolution,
                                     const field::FieldEvaluator& eval,
                                     std::vector<double>* residuals) {
  const SpatialCandidates c = spatial_candidates(target_bounds, resolution, code_t, eval);
  return correspond_spatial(agent_points, code_s, c, eval, residuals);
}

Correspondence correspond(const geom::PointCloud& source_object, const field::ShapeCode& code_s,
                          const std::vector<Vec3>& agent_points,
                          const geom::PointCloud& target_object, const field::ShapeCode& code_t,
                          int resolution, const field::FieldEvaluator& eval) {
  Correspondence out;
  out.surface = correspond_surface(source_object, code_s, target_object, code_t, eval,
                                   &out.surface_residual);
  out.spatial = correspond_spatial(agent_points, code_s, target_object.bounds(), code_t,
                                   resolution, eval, &out.spatial_residual);
  return out;
}

}  // namespace itx::corr
