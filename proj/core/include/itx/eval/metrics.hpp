#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "itx/agent/agent.hpp"
#include "itx/geom/point_cloud.hpp"
#include "itx/geom/shape.hpp"
#include "itx/geom/types.hpp"

namespace itx::eval {

// A solid to evaluate against: surface samples (used for the depth metric),
// a signed-distance callable (used for membership tests), and world bounds
// (used to place the volume lattice).
struct EvalBody {
  std::vector<geom::Vec3> samples;
  std::function<double(const geom::Vec3&)> sdf;
  geom::Aabb box;
};

// Analytic solids carry their own distance and bounds; `sample_count`
// fresh surface samples are drawn for the depth probe.
EvalBody eval_body(const geom::AnalyticShape& shape, int sample_count = 2048,
                   std::uint64_t seed = 0);

// Point clouds need an externally supplied signed distance (for example a
// learned field or the generating solid's).
EvalBody eval_body(const geom::PointCloud& cloud,
                   std::function<double(const geom::Vec3&)> sdf);

// World-space box around every posed capsule link.
geom::Aabb agent_bounds(const agent::AgentDef& def, const agent::AgentState& state);

struct PenetrationMetrics {
  double depth = 0.0;   // deepest object surface sample inside the agent
  double volume = 0.0;  // voxelized solid intersection volume
};

// Depth is the largest |agent distance| over object surface samples that lie
// inside the agent (0 when none do).  Volume counts voxel centers, on a
// `voxel_res` per-axis lattice over the intersection of the two bounding
// boxes, that lie inside both solids, times the voxel volume.
PenetrationMetrics penetration_metrics(const agent::AgentDef& def,
                                       const agent::AgentState& state,
                                       const EvalBody& object, int voxel_res);

// Indices whose |distance| is within the contact threshold, ascending.
std::vector<int> contact_indices(const std::vector<double>& sdf_at_points,
                                 double threshold);

// Intersection-over-union (percent) of the two contact index sets computed
// from per-point object distances; congruent point arrays required.  Both
// sets empty counts as perfect agreement (100).
double contact_iou(const std::vector<double>& source_sdf,
                   const std::vector<double>& target_sdf, double threshold);
double contact_iou(const agent::AgentPoints& source_points, const EvalBody& source_object,
                   const agent::AgentPoints& target_points, const EvalBody& target_object,
                   double threshold);

struct EvalReport {
  std::string name = "run";  // row label (method or configuration)
  double depth = 0.0;
  double volume = 0.0;
  double iou = 0.0;
  double threshold = 0.0;  // contact threshold the IoU used
  int voxel_res = 0;       // lattice resolution the volume used
  double seconds = 0.0;    // wall-clock of the producing run, 0 when unmeasured
};

// Writes an aligned plain-text table (columns Dep. / Vol. / IoU / Time plus a
// mean row) to `path` and full-precision key=value records, including the
// mean row, to `path` + ".kv".  An empty list is an error and writes nothing.
void write_report(const std::vector<EvalReport>& reports, const std::string& path);

}  // namespace itx::eval
