#include "itx/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <utility>

#include "itx/geom/sampling.hpp"
#include "itx/util/error.hpp"

namespace itx::eval {

EvalBody eval_body(const geom::AnalyticShape& shape, int sample_count, std::uint64_t seed) {
  require(sample_count > 0, "eval: sample_count must be positive");
  EvalBody body;
  body.samples = geom::sample_surface(shape, sample_count, seed).points;
  body.sdf = [shape](const geom::Vec3& p) { return shape.sdf(p); };
  body.box = shape.bounds();
  return body;
}

EvalBody eval_body(const geom::PointCloud& cloud, std::function<double(const geom::Vec3&)> sdf) {
  require(!cloud.points.empty(), "eval: point cloud is empty");
  require(static_cast<bool>(sdf), "eval: point cloud needs a signed distance callable");
  EvalBody body;
  body.samples = cloud.points;
  body.sdf = std::move(sdf);
  body.box = cloud.bounds();
  return body;
}

geom::Aabb agent_bounds(const agent::AgentDef& def, const agent::AgentState& state) {
  const auto tf = agent::link_transforms(def, state);
  geom::Aabb box;
  for (std::size_t i = 0; i < def.links.size(); ++i) {
    const agent::Link& l = def.links[i];
    const auto& [R, t] = tf[i];
    const geom::Vec3 half = l.half_length * geom::Vec3::UnitZ();
    const geom::Vec3 a = R * (l.center + half) + t;
    const geom::Vec3 b = R * (l.center - half) + t;
    const geom::Vec3 r = geom::Vec3::Constant(l.radius);
    box.expand(geom::Aabb{a.cwiseMin(b) - r, a.cwiseMax(b) + r});
  }
  return box;
}

PenetrationMetrics penetration_metrics(const agent::AgentDef& def,
                                       const agent::AgentState& state,
                                       const EvalBody& object, int voxel_res) {
  require(voxel_res >= 8, "eval: voxel_res must be at least 8");
  require(static_cast<bool>(object.sdf), "eval: object has no signed distance");

  PenetrationMetrics out;

  const std::vector<double> probe = agent_sdf(def, state, object.samples);
  for (double d : probe)
    if (d < 0.0) out.depth = std::max(out.depth, -d);

  const geom::Aabb box = geom::Aabb::intersection(agent_bounds(def, state), object.box);
  const geom::Vec3 ext = box.extent();
  if ((ext.array() <= 0.0).any()) return out;  // boxes do not overlap

  const geom::Vec3 h = ext / static_cast<double>(voxel_res);
  std::vector<geom::Vec3> centers;
  centers.reserve(static_cast<std::size_t>(voxel_res) * voxel_res * voxel_res);
  for (int iz = 0; iz < voxel_res; ++iz)
    for (int iy = 0; iy < voxel_res; ++iy)
      for (int ix = 0; ix < voxel_res; ++ix)
        centers.push_back(box.lo + geom::Vec3((ix + 0.5) * h.x(), (iy + 0.5) * h.y(),
                                              (iz + 0.5) * h.z()));

  const std::vector<double> agent_d = agent_sdf(def, state, centers);
  long count = 0;
  for (std::size_t i = 0; i < centers.size(); ++i)
    if (agent_d[i] < 0.0 && object.sdf(centers[i]) < 0.0) ++count;
  out.volume = static_cast<double>(count) * h.x() * h.y() * h.z();
  return out;
}

std::vector<int> contact_indices(const std::vector<double>& sdf_at_points, double threshold) {
  require(threshold >= 0.0, "eval: contact threshold must be non-negative");
  std::vector<int> out;
  for (std::size_t i = 0; i < sdf_at_points.size(); ++i)
    if (std::abs(sdf_at_points[i]) <= threshold) out.push_back(static_cast<int>(i));
  return out;
}

double contact_iou(const std::vector<double>& source_sdf,
                   const std::vector<double>& target_sdf, double threshold) {
  require(source_sdf.size() == target_sdf.size(),
          "eval: contact point counts differ (" + std::to_string(source_sdf.size()) +
              " vs " + std::to_string(target_sdf.size()) + ")");
  require(threshold >= 0.0, "eval: contact threshold must be non-negative");
  long inter = 0;
  long uni = 0;
  for (std::size_t i = 0; i < source_sdf.size(); ++i) {
    const bool s = std::abs(source_sdf[i]) <= threshold;
    const bool t = std::abs(target_sdf[i]) <= threshold;
    inter += (s && t) ? 1 : 0;
    uni += (s || t) ? 1 : 0;
  }
  if (uni == 0) return 100.0;
  return 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

double contact_iou(const agent::AgentPoints& source_points, const EvalBody& source_object,
                   const agent::AgentPoints& target_points, const EvalBody& target_object,
                   double threshold) {
  require(source_points.size() == target_points.size(),
          "eval: contact point counts differ (" + std::to_string(source_points.size()) +
              " vs " + std::to_string(target_points.size()) + ")");
  require(static_cast<bool>(source_object.sdf) && static_cast<bool>(target_object.sdf),
          "eval: objects need signed distance callables");
  std::vector<double> s(source_points.size()), t(target_points.size());
  for (std::size_t i = 0; i < source_points.size(); ++i) {
    s[i] = source_object.sdf(source_points.positions[i]);
    t[i] = target_object.sdf(target_points.positions[i]);
  }
  return contact_iou(s, t, threshold);
}

namespace {

EvalReport mean_report(const std::vector<EvalReport>& reports) {
  EvalReport m;
  m.name = "mean";
  for (const EvalReport& r : reports) {
    m.depth += r.depth;
    m.volume += r.volume;
    m.iou += r.iou;
    m.seconds += r.seconds;
  }
  const double n = static_cast<double>(reports.size());
  m.depth /= n;
  m.volume /= n;
  m.iou /= n;
  m.seconds /= n;
  return m;
}

void write_row(std::ostream& os, const std::string& name, double depth, double volume,
               double iou, double seconds, int name_width) {
  os << std::left << std::setw(name_width) << name << std::right << std::fixed
     << std::setprecision(6) << std::setw(12) << depth << std::setw(12) << volume
     << std::setprecision(2) << std::setw(9) << iou << std::setprecision(3)
     << std::setw(10) << seconds << "\n";
}

void write_kv(std::ostream& os, const EvalReport& r, const std::string& label) {
  os << "record " << label << "\n";
  os << std::setprecision(17);
  os << "name " << r.name << "\n";
  os << "depth " << r.depth << "\n";
  os << "volume " << r.volume << "\n";
  os << "iou " << r.iou << "\n";
  os << "threshold " << r.threshold << "\n";
  os << "voxel_res " << r.voxel_res << "\n";
  os << "seconds " << r.seconds << "\n";
}

}  // namespace

void write_report(const std::vector<EvalReport>& reports, const std::string& path) {
  require(!reports.empty(), "eval: nothing to report");

  int name_width = 12;
  for (const EvalReport& r : reports)
    name_width = std::max(name_width, static_cast<int>(r.name.size()) + 2);
  const EvalReport mean = mean_report(reports);

  std::ofstream table(path);
  require(table.good(), "eval: cannot open '" + path + "' for writing");
  table << std::left << std::setw(name_width) << "run" << std::right << std::setw(12)
        << "Dep." << std::setw(12) << "Vol." << std::setw(9) << "IoU" << std::setw(10)
        << "Time" << "\n";
  for (const EvalReport& r : reports)
    write_row(table, r.name, r.depth, r.volume, r.iou, r.seconds, name_width);
  write_row(table, mean.name, mean.depth, mean.volume, mean.iou, mean.seconds, name_width);
  require(table.good(), "eval: write failed for '" + path + "'");

  const std::string kv_path = path + ".kv";
  std::ofstream kv(kv_path);
  require(kv.good(), "eval: cannot open '" + kv_path + "' for writing");
  for (std::size_t i = 0; i < reports.size(); ++i)
    write_kv(kv, reports[i], std::to_string(i));
  write_kv(kv, mean, "mean");
  require(kv.good(), "eval: write failed for '" + kv_path + "'");
}

}  // namespace itx::eval
