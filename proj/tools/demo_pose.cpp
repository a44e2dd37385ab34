#include "demo_pose.hpp"

#include <algorithm>
#include <vector>

#include "itx/util/error.hpp"

namespace itx::tools {

namespace {

using geom::Vec3;

double min_clearance(const agent::AgentDef& def, const agent::AgentState& st,
                     const std::vector<Vec3>& pts) {
  const std::vector<double> d = agent::agent_sdf(def, st, pts);
  return *std::min_element(d.begin(), d.end());
}

// Longest translation along `dir` (up to `span`) that keeps at least `clear`
// of clearance to the object samples; bisection from a non-touching start.
double approach_shift(const agent::AgentDef& def, agent::AgentState st, const Vec3& dir,
                      double span, const std::vector<Vec3>& pts, double clear) {
  const Vec3 base = st.trans;
  auto clearance = [&](double t) {
    st.trans = base + t * dir;
    return min_clearance(def, st, pts);
  };
  require(clearance(0.0) > clear, "demo pose: starting placement already touches the object");
  if (clearance(span) > clear) return span;
  double lo = 0.0, hi = span;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (clearance(mid) > clear ? lo : hi) = mid;
  }
  return lo;
}

// Largest curl amount a in [0, a_max] along the joint profile that keeps at
// least `clear` of clearance (0 when even the open pose is at contact).
double curl_amount(const agent::AgentDef& def, agent::AgentState st,
                   const Eigen::VectorXd& profile, double a_max, const std::vector<Vec3>& pts,
                   double clear) {
  const Eigen::VectorXd base = st.theta;
  auto clearance = [&](double a) {
    st.theta = base + a * profile;
    return min_clearance(def, st, pts);
  };
  if (clearance(0.0) <= clear) return 0.0;
  if (clearance(a_max) > clear) return a_max;
  double lo = 0.0, hi = a_max;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (clearance(mid) > clear ? lo : hi) = mid;
  }
  return lo;
}

agent::AgentState author_grasp(const agent::AgentDef& def, const geom::PointCloud& object) {
  require(def.joint_count() == 6, "demo_grasp expects the 6-joint gripper preset");
  const geom::Aabb box = object.bounds();
  agent::AgentState st = agent::AgentState::rest(def);

  // Hover over the object's top center, then descend to a hair above it.
  const Vec3 c = box.center();
  st.trans = Vec3(c.x(), c.y(), box.hi.z() + 0.35);
  const double span = st.trans.z() - box.lo.z();
  const double drop = approach_shift(def, st, -Vec3::UnitZ(), span, object.points, 0.002);
  st.trans -= drop * Vec3::UnitZ();

  // Curl the fingers (proximal joints leading) until first contact.
  Eigen::VectorXd profile(6);
  profile << 1.0, 0.5, 1.0, 0.5, 1.0, 0.5;
  const double curl = curl_amount(def, st, profile, 0.8, object.points, 0.0005);
  st.theta += curl * profile;
  return st;
}

agent::AgentState author_sit(const agent::AgentDef& def, const geom::PointCloud& object) {
  require(def.joint_count() == 8, "demo_sit expects the 8-joint sitter preset");
  const geom::Aabb box = object.bounds();
  agent::AgentState st = agent::AgentState::rest(def);

  // Pre-bend into a sitting pose: thighs forward, shins hanging, arms
  // resting slightly forward.  Joint order follows the preset's link order:
  // thigh/shin left, thigh/shin right, upper/fore arm left, then right.
  st.theta.resize(8);
  st.theta << 1.3, -1.3, 1.3, -1.3, 0.3, -0.3, 0.3, -0.3;

  // Drop onto the object from straight above its center.
  const Vec3 c = box.center();
  st.trans = Vec3(c.x(), c.y(), box.hi.z() + 0.5);
  const double span = st.trans.z() - box.lo.z();
  const double drop = approach_shift(def, st, -Vec3::UnitZ(), span, object.points, 0.002);
  st.trans -= drop * Vec3::UnitZ();
  return st;
}

}  // namespace

bool is_demo_interaction(const std::string& name) {
  return name == "demo_grasp" || name == "demo_sit";
}

std::string demo_agent_preset(const std::string& name) {
  if (name == "demo_grasp") return "gripper";
  if (name == "demo_sit") return "sitter";
  throw Error("unknown demo interaction '" + name + "' (expected demo_grasp or demo_sit)");
}

agent::AgentState author_demo_pose(const std::string& name, const agent::AgentDef& def,
                                   const geom::PointCloud& object) {
  require(!object.points.empty(), "demo pose: object has no sample points");
  if (name == "demo_grasp") return author_grasp(def, object);
  if (name == "demo_sit") return author_sit(def, object);
  throw Error("unknown demo interaction '" + name + "' (expected demo_grasp or demo_sit)");
}

}  // namespace itx::tools
