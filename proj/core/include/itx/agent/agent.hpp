#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "itx/geom/point_cloud.hpp"
#include "itx/geom/types.hpp"

namespace itx::agent {

// One rigid capsule link of an articulated agent.  The link frame is placed
// by the parent's world transform composed with the fixed local offset and
// the hinge rotation (about `axis`, through the link origin).  The capsule's
// core segment spans z in [-half_length, +half_length] around `center` in the
// link frame; a nonzero center lets the capsule hang off its pivot so limbs
// bend at their proximal ends.
struct Link {
  std::string name;
  int parent = -1;                           // -1 only for the root (link 0)
  geom::Mat3 offset_R = geom::Mat3::Identity();
  geom::Vec3 offset_t = geom::Vec3::Zero();
  geom::Vec3 axis = geom::Vec3::UnitZ();     // hinge axis, unit length
  geom::Vec3 center = geom::Vec3::Zero();    // capsule center in link frame
  double radius = 0.05;
  double half_length = 0.05;
  int sample_count = 64;
};

// Cached link-local surface samples (generated once per definition so point
// order and count stay fixed across states).
struct LinkSamples {
  std::vector<geom::Vec3> points;
  std::vector<geom::Vec3> normals;  // exact capsule normals, unit length
};

struct AgentDef {
  std::vector<Link> links;
  std::vector<LinkSamples> samples;  // filled by finalize()

  int joint_count() const { return static_cast<int>(links.size()) - 1; }
  int point_count() const;

  // Checks the tree structure (root at 0, parent < child), unit axes and
  // positive capsule dimensions; throws on violation.
  void validate() const;

  // Draws the per-link capsule samples (area-weighted between the cylindrical
  // side and the spherical caps, seeded deterministically).  Must run before
  // forward kinematics; the bundled factories and the loader call it.
  void finalize(std::uint64_t seed = 0xA6E27u);
};

// Pose: root rigid transform (axis-angle rotation + translation) plus one
// hinge angle per non-root link (theta[i] drives link i+1).
struct AgentState {
  geom::Vec3 rot = geom::Vec3::Zero();
  geom::Vec3 trans = geom::Vec3::Zero();
  Eigen::VectorXd theta;

  static AgentState rest(const AgentDef& def);
};

// Posed surface points with rotated normals and owning link per point; the
// point order is the cached sample order and never changes with the state.
struct AgentPoints {
  std::vector<geom::Vec3> positions;
  std::vector<geom::Vec3> normals;
  std::vector<int> link;

  std::size_t size() const { return positions.size(); }
  geom::PointCloud cloud() const;  // copy as a plain point cloud
};

// World transform (R, t) of every link for the given pose.
std::vector<std::pair<geom::Mat3, geom::Vec3>> link_transforms(const AgentDef& def,
                                                               const AgentState& state);

AgentPoints forward_kinematics(const AgentDef& def, const AgentState& state);

// Signed distance to the union of the posed capsules (negative inside).
double agent_sdf(const AgentDef& def, const AgentState& state, const geom::Vec3& p);
std::vector<double> agent_sdf(const AgentDef& def, const AgentState& state,
                              const std::vector<geom::Vec3>& pts);

// Projects each angle into [src - gamma, src + gamma]; idempotent.
Eigen::VectorXd clamp_joints(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_src,
                             double gamma);

// Structured-text round trip.  The definition format is line-oriented:
//   agent <link-count>
//   link <index> parent <p> axis <x y z> radius <r> half_length <h>
//        samples <n> offset_rot <x y z> offset_pos <x y z> center <x y z>
//        name <token>
// (one link per line, fields in any order after `link <index>`).
void save_agent(const AgentDef& def, const std::string& path);
AgentDef load_agent(const std::string& path);

// Pose sequences:
//   poses <frame-count> <joint-count>
//   frame <k> rot <x y z> trans <x y z> theta <a_1 ... a_nJ>
void save_poses(const std::vector<AgentState>& states, const std::string& path);
std::vector<AgentState> load_poses(const std::string& path);

}  // namespace itx::agent
