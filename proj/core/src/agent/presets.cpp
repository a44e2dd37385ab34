#include "itx/agent/presets.hpp"

#include <cmath>

#include "itx/util/error.hpp"

namespace itx::agent {

using geom::Mat3;
using geom::Vec3;

namespace {

Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

Link make_link(const std::string& name, int parent, const Mat3& offset_R, const Vec3& offset_t,
               const Vec3& axis, const Vec3& center, double radius, double half_length,
               int samples) {
  Link l;
  l.name = name;
  l.parent = parent;
  l.offset_R = offset_R;
  l.offset_t = offset_t;
  l.axis = axis;
  l.center = center;
  l.radius = radius;
  l.half_length = half_length;
  l.sample_count = samples;
  return l;
}

}  // namespace

AgentDef make_gripper() {
  AgentDef def;
  def.links.push_back(make_link("palm", -1, Mat3::Identity(), Vec3::Zero(), Vec3::UnitZ(),
                                Vec3::Zero(), 0.075, 0.05, 150));

  // One opposing finger plus a pinch pair.  Each finger frame is the palm
  // frame yawed to its azimuth, so local +x points radially outward and the
  // +y hinge curls the finger toward the palm axis.
  const double azimuth[3] = {0.0, M_PI - 0.5, M_PI + 0.5};
  const char* fname[3] = {"thumb", "index", "ring"};
  for (int f = 0; f < 3; ++f) {
    const Mat3 Rz = rot_z(azimuth[f]);
    const Vec3 root = Rz * Vec3(0.085, 0.0, 0.0) + Vec3(0.0, 0.0, -0.03);
    const int prox = static_cast<int>(def.links.size());
    def.links.push_back(make_link(std::string(fname[f]) + "_prox", 0, Rz, root, Vec3::UnitY(),
                                  Vec3(0, 0, -0.055), 0.022, 0.055, 75));
    def.links.push_back(make_link(std::string(fname[f]) + "_dist", prox, Mat3::Identity(),
                                  Vec3(0, 0, -0.11), Vec3::UnitY(), Vec3(0, 0, -0.05), 0.02, 0.05,
                                  75));
  }
  def.finalize();
  return def;
}

AgentDef make_sitter() {
  AgentDef def;
  def.links.push_back(make_link("torso", -1, Mat3::Identity(), Vec3::Zero(), Vec3::UnitZ(),
                                Vec3::Zero(), 0.085, 0.16, 220));

  // Legs: hip and knee pitch about +x; thighs hang from the torso base.
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? -1.0 : 1.0;
    const std::string tag = side == 0 ? "l" : "r";
    const int thigh = static_cast<int>(def.links.size());
    def.links.push_back(make_link("thigh_" + tag, 0, Mat3::Identity(),
                                  Vec3(sx * 0.055, 0.0, -0.15), Vec3::UnitX(), Vec3(0, 0, -0.09),
                                  0.045, 0.09, 85));
    def.links.push_back(make_link("shin_" + tag, thigh, Mat3::Identity(), Vec3(0, 0, -0.18),
                                  Vec3::UnitX(), Vec3(0, 0, -0.095), 0.038, 0.095, 85));
  }
  // Arms: shoulder and elbow pitch about +x; upper arms hang from the
  // shoulder line.
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? -1.0 : 1.0;
    const std::string tag = side == 0 ? "l" : "r";
    const int uarm = static_cast<int>(def.links.size());
    def.links.push_back(make_link("uarm_" + tag, 0, Mat3::Identity(),
                                  Vec3(sx * 0.105, 0.0, 0.10), Vec3::UnitX(), Vec3(0, 0, -0.08),
                                  0.032, 0.08, 85));
    def.links.push_back(make_link("farm_" + tag, uarm, Mat3::Identity(), Vec3(0, 0, -0.16),
                                  Vec3::UnitX(), Vec3(0, 0, -0.075), 0.028, 0.075, 85));
  }
  def.finalize();
  return def;
}

AgentDef make_agent(const std::string& name) {
  if (name == "gripper") return make_gripper();
  if (name == "sitter") return make_sitter();
  throw Error("unknown agent preset '" + name + "' (expected gripper or sitter)");
}

}  // namespace itx::agent
