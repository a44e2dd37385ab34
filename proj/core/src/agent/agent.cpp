#include "itx/agent/agent.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "itx/geom/rotation.hpp"
#include "itx/geom/shape.hpp"
#include "itx/util/error.hpp"
#include "itx/util/rng.hpp"

namespace itx::agent {

using geom::Mat3;
using geom::Vec3;

int AgentDef::point_count() const {
  int n = 0;
  for (const Link& l : links) n += l.sample_count;
  return n;
}

void AgentDef::validate() const {
  require(!links.empty(), "agent: no links");
  require(links[0].parent == -1, "agent: link 0 must be the root (parent -1)");
  for (std::size_t i = 1; i < links.size(); ++i) {
    const Link& l = links[i];
    require(l.parent >= 0 && l.parent < static_cast<int>(i),
            "agent: link " + std::to_string(i) + " parent must precede it");
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    require(std::abs(l.axis.norm() - 1.0) < 1e-9,
            "agent: link " + std::to_string(i) + " hinge axis must be unit length");
    require(l.radius > 0.0 && l.half_length > 0.0,
            "agent: link " + std::to_string(i) + " capsule dimensions must be positive");
    require(l.sample_count > 0,
            "agent: link " + std::to_string(i) + " needs a positive sample count");
  }
}

void AgentDef::finalize(std::uint64_t seed) {
  validate();
  samples.clear();
  samples.reserve(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    Rng rng(seed ^ (0x9E3779B97F4A7C15ull * (i + 1)));
    LinkSamples ls;
    ls.points.reserve(static_cast<std::size_t>(l.sample_count));
    ls.normals.reserve(static_cast<std::size_t>(l.sample_count));
    // Area split between the cylindrical side and the two spherical caps.
    const double side_area = 2.0 * M_PI * l.radius * (2.0 * l.half_length);
    const double cap_area = 4.0 * M_PI * l.radius * l.radius;
    const double side_frac = side_area / (side_area + cap_area);
    for (int k = 0; k < l.sample_count; ++k) {
      Vec3 p, n;
      if (rng.uniform() < side_frac) {
        const double z = rng.uniform(-l.half_length, l.half_length);
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        n = Vec3(std::cos(phi), std::sin(phi), 0.0);
        p = Vec3(l.radius * n.x(), l.radius * n.y(), z);
      } else {
        Vec3 dir;
        do {
          dir = Vec3(rng.normal(), rng.normal(), rng.normal());
        } while (dir.norm() < 1e-9);
        dir.normalize();
        const double cap = rng.uniform() < 0.5 ? 1.0 : -1.0;
        if (dir.z() * cap < 0.0) dir.z() = -dir.z();
        n = dir;
        p = Vec3(0.0, 0.0, cap * l.half_length) + l.radius * dir;
      }
      ls.points.push_back(l.center + p);
      ls.normals.push_back(n);
    }
    samples.push_back(std::move(ls));
  }
}

AgentState AgentState::rest(const AgentDef& def) {
  AgentState s;
  s.theta = Eigen::VectorXd::Zero(def.joint_count());
  return s;
}

std::vector<std::pair<Mat3, Vec3>> link_transforms(const AgentDef& def, const AgentState& state) {
  require(state.theta.size() == def.joint_count(),
          "agent: state has " + std::to_string(state.theta.size()) + " angles for " +
              std::to_string(def.joint_count()) + " joints");
  require(state.theta.allFinite() && state.rot.allFinite() && state.trans.allFinite(),
          "agent: non-finite pose");

  std::vector<std::pair<Mat3, Vec3>> tf(def.links.size());
  tf[0] = {geom::axis_angle_to_matrix(state.rot), state.trans};
  for (std::size_t i = 1; i < def.links.size(); ++i) {
    const Link& l = def.links[i];
    const auto& [Rp, tp] = tf[static_cast<std::size_t>(l.parent)];
    const Mat3 hinge =
        geom::axis_angle_to_matrix(state.theta(static_cast<Eigen::Index>(i - 1)) * l.axis);
    tf[i] = {Rp * l.offset_R * hinge, Rp * l.offset_t + tp};
  }
  return tf;
}

AgentPoints forward_kinematics(const AgentDef& def, const AgentState& state) {
  require(def.samples.size() == def.links.size(),
          "agent: definition not finalized (no cached surface samples)");
  const auto tf = link_transforms(def, state);

  AgentPoints out;
  out.positions.reserve(static_cast<std::size_t>(def.point_count()));
  out.normals.reserve(out.positions.capacity());
  out.link.reserve(out.positions.capacity());
  for (std::size_t i = 0; i < def.links.size(); ++i) {
    const auto& [R, t] = tf[i];
    const LinkSamples& ls = def.samples[i];
    for (std::size_t k = 0; k < ls.points.size(); ++k) {
      out.positions.push_back(R * ls.points[k] + t);
      out.normals.push_back(R * ls.normals[k]);
      out.link.push_back(static_cast<int>(i));
    }
  }
  return out;
}

geom::PointCloud AgentPoints::cloud() const {
  geom::PointCloud pc;
  pc.points = positions;
  pc.normals = normals;
  return pc;
}

namespace {

double capsule_local_sdf(const Link& l, const Vec3& p_link) {
  const Vec3 q = p_link - l.center;
  const double z = std::clamp(q.z(), -l.half_length, l.half_length);
  return (q - Vec3(0.0, 0.0, z)).norm() - l.radius;
}

}  // namespace

double agent_sdf(const AgentDef& def, const AgentState& state, const Vec3& p) {
  return agent_sdf(def, state, std::vector<Vec3>{p})[0];
}

std::vector<double> agent_sdf(const AgentDef& def, const AgentState& state,
                              const std::vector<Vec3>& pts) {
  const auto tf = link_transforms(def, state);
  std::vector<double> out(pts.size(), std::numeric_limits<double>::max());
  for (std::size_t i = 0; i < def.links.size(); ++i) {
    const Mat3 Rt = tf[i].first.transpose();
    const Vec3& t = tf[i].second;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      out[k] = std::min(out[k], capsule_local_sdf(def.links[i], Rt * (pts[k] - t)));
    }
  }
  return out;
}

Eigen::VectorXd clamp_joints(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_src,
                             double gamma) {
  require(theta.size() == theta_src.size(), "clamp_joints: angle count mismatch");
  require(gamma >= 0.0, "clamp_joints: negative clamp width");
  return theta.array().max(theta_src.array() - gamma).min(theta_src.array() + gamma).matrix();
}

namespace {

void write_vec(std::ostream& os, const char* key, const Vec3& v) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), " %s %.17g %.17g %.17g", key, v.x(), v.y(), v.z());
  os << buf;
}

Vec3 read_vec(std::istringstream& is, const std::string& what) {
  Vec3 v;
  require(static_cast<bool>(is >> v.x() >> v.y() >> v.z()), "agent file: bad vector for " + what);
  return v;
}

}  // namespace

void save_agent(const AgentDef& def, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), "agent file: cannot open for writing: " + path);
  os << "agent " << def.links.size() << "\n";
  for (std::size_t i = 0; i < def.links.size(); ++i) {
    const Link& l = def.links[i];
    os << "link " << i << " parent " << l.parent;
    write_vec(os, "axis", l.axis);
    char buf[160];
    std::snprintf(buf, sizeof(buf), " radius %.17g half_length %.17g samples %d", l.radius,
                  l.half_length, l.sample_count);
    os << buf;
    write_vec(os, "offset_rot", geom::matrix_to_axis_angle(l.offset_R));
    write_vec(os, "offset_pos", l.offset_t);
    write_vec(os, "center", l.center);
    os << " name " << (l.name.empty() ? "link" + std::to_string(i) : l.name) << "\n";
  }
  require(os.good(), "agent file: write failed: " + path);
}

AgentDef load_agent(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "agent file: cannot open: " + path);
  std::string line;
  AgentDef def;
  std::size_t expected = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "agent") {
      require(static_cast<bool>(ls >> expected), "agent file: bad header");
      continue;
    }
    require(tag == "link", "agent file: unexpected record '" + tag + "'");
    std::size_t idx = 0;
    require(static_cast<bool>(ls >> idx), "agent file: bad link index");
    require(idx == def.links.size(), "agent file: links out of order");
    Link l;
    std::string key;
    while (ls >> key) {
      if (key == "parent") {
        require(static_cast<bool>(ls >> l.parent), "agent file: bad parent");
      } else if (key == "axis") {
        l.axis = read_vec(ls, "axis");
      } else if (key == "radius") {
        require(static_cast<bool>(ls >> l.radius), "agent file: bad radius");
      } else if (key == "half_length") {
        require(static_cast<bool>(ls >> l.half_length), "agent file: bad half_length");
      } else if (key == "samples") {
        require(static_cast<bool>(ls >> l.sample_count), "agent file: bad sample count");
      } else if (key == "offset_rot") {
        l.offset_R = geom::axis_angle_to_matrix(read_vec(ls, "offset_rot"));
      } else if (key == "offset_pos") {
        l.offset_t = read_vec(ls, "offset_pos");
      } else if (key == "center") {
        l.center = read_vec(ls, "center");
      } else if (key == "name") {
        require(static_cast<bool>(ls >> l.name), "agent file: bad name");
      } else {
        throw Error("agent file: unknown field '" + key + "'");
      }
    }
    def.links.push_back(l);
  }
  require(expected == def.links.size(), "agent file: link count mismatch");
  def.finalize();
  return def;
}

void save_poses(const std::vector<AgentState>& states, const std::string& path) {
  require(!states.empty(), "pose file: nothing to save");
  std::ofstream os(path);
  require(os.good(), "pose file: cannot open for writing: " + path);
  const Eigen::Index nj = states[0].theta.size();
  os << "poses " << states.size() << " " << nj << "\n";
  char buf[64];
  for (std::size_t k = 0; k < states.size(); ++k) {
    require(states[k].theta.size() == nj, "pose file: inconsistent joint counts");
    os << "frame " << k;
    write_vec(os, "rot", states[k].rot);
    write_vec(os, "trans", states[k].trans);
    os << " theta";
    for (Eigen::Index j = 0; j < nj; ++j) {
      std::snprintf(buf, sizeof(buf), " %.17g", states[k].theta(j));
      os << buf;
    }
    os << "\n";
  }
  require(os.good(), "pose file: write failed: " + path);
}

std::vector<AgentState> load_poses(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "pose file: cannot open: " + path);
  std::string line;
  std::size_t frames = 0;
  Eigen::Index nj = -1;
  std::vector<AgentState> out;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "poses") {
      require(static_cast<bool>(ls >> frames >> nj), "pose file: bad header");
      continue;
    }
    require(tag == "frame", "pose file: unexpected record '" + tag + "'");
    require(nj >= 0, "pose file: missing header");
    std::size_t idx = 0;
    require(static_cast<bool>(ls >> idx), "pose file: bad frame index");
    require(idx == out.size(), "pose file: frames out of order");
    AgentState st;
    st.theta = Eigen::VectorXd::Zero(nj);
    std::string key;
    while (ls >> key) {
      if (key == "rot") {
        st.rot = read_vec(ls, "rot");
      } else if (key == "trans") {
        st.trans = read_vec(ls, "trans");
      } else if (key == "theta") {
        for (Eigen::Index j = 0; j < nj; ++j) {
          require(static_cast<bool>(ls >> st.theta(j)), "pose file: bad angle");
        }
      } else {
        throw Error("pose file: unknown field '" + key + "'");
      }
    }
    out.push_back(std::move(st));
  }
  require(out.size() == frames, "pose file: frame count mismatch");
  return out;
}

}  // namespace itx::agent
