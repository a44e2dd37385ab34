#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "itx/agent/agent.hpp"
#include "itx/eval/metrics.hpp"
#include "itx/geom/shape.hpp"
#include "itx/util/error.hpp"
#include "itx/util/rng.hpp"

using namespace itx;
using eval::contact_indices;
using eval::contact_iou;
using eval::eval_body;
using eval::EvalBody;
using eval::EvalReport;
using eval::penetration_metrics;
using eval::PenetrationMetrics;
using geom::Vec3;

namespace {

// Single-capsule agent; half_length ~ 0 makes it a sphere of the given radius.
agent::AgentDef ball_agent(double radius, double half_length = 1e-9) {
  agent::AgentDef def;
  agent::Link root;
  root.name = "ball";
  root.parent = -1;
  root.radius = radius;
  root.half_length = half_length;
  root.sample_count = 16;
  def.links = {root};
  def.finalize();
  return def;
}

geom::AnalyticShape box_shape(const Vec3& half_extents, const Vec3& center = Vec3::Zero()) {
  geom::Primitive prim;
  prim.kind = geom::PrimitiveKind::Box;
  prim.size = half_extents;
  prim.t = center;
  geom::AnalyticShape s;
  s.prims = {prim};
  return s;
}

geom::AnalyticShape sphere_shape(double radius, const Vec3& center) {
  geom::Primitive prim;
  prim.kind = geom::PrimitiveKind::Sphere;
  prim.size = Vec3(radius, 0, 0);
  prim.t = center;
  geom::AnalyticShape s;
  s.prims = {prim};
  return s;
}

// Overlap volume of spheres (r1 at origin) and (r2 at distance d): the sum of
// the two spherical caps cut by the radical plane.
double lens_volume(double r1, double r2, double d) {
  const double x1 = (d * d - r2 * r2 + r1 * r1) / (2.0 * d);
  const double x2 = (d * d - r1 * r1 + r2 * r2) / (2.0 * d);
  const double h1 = r1 - x1;
  const double h2 = r2 - x2;
  const double pi = 3.14159265358979323846;
  return pi / 3.0 * (h1 * h1 * (3.0 * r1 - h1) + h2 * h2 * (3.0 * r2 - h2));
}

std::map<std::string, std::vector<std::string>> read_kv_records(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::map<std::string, std::vector<std::string>> records;
  std::string line, current;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "record") {
      ss >> current;
      records[current] = {};
    } else if (!current.empty()) {
      records[current].push_back(line);
    }
  }
  return records;
}

double kv_value(const std::vector<std::string>& lines, const std::string& key) {
  for (const std::string& l : lines) {
    std::istringstream ss(l);
    std::string k;
    double v;
    ss >> k >> v;
    if (k == key) return v;
  }
  FAIL("missing key ", key);
  return 0.0;
}

}  // namespace

TEST_CASE("contact sets follow the distance threshold") {
  std::vector<double> d = {0.001, -0.0015, 0.05, -0.3, 0.002, 0.0};
  CHECK(contact_indices(d, 0.002) == std::vector<int>{0, 1, 4, 5});
  CHECK(contact_indices(d, 0.0) == std::vector<int>{5});
  CHECK(contact_indices({}, 0.01).empty());
  CHECK_THROWS_AS(contact_indices(d, -1.0), Error);
}

TEST_CASE("contact IoU on hand-built index sets") {
  // Distances chosen so a threshold of 0.01 marks exactly the intended sets.
  const double in = 0.005, out = 0.5;

  SUBCASE("identical sets give 100") {
    std::vector<double> s = {in, out, in, out};
    CHECK(contact_iou(s, s, 0.01) == 100.0);
  }
  SUBCASE("disjoint nonempty sets give 0") {
    std::vector<double> s = {in, in, out, out};
    std::vector<double> t = {out, out, in, in};
    CHECK(contact_iou(s, t, 0.01) == 0.0);
  }
  SUBCASE("two-element sets sharing one index give one third") {
    std::vector<double> s = {in, in, out, out};
    std::vector<double> t = {in, out, in, out};
    CHECK(contact_iou(s, t, 0.01) == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("both empty count as perfect agreement") {
    std::vector<double> s = {out, out};
    CHECK(contact_iou(s, s, 0.01) == 100.0);
  }
  SUBCASE("negative distances count by magnitude") {
    std::vector<double> s = {-in, out};
    std::vector<double> t = {in, out};
    CHECK(contact_iou(s, t, 0.01) == 100.0);
  }
  SUBCASE("point-count mismatch is rejected") {
    std::vector<double> s = {in, in};
    std::vector<double> t = {in};
    CHECK_THROWS_AS(contact_iou(s, t, 0.01), Error);
  }
}

TEST_CASE("contact IoU is symmetric in its interaction arguments") {
  Rng rng(71);
  std::vector<double> s(40), t(40);
  for (int i = 0; i < 40; ++i) {
    s[static_cast<std::size_t>(i)] = rng.normal() * 0.02;
    t[static_cast<std::size_t>(i)] = rng.normal() * 0.02;
  }
  for (double thr : {0.0, 0.005, 0.02, 0.1})
    CHECK(contact_iou(s, t, thr) == contact_iou(t, s, thr));
}

TEST_CASE("disjoint agent and object score zero depth and volume") {
  agent::AgentDef def = ball_agent(0.2);
  agent::AgentState st = agent::AgentState::rest(def);
  EvalBody obj = eval_body(sphere_shape(0.2, Vec3(2.0, 0, 0)), 256, 3);
  PenetrationMetrics m = penetration_metrics(def, st, obj, 32);
  CHECK(m.depth == 0.0);
  CHECK(m.volume == 0.0);

  SUBCASE("voxel_res below 8 is rejected") {
    CHECK_THROWS_AS(penetration_metrics(def, st, obj, 7), Error);
  }
}

TEST_CASE("volume of a box contained in the agent matches the closed form") {
  // A fat capsule encloses the whole box, so the lattice (which spans exactly
  // the box bounds) counts every voxel: the estimate is the exact box volume.
  agent::AgentDef def = ball_agent(0.8, 0.3);
  agent::AgentState st = agent::AgentState::rest(def);
  const Vec3 half(0.2, 0.15, 0.25);
  EvalBody obj = eval_body(box_shape(half), 256, 5);
  const double v_true = 8.0 * half.x() * half.y() * half.z();
  PenetrationMetrics m = penetration_metrics(def, st, obj, 64);
  CHECK(m.volume == doctest::Approx(v_true).epsilon(0.05));
  CHECK(m.volume == doctest::Approx(v_true).epsilon(1e-12));  // exact here
  CHECK(m.depth > 0.0);  // box surface samples sit deep inside the agent
}

TEST_CASE("sphere overlap volume matches the closed-form lens") {
  const double r_agent = 0.3, r_obj = 0.25, d = 0.4;
  agent::AgentDef def = ball_agent(r_agent);
  agent::AgentState st = agent::AgentState::rest(def);
  EvalBody obj = eval_body(sphere_shape(r_obj, Vec3(d, 0, 0)), 512, 7);
  const double v_true = lens_volume(r_agent, r_obj, d);
  PenetrationMetrics m = penetration_metrics(def, st, obj, 64);
  CHECK(m.volume == doctest::Approx(v_true).epsilon(0.05));

  SUBCASE("volume estimates converge as the lattice doubles") {
    const double v16 = penetration_metrics(def, st, obj, 16).volume;
    const double v32 = penetration_metrics(def, st, obj, 32).volume;
    const double v64 = penetration_metrics(def, st, obj, 64).volume;
    CHECK(std::abs(v32 - v_true) < std::abs(v16 - v_true));
    CHECK(std::abs(v64 - v_true) < std::abs(v32 - v_true));
  }
}

TEST_CASE("depth equals the deepest hand-placed sample") {
  const double r_agent = 0.3, r_obj = 0.25, d = 0.4;
  agent::AgentDef def = ball_agent(r_agent);
  agent::AgentState st = agent::AgentState::rest(def);
  // Hand-placed object surface points: the near pole penetrates 0.15 deep,
  // the far pole and flank stay outside the agent.
  geom::PointCloud cloud;
  cloud.points = {Vec3(d - r_obj, 0, 0), Vec3(d + r_obj, 0, 0), Vec3(d, r_obj, 0)};
  cloud.normals.assign(3, Vec3::UnitX());
  geom::AnalyticShape sph = sphere_shape(r_obj, Vec3(d, 0, 0));
  EvalBody obj = eval_body(cloud, [sph](const Vec3& p) { return sph.sdf(p); });
  PenetrationMetrics m = penetration_metrics(def, st, obj, 16);
  CHECK(m.depth == doctest::Approx(0.15).epsilon(1e-9));
}

TEST_CASE("metrics are deterministic given identical inputs") {
  agent::AgentDef def = ball_agent(0.3);
  agent::AgentState st = agent::AgentState::rest(def);
  EvalBody obj = eval_body(sphere_shape(0.25, Vec3(0.4, 0, 0)), 512, 7);
  PenetrationMetrics a = penetration_metrics(def, st, obj, 32);
  PenetrationMetrics b = penetration_metrics(def, st, obj, 32);
  CHECK(a.depth == b.depth);
  CHECK(a.volume == b.volume);
}

TEST_CASE("agent-point contact IoU via object distances") {
  agent::AgentDef def = ball_agent(0.1, 0.05);
  agent::AgentState st = agent::AgentState::rest(def);
  agent::AgentPoints pts = agent::forward_kinematics(def, st);
  // Against its own enclosing sphere every point is within threshold of the
  // surface only if the threshold is generous; identical inputs give 100.
  geom::AnalyticShape sph = sphere_shape(0.16, Vec3::Zero());
  EvalBody obj = eval_body(sph, 128, 9);
  const double iou = contact_iou(pts, obj, pts, obj, 0.02);
  CHECK(iou == 100.0);
}

TEST_CASE("report files carry aligned rows and full-precision records") {
  const std::string path = "/tmp/itx_test_report.txt";
  const std::string kv_path = path + ".kv";
  std::remove(path.c_str());
  std::remove(kv_path.c_str());

  EvalReport a;
  a.name = "grasp-a";
  a.depth = 0.0123;
  a.volume = 0.00045;
  a.iou = 87.5;
  a.threshold = 0.02;
  a.voxel_res = 64;
  a.seconds = 1.25;
  EvalReport b = a;
  b.name = "grasp-b";
  b.depth = 0.0077;
  b.volume = 0.00015;
  b.iou = 92.5;
  b.seconds = 0.75;

  SUBCASE("single report appears as one row plus the mean") {
    eval::write_report({a}, path);
    auto records = read_kv_records(kv_path);
    REQUIRE(records.count("0") == 1);
    REQUIRE(records.count("mean") == 1);
    CHECK(kv_value(records["0"], "depth") == doctest::Approx(a.depth).epsilon(1e-15));
    CHECK(kv_value(records["mean"], "iou") == doctest::Approx(a.iou).epsilon(1e-15));

    std::ifstream table(path);
    std::string text((std::istreambuf_iterator<char>(table)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("grasp-a") != std::string::npos);
    CHECK(text.find("mean") != std::string::npos);
    CHECK(text.find("Dep.") != std::string::npos);
    CHECK(text.find("Vol.") != std::string::npos);
    CHECK(text.find("IoU") != std::string::npos);
    CHECK(text.find("Time") != std::string::npos);
  }

  SUBCASE("mean row averages the numeric columns") {
    eval::write_report({a, b}, path);
    auto records = read_kv_records(kv_path);
    REQUIRE(records.count("mean") == 1);
    CHECK(kv_value(records["mean"], "depth") ==
          doctest::Approx(0.5 * (a.depth + b.depth)).epsilon(1e-15));
    CHECK(kv_value(records["mean"], "volume") ==
          doctest::Approx(0.5 * (a.volume + b.volume)).epsilon(1e-15));
    CHECK(kv_value(records["mean"], "iou") ==
          doctest::Approx(0.5 * (a.iou + b.iou)).epsilon(1e-15));
    CHECK(kv_value(records["mean"], "seconds") ==
          doctest::Approx(0.5 * (a.seconds + b.seconds)).epsilon(1e-15));
  }

  SUBCASE("an empty list is rejected before any file is written") {
    CHECK_THROWS_AS(eval::write_report({}, path), Error);
    CHECK(!std::filesystem::exists(path));
    CHECK(!std::filesystem::exists(kv_path));
  }
}
