#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "itx/agent/agent.hpp"
#include "itx/agent/presets.hpp"
#include "itx/geom/point_cloud.hpp"
#include "itx/geom/rotation.hpp"
#include "itx/geom/sampling.hpp"
#include "itx/geom/shape.hpp"
#include "itx/interaction/graph.hpp"
#include "itx/util/error.hpp"
#include "itx/util/rng.hpp"

using namespace itx;
using interaction::build_interaction_graph;
using interaction::InteractionGraph;
using interaction::laplacian_coordinate;
using interaction::normalized_inverse_length_weights;
using geom::Vec3;

namespace {

agent::AgentPoints points_from(const std::vector<Vec3>& pos) {
  agent::AgentPoints a;
  a.positions = pos;
  a.normals.assign(pos.size(), Vec3::UnitZ());
  a.link.assign(pos.size(), 0);
  return a;
}

geom::PointCloud cloud_from(const std::vector<Vec3>& pos) {
  geom::PointCloud c;
  c.points = pos;
  c.normals.assign(pos.size(), Vec3::UnitX());
  return c;
}

std::vector<Vec3> random_positions(int n, Rng& rng, double scale = 1.0) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.emplace_back(scale * (2.0 * rng.uniform() - 1.0), scale * (2.0 * rng.uniform() - 1.0),
                     scale * (2.0 * rng.uniform() - 1.0));
  return out;
}

}  // namespace

TEST_CASE("inverse-length weights: equal, 1:3, floor, and normalization") {
  SUBCASE("two equal lengths split evenly") {
    auto w = normalized_inverse_length_weights({2.5, 2.5});
    REQUIRE(w.size() == 2);
    CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("lengths 1 and 3 give 0.75 / 0.25") {
    auto w = normalized_inverse_length_weights({1.0, 3.0});
    CHECK(w[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("zero length clamps to the 1e-8 floor instead of dividing by zero") {
    auto w = normalized_inverse_length_weights({0.0, 1.0});
    CHECK(std::isfinite(w[0]));
    CHECK(w[0] > 0.9999999);
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("many random lengths sum to one") {
    Rng rng(7);
    std::vector<double> lens;
    for (int i = 0; i < 17; ++i) lens.push_back(0.05 + rng.uniform());
    auto w = normalized_inverse_length_weights(lens);
    double total = 0.0;
    for (double wi : w) {
      CHECK(wi > 0.0);
      total += wi;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(normalized_inverse_length_weights({}), Error);
  }
}

TEST_CASE("centroid agent point inside a regular tetrahedron: all four object "
          "neighbors at weight 1/4 and a zero Laplacian coordinate") {
  std::vector<Vec3> tet = {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
  auto g = build_interaction_graph(cloud_from(tet), points_from({Vec3::Zero()}));

  REQUIRE(g.agent_count == 1);
  REQUIRE(g.object_count == 4);
  CHECK(g.agent_neighbors[0].empty());
  REQUIRE(g.object_neighbors[0].size() == 4);
  CHECK(g.object_neighbors[0] == std::vector<int>{0, 1, 2, 3});
  for (double w : g.object_weights[0]) CHECK(w == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(g.delta[0].norm() < 1e-12);
  CHECK(g.source_normals.size() == 1);
}

TEST_CASE("Laplacian coordinate of a hand-built two-neighbor star") {
  // Agent point at (0,0,1) with object neighbors (1,0,0) and (-1,0,0) at
  // weights 1/2 each: the x contributions cancel and delta = (0,0,1).
  InteractionGraph g;
  g.object_count = 2;
  g.agent_count = 1;
  g.agent_neighbors = {{}};
  g.agent_weights = {{}};
  g.object_neighbors = {{0, 1}};
  g.object_weights = {{0.5, 0.5}};
  g.delta = {Vec3::Zero()};
  g.source_normals = {Vec3::UnitZ()};

  Vec3 d = laplacian_coordinate(g, 0, {Vec3(0, 0, 1)}, {Vec3(1, 0, 0), Vec3(-1, 0, 0)});
  CHECK((d - Vec3(0, 0, 1)).norm() < 1e-15);

  SUBCASE("shifting one neighbor moves delta by the weighted amount") {
    Vec3 d2 = laplacian_coordinate(g, 0, {Vec3(0, 0, 1)}, {Vec3(1, 0, 2), Vec3(-1, 0, 0)});
    CHECK((d2 - Vec3(0, 0, 0)).norm() < 1e-15);
  }
  SUBCASE("index and size validation") {
    CHECK_THROWS_AS(laplacian_coordinate(g, 1, {Vec3::Zero()}, {Vec3::Zero(), Vec3::Zero()}),
                    Error);
    CHECK_THROWS_AS(laplacian_coordinate(g, 0, {Vec3::Zero()}, {Vec3::Zero()}), Error);
  }
}

TEST_CASE("dense-matrix evaluation reproduces the graph's Laplacian coordinates") {
  Rng rng(42);
  const int n_obj = 20;
  const int n_agent = 10;
  auto obj = random_positions(n_obj, rng);
  auto agt = random_positions(n_agent, rng, 0.6);
  auto g = build_interaction_graph(cloud_from(obj), points_from(agt));

  // Independent formulation: stack positions as rows of P (objects first),
  // build the dense weight matrix row per agent point, delta = (I_sel - W) P.
  Eigen::MatrixXd P(n_obj + n_agent, 3);
  for (int j = 0; j < n_obj; ++j) P.row(j) = obj[static_cast<std::size_t>(j)].transpose();
  for (int j = 0; j < n_agent; ++j)
    P.row(n_obj + j) = agt[static_cast<std::size_t>(j)].transpose();

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n_agent, n_obj + n_agent);
  for (int i = 0; i < n_agent; ++i) {
    M(i, n_obj + i) = 1.0;
    const auto& on = g.object_neighbors[static_cast<std::size_t>(i)];
    const auto& ow = g.object_weights[static_cast<std::size_t>(i)];
    for (std::size_t m = 0; m < on.size(); ++m) M(i, on[m]) -= ow[m];
    const auto& an = g.agent_neighbors[static_cast<std::size_t>(i)];
    const auto& aw = g.agent_weights[static_cast<std::size_t>(i)];
    for (std::size_t m = 0; m < an.size(); ++m) M(i, n_obj + an[m]) -= aw[m];
  }
  Eigen::MatrixXd D = M * P;
  for (int i = 0; i < n_agent; ++i) {
    Vec3 want = D.row(i).transpose();
    CHECK((want - g.delta[static_cast<std::size_t>(i)]).norm() < 1e-12);
  }

  SUBCASE("weights of every agent point sum to one") {
    for (int i = 0; i < n_agent; ++i) {
      double total = 0.0;
      for (double w : g.agent_weights[static_cast<std::size_t>(i)]) total += w;
      for (double w : g.object_weights[static_cast<std::size_t>(i)]) total += w;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
      CHECK((!g.agent_neighbors[static_cast<std::size_t>(i)].empty() ||
             !g.object_neighbors[static_cast<std::size_t>(i)].empty()));
    }
  }
  SUBCASE("no agent point lists itself as a neighbor") {
    for (int i = 0; i < n_agent; ++i)
      for (int j : g.agent_neighbors[static_cast<std::size_t>(i)]) CHECK(j != i);
  }
  SUBCASE("neighbor lists are sorted ascending") {
    for (int i = 0; i < n_agent; ++i) {
      const auto& on = g.object_neighbors[static_cast<std::size_t>(i)];
      const auto& an = g.agent_neighbors[static_cast<std::size_t>(i)];
      CHECK(std::is_sorted(on.begin(), on.end()));
      CHECK(std::is_sorted(an.begin(), an.end()));
    }
  }
}

TEST_CASE("Laplacian coordinates are translation invariant and rotation covariant") {
  Rng rng(5);
  auto obj = random_positions(16, rng);
  auto agt = random_positions(6, rng, 0.5);
  auto g = build_interaction_graph(cloud_from(obj), points_from(agt));

  const Vec3 t(0.3, -1.2, 2.0);
  const geom::Mat3 Q = geom::random_rotation(rng);

  std::vector<Vec3> obj_t = obj, agt_t = agt, obj_r = obj, agt_r = agt;
  for (auto& p : obj_t) p += t;
  for (auto& p : agt_t) p += t;
  for (auto& p : obj_r) p = Q * p;
  for (auto& p : agt_r) p = Q * p;

  for (int i = 0; i < g.agent_count; ++i) {
    Vec3 base = laplacian_coordinate(g, i, agt, obj);
    Vec3 shifted = laplacian_coordinate(g, i, agt_t, obj_t);
    Vec3 rotated = laplacian_coordinate(g, i, agt_r, obj_r);
    CHECK((shifted - base).norm() < 1e-9);
    CHECK((rotated - Q * base).norm() < 1e-9);
  }
}

TEST_CASE("source positions reproduce the stored coordinates exactly") {
  Rng rng(11);
  auto obj = random_positions(12, rng);
  auto agt = random_positions(5, rng, 0.4);
  auto g = build_interaction_graph(cloud_from(obj), points_from(agt));
  for (int i = 0; i < g.agent_count; ++i) {
    Vec3 again = laplacian_coordinate(g, i, agt, obj);
    CHECK(again.x() == g.delta[static_cast<std::size_t>(i)].x());
    CHECK(again.y() == g.delta[static_cast<std::size_t>(i)].y());
    CHECK(again.z() == g.delta[static_cast<std::size_t>(i)].z());
  }
}

TEST_CASE("near-coincident points are merged before triangulation") {
  // One agent point sits exactly on an object point, another within 1e-10 of
  // a second object point; both must merge instead of producing degenerate
  // slivers, and the merged points must not become their own neighbors.
  std::vector<Vec3> obj = {Vec3(0, 0, 0),       Vec3(1, 0, 0),      Vec3(0, 1, 0),
                           Vec3(0, 0, 1),       Vec3(1.2, 1.1, 0),  Vec3(1.1, 0, 1.2),
                           Vec3(0, 1.15, 1.2),  Vec3(1.05, 0.95, 1.1)};
  std::vector<Vec3> agt = {Vec3(1, 0, 0), Vec3(0, 1, 5e-11), Vec3(0.5, 0.5, 0.5)};
  auto g = build_interaction_graph(cloud_from(obj), points_from(agt));

  REQUIRE(g.agent_count == 3);
  for (int i = 0; i < g.agent_count; ++i) {
    double total = 0.0;
    for (double w : g.agent_weights[static_cast<std::size_t>(i)]) total += w;
    for (double w : g.object_weights[static_cast<std::size_t>(i)]) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    for (int j : g.agent_neighbors[static_cast<std::size_t>(i)]) CHECK(j != i);
  }
  // Agent 0 coincides with object 1: that object point must not appear in its
  // own neighbor list (it is the same Delaunay vertex).
  const auto& on0 = g.object_neighbors[0];
  CHECK(std::find(on0.begin(), on0.end(), 1) == on0.end());
  // Agent 1 merged into object 2 the same way.
  const auto& on1 = g.object_neighbors[1];
  CHECK(std::find(on1.begin(), on1.end(), 2) == on1.end());
  // The interior agent point keeps a full neighborhood.
  CHECK(g.object_neighbors[2].size() + g.agent_neighbors[2].size() >= 4);
}

TEST_CASE("degenerate and undersized inputs are rejected") {
  SUBCASE("coplanar combined set") {
    std::vector<Vec3> obj = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
    std::vector<Vec3> agt = {Vec3(0.5, 0.5, 0.0)};
    CHECK_THROWS_AS(build_interaction_graph(cloud_from(obj), points_from(agt)), Error);
  }
  SUBCASE("too few combined points") {
    std::vector<Vec3> obj = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    std::vector<Vec3> agt = {Vec3(0, 1, 0)};
    CHECK_THROWS_AS(build_interaction_graph(cloud_from(obj), points_from(agt)), Error);
  }
  SUBCASE("empty sides") {
    CHECK_THROWS_AS(build_interaction_graph(cloud_from({}), points_from({Vec3::Zero()})),
                    Error);
    std::vector<Vec3> obj = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    CHECK_THROWS_AS(build_interaction_graph(cloud_from(obj), points_from({})), Error);
  }
}

TEST_CASE("rebuilding the graph is deterministic") {
  Rng rng(3);
  auto obj = random_positions(25, rng);
  auto agt = random_positions(8, rng, 0.7);
  auto g1 = build_interaction_graph(cloud_from(obj), points_from(agt));
  auto g2 = build_interaction_graph(cloud_from(obj), points_from(agt));
  REQUIRE(g1.agent_count == g2.agent_count);
  for (int i = 0; i < g1.agent_count; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    CHECK(g1.agent_neighbors[ui] == g2.agent_neighbors[ui]);
    CHECK(g1.object_neighbors[ui] == g2.object_neighbors[ui]);
    CHECK(g1.agent_weights[ui] == g2.agent_weights[ui]);
    CHECK(g1.object_weights[ui] == g2.object_weights[ui]);
    CHECK(g1.delta[ui] == g2.delta[ui]);
  }
}

TEST_CASE("gripper posed over a sampled mug builds a usable graph") {
  geom::AnalyticShape mug = geom::generate_shape("mug", 4);
  geom::PointCloud cloud = geom::sample_surface(mug, 96, 19);

  agent::AgentDef def = agent::make_gripper();
  def.finalize();
  agent::AgentState state = agent::AgentState::rest(def);
  state.trans = Vec3(0, 0, 0.9);
  agent::AgentPoints pts = agent::forward_kinematics(def, state);

  auto g = build_interaction_graph(cloud, pts);
  CHECK(g.object_count == 96);
  CHECK(g.agent_count == static_cast<int>(pts.size()));
  int touching_object = 0;
  for (int i = 0; i < g.agent_count; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    CHECK(g.agent_neighbors[ui].size() + g.object_neighbors[ui].size() >= 1);
    double total = 0.0;
    for (double w : g.agent_weights[ui]) total += w;
    for (double w : g.object_weights[ui]) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    if (!g.object_neighbors[ui].empty()) ++touching_object;
    CHECK(g.delta[ui].norm() < 10.0);
  }
  // At least some agent points must couple to the object for the structure to
  // carry any interaction information.
  CHECK(touching_object > 0);
}
