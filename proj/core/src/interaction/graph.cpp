#include "itx/interaction/graph.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "itx/geom/delaunay.hpp"
#include "itx/util/error.hpp"

namespace itx::interaction {

namespace {

constexpr double kMergeTol = 1e-9;
constexpr double kLengthFloor = 1e-8;

}  // namespace

std::vector<double> normalized_inverse_length_weights(const std::vector<double>& lengths) {
  require(!lengths.empty(), "weight normalization needs at least one edge");
  std::vector<double> w(lengths.size());
  double total = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    w[i] = 1.0 / std::max(lengths[i], kLengthFloor);
    total += w[i];
  }
  for (double& wi : w) wi /= total;
  return w;
}

InteractionGraph build_interaction_graph(const geom::PointCloud& object,
                                         const agent::AgentPoints& agent) {
  const int n_obj = static_cast<int>(object.points.size());
  const int n_agent = static_cast<int>(agent.positions.size());
  require(n_obj > 0, "interaction graph needs object points");
  require(n_agent > 0, "interaction graph needs agent points");
  require(agent.normals.size() == agent.positions.size(),
                "agent points must carry normals");

  // Combined indexing: objects first, agents after.
  const int n_total = n_obj + n_agent;
  auto position = [&](int combined) -> const Vec3& {
    return combined < n_obj ? object.points[static_cast<std::size_t>(combined)]
                            : agent.positions[static_cast<std::size_t>(combined - n_obj)];
  };

  // Merge near-coincident points so the triangulation sees each location
  // once.  Scanning in combined order makes the earliest point (object side
  // first) the representative of its cluster.
  std::vector<int> vertex_of(static_cast<std::size_t>(n_total), -1);
  std::vector<int> rep_combined;  // combined index of each Delaunay vertex
  std::vector<Vec3> vertex_pos;
  for (int c = 0; c < n_total; ++c) {
    const Vec3& p = position(c);
    int found = -1;
    for (std::size_t v = 0; v < vertex_pos.size(); ++v) {
      if ((vertex_pos[v] - p).norm() <= kMergeTol) {
        found = static_cast<int>(v);
        break;
      }
    }
    if (found < 0) {
      found = static_cast<int>(vertex_pos.size());
      vertex_pos.push_back(p);
      rep_combined.push_back(c);
    }
    vertex_of[static_cast<std::size_t>(c)] = found;
  }

  geom::DelaunayResult tri = geom::delaunay_tetrahedralize(vertex_pos);

  std::vector<std::set<int>> adjacency(vertex_pos.size());
  for (const auto& [a, b] : tri.edges) {
    adjacency[static_cast<std::size_t>(a)].insert(b);
    adjacency[static_cast<std::size_t>(b)].insert(a);
  }

  InteractionGraph g;
  g.object_count = n_obj;
  g.agent_count = n_agent;
  g.agent_neighbors.resize(static_cast<std::size_t>(n_agent));
  g.agent_weights.resize(static_cast<std::size_t>(n_agent));
  g.object_neighbors.resize(static_cast<std::size_t>(n_agent));
  g.object_weights.resize(static_cast<std::size_t>(n_agent));
  g.delta.resize(static_cast<std::size_t>(n_agent));
  g.source_normals = agent.normals;

  std::vector<Vec3> agent_pos = agent.positions;
  std::vector<Vec3> object_pos = object.points;

  for (int i = 0; i < n_agent; ++i) {
    const int vi = vertex_of[static_cast<std::size_t>(n_obj + i)];
    // Neighbor combined indices (cluster representatives), objects before
    // agents and ascending within each side, matching the combined order.
    std::vector<int> combined;
    combined.reserve(adjacency[static_cast<std::size_t>(vi)].size());
    for (int vn : adjacency[static_cast<std::size_t>(vi)])
      combined.push_back(rep_combined[static_cast<std::size_t>(vn)]);
    std::sort(combined.begin(), combined.end());

    require(!combined.empty(), "agent point with no interaction neighbors");

    std::vector<double> lengths;
    lengths.reserve(combined.size());
    const Vec3& pi = agent.positions[static_cast<std::size_t>(i)];
    for (int c : combined) lengths.push_back((position(c) - pi).norm());
    const std::vector<double> w = normalized_inverse_length_weights(lengths);

    for (std::size_t m = 0; m < combined.size(); ++m) {
      if (combined[m] < n_obj) {
        g.object_neighbors[static_cast<std::size_t>(i)].push_back(combined[m]);
        g.object_weights[static_cast<std::size_t>(i)].push_back(w[m]);
      } else {
        g.agent_neighbors[static_cast<std::size_t>(i)].push_back(combined[m] - n_obj);
        g.agent_weights[static_cast<std::size_t>(i)].push_back(w[m]);
      }
    }
    g.delta[static_cast<std::size_t>(i)] = laplacian_coordinate(g, i, agent_pos, object_pos);
  }
  return g;
}

Vec3 laplacian_coordinate(const InteractionGraph& graph, int i,
                          const std::vector<Vec3>& agent_positions,
                          const std::vector<Vec3>& object_positions) {
  require(i >= 0 && i < graph.agent_count, "agent index out of range");
  require(static_cast<int>(agent_positions.size()) == graph.agent_count,
                "agent position count does not match the graph");
  require(static_cast<int>(object_positions.size()) == graph.object_count,
                "object position count does not match the graph");
  const std::size_t ui = static_cast<std::size_t>(i);
  Vec3 acc = agent_positions[ui];
  const auto& an = graph.agent_neighbors[ui];
  const auto& aw = graph.agent_weights[ui];
  for (std::size_t m = 0; m < an.size(); ++m)
    acc -= aw[m] * agent_positions[static_cast<std::size_t>(an[m])];
  const auto& on = graph.object_neighbors[ui];
  const auto& ow = graph.object_weights[ui];
  for (std::size_t m = 0; m < on.size(); ++m)
    acc -= ow[m] * object_positions[static_cast<std::size_t>(on[m])];
  return acc;
}

}  // namespace itx::interaction
