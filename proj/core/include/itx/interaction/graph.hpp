#pragma once

#include <vector>

#include "itx/agent/agent.hpp"
#include "itx/geom/point_cloud.hpp"

namespace itx::interaction {

using geom::Vec3;

// Interaction structure between an object point set and an agent point set:
// for every agent point, its neighbors from the Delaunay tetrahedralization
// of the combined set, split into agent-side and object-side lists, with
// inverse-edge-length weights normalized to sum 1 across both lists.  The
// Laplacian coordinate delta_i = a_i - sum w_ij a_j - sum w_ij o_j captures
// the local arrangement; the agent normals at build time are cached for the
// later surface-alignment rotations.
//
// Neighborhoods and weights are frozen from the build-time (source)
// configuration; evaluating the coordinates with other positions never
// rebuilds them.
struct InteractionGraph {
  int object_count = 0;
  int agent_count = 0;
  std::vector<std::vector<int>> agent_neighbors;    // per agent point, agent indices
  std::vector<std::vector<double>> agent_weights;   // aligned with agent_neighbors
  std::vector<std::vector<int>> object_neighbors;   // per agent point, object indices
  std::vector<std::vector<double>> object_weights;  // aligned with object_neighbors
  std::vector<Vec3> delta;                          // source Laplacian coordinates
  std::vector<Vec3> source_normals;                 // agent normals at build time
};

// weights[i] = (1 / max(lengths[i], 1e-8)) normalized so the result sums to 1.
std::vector<double> normalized_inverse_length_weights(const std::vector<double>& lengths);

// Builds the graph over object + agent points.  Points closer than 1e-9 are
// merged into one Delaunay vertex first (object points take precedence as
// representatives); each agent point then adopts its representative's
// neighborhoods.  Neighbor lists are sorted by index (objects before agents)
// and exclude the point itself.  Delaunay failures (too few points, affine
// degeneracy) propagate.
InteractionGraph build_interaction_graph(const geom::PointCloud& object,
                                         const agent::AgentPoints& agent);

// delta_i for agent index i evaluated at the given positions (arrays indexed
// exactly like the build-time inputs).  With the build-time positions this
// reproduces graph.delta bitwise.
Vec3 laplacian_coordinate(const InteractionGraph& graph, int i,
                          const std::vector<Vec3>& agent_positions,
                          const std::vector<Vec3>& object_positions);

}  // namespace itx::interaction
