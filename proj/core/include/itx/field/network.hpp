#pragma once

#include <vector>

#include "itx/diff/graph.hpp"
#include "itx/field/model.hpp"
#include "itx/geom/point_cloud.hpp"

namespace itx::field {

using diff::Graph;
using Node = diff::Graph::Node;

// Forward-mode spatial derivative bundle: a value node plus its directional
// derivatives against the three template-space coordinates, all of identical
// shape.  Derivative handles are -1 when the bundle was built value-only.
struct JetVec {
  Node val = -1;
  Node dx = -1, dy = -1, dz = -1;
  bool has_jets() const { return dx >= 0; }
};

struct EncoderNodes {
  Node features = -1;    // [K x 3]  mean-pooled vector channels
  Node R = -1;           // [3 x 3]  alignment rotation (orthonormal rows)
  Node alpha = -1;       // [K x 3]  rotation-invariant code
  Node alpha_flat = -1;  // [3K x 1] column-major flattening of alpha
  bool degenerate_rotation = false;
};

// Records the equivariant encoder over a point cloud.  `knn` holds the
// precomputed neighbor indices for `points` (compute_knn layout).  Layers
// apply a channel-mixing linear map and a direction-gated vector unit
// (negative slope 0.2); edge features are mean-pooled to points after the
// first layer and to a single [K x 3] matrix after the final (linear) layer.
// The alignment rotation comes from Gram-Schmidt over the first two pooled
// rows, recorded from live values: a pivot row shorter than 1e-8 makes the
// rotation the constant identity and sets `degenerate_rotation`.
EncoderNodes build_encoder(Graph& g, const FieldArch& arch, const Mat& points,
                           const std::vector<int>& knn);

// Generated (weight, bias) node pairs of the deformation decoder, one per
// layer, produced by the per-layer hypernetwork stages from the flattened
// code: hidden = tanh(wh a + bh), head = wo hidden + bo, with the head
// reinterpreted column-major as [out x in] weights followed by the bias.
std::vector<std::pair<Node, Node>> build_hypernet(Graph& g, const FieldArch& arch,
                                                  Node alpha_flat);

// Template decoder layers bound to the named trainable parameters.
std::vector<std::pair<Node, Node>> template_layer_nodes(Graph& g, const FieldArch& arch);

// Layers injected as constants (for evaluation against frozen weights).
std::vector<std::pair<Node, Node>> constant_layer_nodes(Graph& g,
                                                        const std::vector<std::pair<Mat, Mat>>& layers);

struct DeformNodes {
  Node p_bar = -1;  // [3 x n] rotated queries R p
  JetVec v;         // [3 x n] deformation at p_bar
  JetVec ds;        // [1 x n] scalar field correction
  Node p_til = -1;  // [3 x n] deformed points p_bar + v
};

// Records the deformation decoder at p_bar = R * p.  `query` is a [3 x n]
// node (constant inputs or pose-dependent points alike).  When `with_jets`,
// identity seeds on the template coordinates propagate so v and ds carry
// their spatial derivatives.
DeformNodes build_deform(Graph& g, const FieldArch& arch,
                         const std::vector<std::pair<Node, Node>>& layers, Node R, Node query,
                         bool with_jets);

struct TemplateNodes {
  Node value = -1;  // [1 x n]
  JetVec chained;   // d value / d template coords through the argument's jets
  JetVec local;     // d value / d evaluation point (identity seeds at `at`)
};

// Records the template decoder at `at` ([3 x n]).  `arg_jets` (nullable)
// supplies d(at)/d(template coords) for the chained stream; `want_local`
// additionally propagates identity seeds, yielding the decoder's own spatial
// gradient at the evaluation points.
TemplateNodes build_template(Graph& g, const FieldArch& arch,
                             const std::vector<std::pair<Node, Node>>& layers, Node at,
                             const JetVec* arg_jets, bool want_local);

// Full field assembly s = T(R p + v) + ds for constant query points.
struct FieldNodes {
  DeformNodes deform;
  TemplateNodes tmpl;
  Node phi = -1;       // [1 x n]
  Node grad_phi = -1;  // [3 x n] d phi / d template coords (jets stacked); -1 without jets
};

FieldNodes build_field(Graph& g, const FieldArch& arch,
                       const std::vector<std::pair<Node, Node>>& deform_layers,
                       const std::vector<std::pair<Node, Node>>& template_layers, Node R,
                       Node query, bool with_jets);

// Forward evaluation of a trained field: encoding, signed distance queries,
// and template-space images.  Queries run through the same recorded operator
// implementations as training (forward only), in chunks of `chunk` points.
class FieldEvaluator {
 public:
  explicit FieldEvaluator(RdifParams params, int chunk = 8192);

  const RdifParams& params() const { return params_; }
  const FieldArch& arch() const { return params_.arch; }

  // Invariant code and alignment rotation for a point cloud ([3 x n] or a
  // PointCloud's positions).  Needs at least arch.knn + 1 points.
  ShapeCode encode(const Mat& points) const;
  ShapeCode encode(const geom::PointCloud& cloud) const;

  // Per-point breakdown (p_bar, v, ds, s).
  std::vector<FieldEval> evaluate(const ShapeCode& code, const std::vector<geom::Vec3>& pts) const;

  // Signed distance only.
  Eigen::VectorXd sdf(const ShapeCode& code, const std::vector<geom::Vec3>& pts) const;

  // Template-space images p_til = R p + v(R p).
  std::vector<geom::Vec3> to_template(const ShapeCode& code,
                                      const std::vector<geom::Vec3>& pts) const;

 private:
  RdifParams params_;
  int chunk_;
};

}  // namespace itx::field
