#include "itx/field/network.hpp"

#include <cmath>

#include "itx/util/error.hpp"

namespace itx::field {

namespace {

constexpr double kVnSlope = 0.2;      // negative slope of the vector gate
constexpr double kPivotFloor = 1e-8;  // orthonormalization degeneracy threshold

// Taped Gram-Schmidt over the first two rows of F ([K x 3]), completed with
// the cross product.  Returns the [3 x 3] rotation node; falls back to the
// constant identity (flagging `degenerate`) when a pivot is too short, which
// keeps the recording well defined at the cost of gradient flow through R.
Node record_rotation(Graph& g, Node F, bool& degenerate) {
  degenerate = false;
  const Node f0 = g.block(F, 0, 0, 1, 3);
  const Node f1 = g.block(F, 1, 0, 1, 3);
  const Node n0 = g.elem(diff::ElemOp::Sqrt, g.sum_squares(f0));
  if (g.scalar(n0) < kPivotFloor) {
    degenerate = true;
    return g.constant(Mat::Identity(3, 3));
  }
  const Node r0 = g.scalemul(g.elem(diff::ElemOp::Inv, n0), f0);
  const Node proj = g.sum(g.hadamard(f1, r0));  // <f1, r0>
  const Node u = g.sub(f1, g.scalemul(proj, r0));
  const Node n1 = g.elem(diff::ElemOp::Sqrt, g.sum_squares(u));
  if (g.scalar(n1) < kPivotFloor) {
    degenerate = true;
    return g.constant(Mat::Identity(3, 3));
  }
  const Node r1 = g.scalemul(g.elem(diff::ElemOp::Inv, n1), u);
  // r2 = r0 x r1, assembled from scalar entries.
  const Node a0 = g.block(r0, 0, 0, 1, 1), a1 = g.block(r0, 0, 1, 1, 1),
             a2 = g.block(r0, 0, 2, 1, 1);
  const Node b0 = g.block(r1, 0, 0, 1, 1), b1 = g.block(r1, 0, 1, 1, 1),
             b2 = g.block(r1, 0, 2, 1, 1);
  const Node cx = g.sub(g.hadamard(a1, b2), g.hadamard(a2, b1));
  const Node cy = g.sub(g.hadamard(a2, b0), g.hadamard(a0, b2));
  const Node cz = g.sub(g.hadamard(a0, b1), g.hadamard(a1, b0));
  const Node r2 = g.hcat(g.hcat(cx, cy), cz);
  return g.vcat(g.vcat(r0, r1), r2);
}

}  // namespace

EncoderNodes build_encoder(Graph& g, const FieldArch& arch, const Mat& points,
                           const std::vector<int>& knn) {
  const int n = static_cast<int>(points.cols());
  require(points.rows() == 3, "build_encoder: points must be 3 x n");
  require(static_cast<int>(knn.size()) == n * arch.knn, "build_encoder: knn size mismatch");

  Node x = g.constant(encoder_edge_features(points, knn, arch.knn));
  const int n_layers = static_cast<int>(arch.encoder_widths.size());
  for (int i = 0; i < n_layers; ++i) {
    const std::string base = "enc.l" + std::to_string(i) + ".";
    const Node wq = g.param(base + "wq");
    if (i < n_layers - 1) {
      const Node q = g.matmul(wq, x);
      const Node d = g.matmul(g.param(base + "wd"), x);
      x = g.vn_leaky_relu(q, d, kVnSlope);
    } else {
      x = g.matmul(wq, x);  // final layer stays linear ahead of pooling
    }
    if (i == 0) x = g.block_pool_mean(x, 3, arch.knn);  // edges -> points
  }
  EncoderNodes out;
  out.features = g.block_pool_mean(x, 3, n);  // points -> cloud, [K x 3]
  out.R = record_rotation(g, out.features, out.degenerate_rotation);
  out.alpha = g.matmul(out.features, g.transpose(out.R));
  out.alpha_flat = g.reshape(out.alpha, arch.code_length(), 1);
  return out;
}

std::vector<std::pair<Node, Node>> build_hypernet(Graph& g, const FieldArch& arch,
                                                  Node alpha_flat) {
  std::vector<std::pair<Node, Node>> layers;
  const auto shapes = arch.deform_layer_shapes();
  for (int j = 0; j < arch.mlp_layers; ++j) {
    const auto [out, in] = shapes[static_cast<std::size_t>(j)];
    const std::string base = "hyper.l" + std::to_string(j) + ".";
    const Node hidden = g.elem(diff::ElemOp::Tanh,
                               g.affine(g.param(base + "wh"), alpha_flat, g.param(base + "bh")));
    const Node head = g.affine(g.param(base + "wo"), hidden, g.param(base + "bo"));
    const Node w = g.reshape(g.block(head, 0, 0, out * in, 1), out, in);
    const Node b = g.block(head, out * in, 0, out, 1);
    layers.emplace_back(w, b);
  }
  return layers;
}

std::vector<std::pair<Node, Node>> template_layer_nodes(Graph& g, const FieldArch& arch) {
  std::vector<std::pair<Node, Node>> layers;
  for (int j = 0; j < arch.mlp_layers; ++j) {
    const std::string base = "tmpl.l" + std::to_string(j) + ".";
    layers.emplace_back(g.param(base + "w"), g.param(base + "b"));
  }
  return layers;
}

std::vector<std::pair<Node, Node>> constant_layer_nodes(
    Graph& g, const std::vector<std::pair<Mat, Mat>>& layers) {
  std::vector<std::pair<Node, Node>> out;
  out.reserve(layers.size());
  for (const auto& [w, b] : layers) out.emplace_back(g.constant(w), g.constant(b));
  return out;
}

namespace {

// One perceptron stack with optional jet streams.  Each stream propagates
// through affine layers by the weight product and through the softplus gate
// by the recorded sigmoid derivative.
struct MlpResult {
  Node value;
  std::vector<std::array<Node, 3>> streams;
};

MlpResult run_mlp(Graph& g, const std::vector<std::pair<Node, Node>>& layers, Node input,
                  std::vector<std::array<Node, 3>> streams, double beta) {
  Node x = input;
  const int L = static_cast<int>(layers.size());
  for (int j = 0; j < L; ++j) {
    const auto& [w, b] = layers[static_cast<std::size_t>(j)];
    const Node z = g.affine(w, x, b);
    for (auto& s : streams)
      for (auto& d : s) d = g.matmul(w, d);
    if (j < L - 1) {
      x = g.elem(diff::ElemOp::Softplus, z, beta);
      if (!streams.empty()) {
        const Node gate = g.elem(diff::ElemOp::Sigmoid, z, beta);
        for (auto& s : streams)
          for (auto& d : s) d = g.hadamard(gate, d);
      }
    } else {
      x = z;
    }
  }
  return {x, std::move(streams)};
}

std::array<Node, 3> identity_seeds(Graph& g, int n) {
  std::array<Node, 3> seeds;
  for (int a = 0; a < 3; ++a) {
    Mat e = Mat::Zero(3, n);
    e.row(a).setOnes();
    seeds[static_cast<std::size_t>(a)] = g.constant(std::move(e));
  }
  return seeds;
}

}  // namespace

DeformNodes build_deform(Graph& g, const FieldArch& arch,
                         const std::vector<std::pair<Node, Node>>& layers, Node R, Node query,
                         bool with_jets) {
  const int n = static_cast<int>(g.value(query).cols());
  DeformNodes out;
  out.p_bar = g.matmul(R, query);
  std::vector<std::array<Node, 3>> streams;
  if (with_jets) streams.push_back(identity_seeds(g, n));
  MlpResult r = run_mlp(g, layers, out.p_bar, std::move(streams), arch.softplus_beta);
  out.v.val = g.block(r.value, 0, 0, 3, n);
  out.ds.val = g.block(r.value, 3, 0, 1, n);
  if (with_jets) {
    const auto& s = r.streams[0];
    out.v.dx = g.block(s[0], 0, 0, 3, n);
    out.v.dy = g.block(s[1], 0, 0, 3, n);
    out.v.dz = g.block(s[2], 0, 0, 3, n);
    out.ds.dx = g.block(s[0], 3, 0, 1, n);
    out.ds.dy = g.block(s[1], 3, 0, 1, n);
    out.ds.dz = g.block(s[2], 3, 0, 1, n);
  }
  out.p_til = g.add(out.p_bar, out.v.val);
  return out;
}

TemplateNodes build_template(Graph& g, const FieldArch& arch,
                             const std::vector<std::pair<Node, Node>>& layers, Node at,
                             const JetVec* arg_jets, bool want_local) {
  const int n = static_cast<int>(g.value(at).cols());
  std::vector<std::array<Node, 3>> streams;
  int chain_slot = -1, local_slot = -1;
  if (arg_jets) {
    require(arg_jets->has_jets(), "build_template: arg_jets lacks derivative nodes");
    chain_slot = static_cast<int>(streams.size());
    streams.push_back({arg_jets->dx, arg_jets->dy, arg_jets->dz});
  }
  if (want_local) {
    local_slot = static_cast<int>(streams.size());
    streams.push_back(identity_seeds(g, n));
  }
  MlpResult r = run_mlp(g, layers, at, std::move(streams), arch.softplus_beta);
  TemplateNodes out;
  out.value = r.value;
  if (chain_slot >= 0) {
    const auto& s = r.streams[static_cast<std::size_t>(chain_slot)];
    out.chained = {out.value, s[0], s[1], s[2]};
  }
  if (local_slot >= 0) {
    const auto& s = r.streams[static_cast<std::size_t>(local_slot)];
    out.local = {out.value, s[0], s[1], s[2]};
  }
  return out;
}

FieldNodes build_field(Graph& g, const FieldArch& arch,
                       const std::vector<std::pair<Node, Node>>& deform_layers,
                       const std::vector<std::pair<Node, Node>>& template_layers, Node R,
                       Node query, bool with_jets) {
  FieldNodes out;
  out.deform = build_deform(g, arch, deform_layers, R, query, with_jets);
  if (with_jets) {
    // d p_til / d template coords = identity + d v / d coords.
    const int n = static_cast<int>(g.value(out.deform.p_til).cols());
    const auto eye = identity_seeds(g, n);
    JetVec ptil_jets;
    ptil_jets.val = out.deform.p_til;
    ptil_jets.dx = g.add(eye[0], out.deform.v.dx);
    ptil_jets.dy = g.add(eye[1], out.deform.v.dy);
    ptil_jets.dz = g.add(eye[2], out.deform.v.dz);
    out.tmpl = build_template(g, arch, template_layers, out.deform.p_til, &ptil_jets, false);
    out.phi = g.add(out.tmpl.value, out.deform.ds.val);
    const Node gx = g.add(out.tmpl.chained.dx, out.deform.ds.dx);
    const Node gy = g.add(out.tmpl.chained.dy, out.deform.ds.dy);
    const Node gz = g.add(out.tmpl.chained.dz, out.deform.ds.dz);
    out.grad_phi = g.vcat(g.vcat(gx, gy), gz);
  } else {
    out.tmpl = build_template(g, arch, template_layers, out.deform.p_til, nullptr, false);
    out.phi = g.add(out.tmpl.value, out.deform.ds.val);
  }
  return out;
}

FieldEvaluator::FieldEvaluator(RdifParams params, int chunk)
    : params_(std::move(params)), chunk_(chunk) {
  require(chunk_ >= 1, "FieldEvaluator: chunk must be positive");
}

ShapeCode FieldEvaluator::encode(const Mat& points) const {
  require(static_cast<int>(points.cols()) > params_.arch.knn,
          "FieldEvaluator::encode: need more points than the neighborhood size");
  Graph g(&params_.params);
  const auto knn = compute_knn(points, params_.arch.knn);
  const EncoderNodes enc = build_encoder(g, params_.arch, points, knn);
  ShapeCode code;
  code.alpha = g.value(enc.alpha);
  code.R = g.value(enc.R);
  code.degenerate_rotation = enc.degenerate_rotation;
  return code;
}

ShapeCode FieldEvaluator::encode(const geom::PointCloud& cloud) const {
  return encode(geom::to_matrix(cloud.points));
}

std::vector<FieldEval> FieldEvaluator::evaluate(const ShapeCode& code,
                                                const std::vector<geom::Vec3>& pts) const {
  std::vector<FieldEval> out(pts.size());
  const int total = static_cast<int>(pts.size());
  for (int lo = 0; lo < total; lo += chunk_) {
    const int m = std::min(chunk_, total - lo);
    Mat q(3, m);
    for (int c = 0; c < m; ++c) q.col(c) = pts[static_cast<std::size_t>(lo + c)];
    Graph g(&params_.params);
    const Node R = g.constant(Mat(code.R));
    const Node alpha_flat =
        g.reshape(g.constant(code.alpha), params_.arch.code_length(), 1);
    const auto dlayers = build_hypernet(g, params_.arch, alpha_flat);
    const auto tlayers = template_layer_nodes(g, params_.arch);
    const FieldNodes f =
        build_field(g, params_.arch, dlayers, tlayers, R, g.constant(std::move(q)), false);
    const Mat& pbar = g.value(f.deform.p_bar);
    const Mat& v = g.value(f.deform.v.val);
    const Mat& ds = g.value(f.deform.ds.val);
    const Mat& phi = g.value(f.phi);
    for (int c = 0; c < m; ++c) {
      FieldEval& e = out[static_cast<std::size_t>(lo + c)];
      e.p_bar = pbar.col(c);
      e.v = v.col(c);
      e.ds = ds(0, c);
      e.s = phi(0, c);
    }
  }
  return out;
}

Eigen::VectorXd FieldEvaluator::sdf(const ShapeCode& code,
                                    const std::vector<geom::Vec3>& pts) const {
  const auto evals = evaluate(code, pts);
  Eigen::VectorXd s(static_cast<Eigen::Index>(evals.size()));
  for (std::size_t i = 0; i < evals.size(); ++i) s[static_cast<Eigen::Index>(i)] = evals[i].s;
  return s;
}

std::vector<geom::Vec3> FieldEvaluator::to_template(const ShapeCode& code,
                                                    const std::vector<geom::Vec3>& pts) const {
  const auto evals = evaluate(code, pts);
  std::vector<geom::Vec3> out(evals.size());
  for (std::size_t i = 0; i < evals.size(); ++i) out[i] = evals[i].p_bar + evals[i].v;
  return out;
}

}  // namespace itx::field
