#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "itx/diff/param_set.hpp"

namespace itx::diff {

// Elementwise unary operators.  Each op carries an optional scalar attribute
// (activation sharpness, leaky slope).  Derivatives are evaluated numerically
// from the stored input during the backward sweep, so an op is usable inside
// any recorded program as long as its derivative formula below is right.
enum class ElemOp {
  Abs,       // |x|            d: sign(x), 0 at x=0
  Exp,       // e^x            d: e^x
  Sqrt,      // sqrt(x)        d: 1/(2 sqrt x), 0 at x=0 (subgradient convention)
  Inv,       // 1/x            d: -1/x^2
  Square,    // x^2            d: 2x
  Sin,       // sin x          d: cos x
  Cos,       // cos x          d: -sin x
  Tanh,      // tanh x         d: 1 - tanh^2
  Softplus,  // softplus(bx)/b d: sigmoid(bx)         (attr = b, sharpness)
  Sigmoid,   // sigmoid(bx)    d: b y (1-y)           (attr = b)
  LeakyRelu, // x>=0 ? x : ax  d: x>=0 ? 1 : a        (attr = a, slope)
  Sinc,      // sin(x)/x       d: (cos x - y)/x, Taylor near 0
  Cosc,      // (1-cos x)/x^2  d: (sin x - 2xy)/x^2, Taylor near 0
};

double elem_eval(ElemOp op, double x, double attr);
double elem_deriv(ElemOp op, double x, double y, double attr);

enum class OpKind {
  Constant,
  Param,
  MatMul,        // A * B
  Affine,        // W * X + b * 1^T            (a=W, b=X, c=bias column)
  Add,
  Sub,
  Hadamard,      // elementwise product
  ScaleMul,      // s * A with s a 1x1 node    (a=s, b=A)
  Scale,         // attr * A
  Shift,         // A + attr
  Elem,          // elementwise unary
  Block,         // A.block(i0, j0, p, q)
  VCat,          // [A; B]
  HCat,          // [A, B]
  Transpose,
  Reshape,       // column-major reinterpret to p x q
  Sum,           // sum of all entries -> 1x1
  ColNorm,       // Euclidean norm per column -> 1 x B
  ColDot,        // per-column dot of A and B -> 1 x B
  ColScale,      // A(:,j) * s(0,j) with s a 1 x B node (a=A, b=s)
  GatherCols,    // column selection by constant index list
  VnLeakyRelu,   // direction-gated linear unit on 3-vector features (a=Q, b=D)
  BlockPoolMean, // mean over groups of column blocks
};

// Dynamically recorded, eagerly evaluated operation tape over real matrices.
//
// A Graph is built against an immutable ParamSet; param(name) injects a named
// entry as a leaf.  Every op computes its value on creation (so callers can
// make data-dependent recording decisions) and verifies the result is finite,
// aborting with the offending node otherwise.  backward() runs a single
// reverse sweep and accumulates gradients for every param leaf.
//
// The operator set is deliberately small and matrix-level: affine maps and
// matrix products carry the bulk of the arithmetic so that tape overhead is
// negligible next to the Eigen kernels underneath.
class Graph {
 public:
  using Node = std::int32_t;

  explicit Graph(const ParamSet* params = nullptr) : params_(params) { nodes_.reserve(256); }

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Node constant(Mat m);
  Node constant(double v);
  Node param(const std::string& name);

  Node matmul(Node a, Node b);
  Node affine(Node w, Node x, Node bias);
  Node add(Node a, Node b);
  Node sub(Node a, Node b);
  Node hadamard(Node a, Node b);
  Node scalemul(Node s, Node a);
  Node scale(Node a, double c);
  Node shift(Node a, double c);
  Node elem(ElemOp op, Node a, double attr = 0.0);
  Node block(Node a, int i0, int j0, int p, int q);
  Node vcat(Node a, Node b);
  Node hcat(Node a, Node b);
  Node transpose(Node a);
  Node reshape(Node a, int p, int q);
  Node sum(Node a);
  Node colnorm(Node a);
  Node coldot(Node a, Node b);
  Node colscale(Node a, Node s);
  Node gather_cols(Node a, std::vector<int> idx);
  Node vn_leaky_relu(Node q, Node d, double negative_slope);
  Node block_pool_mean(Node a, int block_cols, int group);

  // Convenience compositions (no new op kinds).
  Node mean(Node a);
  Node sum_squares(Node a);

  const Mat& value(Node n) const { return rec(n).value(); }
  double scalar(Node n) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Reverse sweep from a scalar root; gradients of param leaves are
  // accumulated into `grads` (which must be congruent with the bound
  // ParamSet; use ParamSet::zeros_like to build it).
  void backward(Node root, ParamSet& grads) const;

 private:
  struct NodeRec {
    OpKind kind;
    Node a = -1, b = -1, c = -1;
    double attr = 0.0;
    ElemOp eop = ElemOp::Abs;
    int i0 = 0, j0 = 0, p = 0, q = 0;
    std::vector<int> idx;
    Mat val;
    const Mat* view = nullptr;  // param leaves alias ParamSet storage
    std::string pname;
    const Mat& value() const { return view ? *view : val; }
  };

  const NodeRec& rec(Node n) const;
  Node push(NodeRec r);
  void check_finite(Node n) const;

  const ParamSet* params_;
  std::vector<NodeRec> nodes_;
  std::map<std::string, Node> param_nodes_;
};

// A differentiable program: records a computation ending in a scalar node.
using Program = std::function<Graph::Node(Graph&)>;

struct GradResult {
  double value = 0.0;
  ParamSet grads;
};

double eval(const Program& prog, const ParamSet& params);
GradResult eval_and_grad(const Program& prog, const ParamSet& params);

// Max over all parameter entries of |analytic - central difference| divided
// by max(1, |central difference|).
double finite_diff_check(const Program& prog, const ParamSet& params, double eps);

// Same check restricted to `samples` randomly chosen parameter entries;
// intended for programs too large to probe exhaustively.
double finite_diff_check_sampled(const Program& prog, const ParamSet& params, double eps,
                                 int samples, std::uint64_t seed);

}  // namespace itx::diff
