#include "itx/diff/graph.hpp"

#include <cmath>

#include "itx/util/rng.hpp"

namespace itx::diff {

namespace {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Constant: return "constant";
    case OpKind::Param: return "param";
    case OpKind::MatMul: return "matmul";
    case OpKind::Affine: return "affine";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::ScaleMul: return "scalemul";
    case OpKind::Scale: return "scale";
    case OpKind::Shift: return "shift";
    case OpKind::Elem: return "elem";
    case OpKind::Block: return "block";
    case OpKind::VCat: return "vcat";
    case OpKind::HCat: return "hcat";
    case OpKind::Transpose: return "transpose";
    case OpKind::Reshape: return "reshape";
    case OpKind::Sum: return "sum";
    case OpKind::ColNorm: return "colnorm";
    case OpKind::ColDot: return "coldot";
    case OpKind::ColScale: return "colscale";
    case OpKind::GatherCols: return "gather_cols";
    case OpKind::VnLeakyRelu: return "vn_leaky_relu";
    case OpKind::BlockPoolMean: return "block_pool_mean";
  }
  return "?";
}

double stable_softplus(double x) {
  // log(1 + e^x) without overflow.
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

double elem_eval(ElemOp op, double x, double attr) {
  switch (op) {
    case ElemOp::Abs: return std::abs(x);
    case ElemOp::Exp: return std::exp(x);
    case ElemOp::Sqrt: return std::sqrt(x);
    case ElemOp::Inv: return 1.0 / x;
    case ElemOp::Square: return x * x;
    case ElemOp::Sin: return std::sin(x);
    case ElemOp::Cos: return std::cos(x);
    case ElemOp::Tanh: return std::tanh(x);
    case ElemOp::Softplus: return stable_softplus(attr * x) / attr;
    case ElemOp::Sigmoid: return stable_sigmoid(attr * x);
    case ElemOp::LeakyRelu: return x >= 0.0 ? x : attr * x;
    case ElemOp::Sinc:
      if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
      }
      return std::sin(x) / x;
    case ElemOp::Cosc:
      if (std::abs(x) < 1e-3) {
        const double x2 = x * x;
        return 0.5 - x2 / 24.0 + x2 * x2 / 720.0;
      }
      return (1.0 - std::cos(x)) / (x * x);
  }
  return 0.0;
}

double elem_deriv(ElemOp op, double x, double y, double attr) {
  switch (op) {
    case ElemOp::Abs: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    case ElemOp::Exp: return y;
    case ElemOp::Sqrt: return y > 0.0 ? 0.5 / y : 0.0;
    case ElemOp::Inv: return -y * y;
    case ElemOp::Square: return 2.0 * x;
    case ElemOp::Sin: return std::cos(x);
    case ElemOp::Cos: return -std::sin(x);
    case ElemOp::Tanh: return 1.0 - y * y;
    case ElemOp::Softplus: return stable_sigmoid(attr * x);
    case ElemOp::Sigmoid: return attr * y * (1.0 - y);
    case ElemOp::LeakyRelu: return x >= 0.0 ? 1.0 : attr;
    case ElemOp::Sinc:
      if (std::abs(x) < 1e-4) return -x / 3.0 + x * x * x / 30.0;
      return (std::cos(x) - y) / x;
    case ElemOp::Cosc:
      if (std::abs(x) < 1e-3) return -x / 12.0 + x * x * x / 180.0;
      return (std::sin(x) - 2.0 * x * y) / (x * x);
  }
  return 0.0;
}

const Graph::NodeRec& Graph::rec(Node n) const {
  require(n >= 0 && static_cast<std::size_t>(n) < nodes_.size(),
          "Graph: node id out of range");
  return nodes_[static_cast<std::size_t>(n)];
}

Graph::Node Graph::push(NodeRec r) {
  nodes_.push_back(std::move(r));
  const Node id = static_cast<Node>(nodes_.size() - 1);
  check_finite(id);
  return id;
}

void Graph::check_finite(Node n) const {
  const NodeRec& r = nodes_[static_cast<std::size_t>(n)];
  if (!r.value().allFinite()) {
    throw Error("Graph: non-finite value produced by node #" + std::to_string(n) +
                " (" + op_name(r.kind) +
                (r.pname.empty() ? std::string() : " '" + r.pname + "'") + ")");
  }
}

Graph::Node Graph::constant(Mat m) {
  NodeRec r;
  r.kind = OpKind::Constant;
  r.val = std::move(m);
  return push(std::move(r));
}

Graph::Node Graph::constant(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Graph::Node Graph::param(const std::string& name) {
  require(params_ != nullptr, "Graph: no ParamSet bound, param('" + name + "') unavailable");
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return it->second;
  NodeRec r;
  r.kind = OpKind::Param;
  r.view = &params_->at(name);
  r.pname = name;
  const Node id = push(std::move(r));
  param_nodes_.emplace(name, id);
  return id;
}

Graph::Node Graph::matmul(Node a, Node b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.cols() == B.rows(), "Graph::matmul: inner dimensions disagree");
  NodeRec r;
  r.kind = OpKind::MatMul;
  r.a = a;
  r.b = b;
  r.val.noalias() = A * B;
  return push(std::move(r));
}

Graph::Node Graph::affine(Node w, Node x, Node bias) {
  const Mat& W = value(w);
  const Mat& X = value(x);
  const Mat& B = value(bias);
  require(W.cols() == X.rows(), "Graph::affine: inner dimensions disagree");
  require(B.rows() == W.rows() && B.cols() == 1, "Graph::affine: bias must be a column of W rows");
  NodeRec r;
  r.kind = OpKind::Affine;
  r.a = w;
  r.b = x;
  r.c = bias;
  r.val.noalias() = W * X;
  r.val.colwise() += B.col(0);
  return push(std::move(r));
}

Graph::Node Graph::add(Node a, Node b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "Graph::add: shape mismatch");
  NodeRec r;
  r.kind = OpKind::Add;
  r.a = a;
  r.b = b;
  r.val = A + B;
  return push(std::move(r));
}

Graph::Node Graph::sub(Node a, Node b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "Graph::sub: shape mismatch");
  NodeRec r;
  r.kind = OpKind::Sub;
  r.a = a;
  r.b = b;
  r.val = A - B;
  return push(std::move(r));
}

Graph::Node Graph::hadamard(Node a, Node b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "Graph::hadamard: shape mismatch");
  NodeRec r;
  r.kind = OpKind::Hadamard;
  r.a = a;
  r.b = b;
  r.val = A.cwiseProduct(B);
  return push(std::move(r));
}

Graph::Node Graph::scalemul(Node s, Node a) {
  const Mat& S = value(s);
  require(S.rows() == 1 && S.cols() == 1, "Graph::scalemul: scale must be 1x1");
  NodeRec r;
  r.kind = OpKind::ScaleMul;
  r.a = s;
  r.b = a;
  r.val = S(0, 0) * value(a);
  return push(std::move(r));
}

Graph::Node Graph::scale(Node a, double c) {
  NodeRec r;
  r.kind = OpKind::Scale;
  r.a = a;
  r.attr = c;
  r.val = c * value(a);
  return push(std::move(r));
}

Graph::Node Graph::shift(Node a, double c) {
  NodeRec r;
  r.kind = OpKind::Shift;
  r.a = a;
  r.attr = c;
  r.val = value(a).array() + c;
  return push(std::move(r));
}

Graph::Node Graph::elem(ElemOp op, Node a, double attr) {
  const Mat& A = value(a);
  NodeRec r;
  r.kind = OpKind::Elem;
  r.a = a;
  r.eop = op;
  r.attr = attr;
  r.val.resize(A.rows(), A.cols());
  const double* src = A.data();
  double* dst = r.val.data();
  const Eigen::Index n = A.size();
  for (Eigen::Index i = 0; i < n; ++i) dst[i] = elem_eval(op, src[i], attr);
  return push(std::move(r));
}

Graph::Node Graph::block(Node a, int i0, int j0, int p, int q) {
  const Mat& A = value(a);
  require(i0 >= 0 && j0 >= 0 && p > 0 && q > 0 && i0 + p <= A.rows() && j0 + q <= A.cols(),
          "Graph::block: range out of bounds");
  NodeRec r;
  r.kind = OpKind::Block;
  r.a = a;
  r.i0 = i0;
  r.j0 = j0;
  r.p = p;
  r.q = q;
  r.val = A.block(i0, j0, p, q);
  return push(std::move(r));
}

Graph::Node Graph::vcat(Node a, Node b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.cols() == B.cols(), "Graph::vcat: column counts disagree");
  NodeRec r;
  r.kind = OpKind::VCat;
  r.a = a;
  r.b = b;
  r.val.resize(A.rows() + B.rows(), A.cols());
  r.val.topRows(A.rows()) = A;
  r.val.bottomRows(B.rows()) = B;
  return push(std::move(r));
}

Graph::Node Graph::hcat(Node a, Node b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.rows() == B.rows(), "Graph::hcat: row counts disagree");
  NodeRec r;
  r.kind = OpKind::HCat;
  r.a = a;
  r.b = b;
  r.val.resize(A.rows(), A.cols() + B.cols());
  r.val.leftCols(A.cols()) = A;
  r.val.rightCols(B.cols()) = B;
  return push(std::move(r));
}

Graph::Node Graph::transpose(Node a) {
  NodeRec r;
  r.kind = OpKind::Transpose;
  r.a = a;
  r.val = value(a).transpose();
  return push(std::move(r));
}

Graph::Node Graph::reshape(Node a, int p, int q) {
  const Mat& A = value(a);
  require(static_cast<Eigen::Index>(p) * q == A.size(), "Graph::reshape: size mismatch");
  NodeRec r;
  r.kind = OpKind::Reshape;
  r.a = a;
  r.p = p;
  r.q = q;
  r.val = Eigen::Map<const Mat>(A.data(), p, q);
  return push(std::move(r));
}

Graph::Node Graph::sum(Node a) {
  NodeRec r;
  r.kind = OpKind::Sum;
  r.a = a;
  r.val.resize(1, 1);
  r.val(0, 0) = value(a).sum();
  return push(std::move(r));
}

Graph::Node Graph::colnorm(Node a) {
  const Mat& A = value(a);
  NodeRec r;
  r.kind = OpKind::ColNorm;
  r.a = a;
  r.val.resize(1, A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j) r.val(0, j) = A.col(j).norm();
  return push(std::move(r));
}

Graph::Node Graph::coldot(Node a, Node b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "Graph::coldot: shape mismatch");
  NodeRec r;
  r.kind = OpKind::ColDot;
  r.a = a;
  r.b = b;
  r.val = (A.cwiseProduct(B)).colwise().sum();
  return push(std::move(r));
}

Graph::Node Graph::colscale(Node a, Node s) {
  const Mat& A = value(a);
  const Mat& S = value(s);
  require(S.rows() == 1 && S.cols() == A.cols(), "Graph::colscale: scale must be 1 x cols(A)");
  NodeRec r;
  r.kind = OpKind::ColScale;
  r.a = a;
  r.b = s;
  r.val = A.array().rowwise() * S.row(0).array();
  return push(std::move(r));
}

Graph::Node Graph::gather_cols(Node a, std::vector<int> idx) {
  const Mat& A = value(a);
  for (int j : idx)
    require(j >= 0 && j < A.cols(), "Graph::gather_cols: index out of range");
  NodeRec r;
  r.kind = OpKind::GatherCols;
  r.a = a;
  r.val.resize(A.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t m = 0; m < idx.size(); ++m) r.val.col(static_cast<Eigen::Index>(m)) = A.col(idx[m]);
  r.idx = std::move(idx);
  return push(std::move(r));
}

Graph::Node Graph::vn_leaky_relu(Node q, Node d, double negative_slope) {
  const Mat& Q = value(q);
  const Mat& D = value(d);
  require(Q.rows() == D.rows() && Q.cols() == D.cols(), "Graph::vn_leaky_relu: shape mismatch");
  require(Q.cols() % 3 == 0, "Graph::vn_leaky_relu: columns must group into 3-vectors");
  NodeRec r;
  r.kind = OpKind::VnLeakyRelu;
  r.a = q;
  r.b = d;
  r.attr = negative_slope;
  r.val = Q;
  const Eigen::Index blocks = Q.cols() / 3;
  for (Eigen::Index k = 0; k < Q.rows(); ++k) {
    for (Eigen::Index jb = 0; jb < blocks; ++jb) {
      const Eigen::Index c = 3 * jb;
      const double qx = Q(k, c), qy = Q(k, c + 1), qz = Q(k, c + 2);
      const double dx = D(k, c), dy = D(k, c + 1), dz = D(k, c + 2);
      const double s = qx * dx + qy * dy + qz * dz;
      if (s < 0.0) {
        const double dd = dx * dx + dy * dy + dz * dz + 1e-12;
        const double t = (1.0 - negative_slope) * s / dd;
        r.val(k, c) -= t * dx;
        r.val(k, c + 1) -= t * dy;
        r.val(k, c + 2) -= t * dz;
      }
    }
  }
  return push(std::move(r));
}

Graph::Node Graph::block_pool_mean(Node a, int block_cols, int group) {
  const Mat& A = value(a);
  require(block_cols > 0 && group > 0, "Graph::block_pool_mean: bad block/group");
  require(A.cols() % (static_cast<Eigen::Index>(block_cols) * group) == 0,
          "Graph::block_pool_mean: columns must split into block*group chunks");
  const Eigen::Index out_blocks = A.cols() / (static_cast<Eigen::Index>(block_cols) * group);
  NodeRec r;
  r.kind = OpKind::BlockPoolMean;
  r.a = a;
  r.i0 = block_cols;
  r.p = group;
  r.val = Mat::Zero(A.rows(), out_blocks * block_cols);
  for (Eigen::Index jb = 0; jb < out_blocks; ++jb) {
    for (int e = 0; e < group; ++e) {
      r.val.middleCols(jb * block_cols, block_cols) +=
          A.middleCols((jb * group + e) * static_cast<Eigen::Index>(block_cols), block_cols);
    }
  }
  r.val /= static_cast<double>(group);
  return push(std::move(r));
}

Graph::Node Graph::mean(Node a) {
  const Eigen::Index n = value(a).size();
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Graph::Node Graph::sum_squares(Node a) { return sum(elem(ElemOp::Square, a)); }

double Graph::scalar(Node n) const {
  const Mat& v = value(n);
  require(v.rows() == 1 && v.cols() == 1, "Graph::scalar: node is not 1x1");
  return v(0, 0);
}

void Graph::backward(Node root, ParamSet& grads) const {
  const Mat& rv = value(root);
  require(rv.rows() == 1 && rv.cols() == 1,
          "Graph::backward: gradients require a scalar root node");

  std::vector<Mat> g(nodes_.size());
  auto acc = [&](Node n, const auto& delta) {
    Mat& gn = g[static_cast<std::size_t>(n)];
    const NodeRec& nr = nodes_[static_cast<std::size_t>(n)];
    if (gn.size() == 0) gn = Mat::Zero(nr.value().rows(), nr.value().cols());
    gn += delta;
  };
  auto skip = [&](Node n) {
    return nodes_[static_cast<std::size_t>(n)].kind == OpKind::Constant;
  };

  g[static_cast<std::size_t>(root)] = Mat::Ones(1, 1);

  for (Node i = root; i >= 0; --i) {
    const Mat& gi = g[static_cast<std::size_t>(i)];
    if (gi.size() == 0) continue;
    const NodeRec& r = nodes_[static_cast<std::size_t>(i)];
    switch (r.kind) {
      case OpKind::Constant:
        break;
      case OpKind::Param:
        grads.at(r.pname) += gi;
        break;
      case OpKind::MatMul: {
        if (!skip(r.a)) acc(r.a, gi * value(r.b).transpose());
        if (!skip(r.b)) acc(r.b, value(r.a).transpose() * gi);
        break;
      }
      case OpKind::Affine: {
        if (!skip(r.a)) acc(r.a, gi * value(r.b).transpose());
        if (!skip(r.b)) acc(r.b, value(r.a).transpose() * gi);
        if (!skip(r.c)) acc(r.c, gi.rowwise().sum());
        break;
      }
      case OpKind::Add:
        if (!skip(r.a)) acc(r.a, gi);
        if (!skip(r.b)) acc(r.b, gi);
        break;
      case OpKind::Sub:
        if (!skip(r.a)) acc(r.a, gi);
        if (!skip(r.b)) acc(r.b, -gi);
        break;
      case OpKind::Hadamard:
        if (!skip(r.a)) acc(r.a, gi.cwiseProduct(value(r.b)));
        if (!skip(r.b)) acc(r.b, gi.cwiseProduct(value(r.a)));
        break;
      case OpKind::ScaleMul: {
        if (!skip(r.a)) {
          Mat gs(1, 1);
          gs(0, 0) = gi.cwiseProduct(value(r.b)).sum();
          acc(r.a, gs);
        }
        if (!skip(r.b)) acc(r.b, value(r.a)(0, 0) * gi);
        break;
      }
      case OpKind::Scale:
        if (!skip(r.a)) acc(r.a, r.attr * gi);
        break;
      case OpKind::Shift:
        if (!skip(r.a)) acc(r.a, gi);
        break;
      case OpKind::Elem: {
        if (skip(r.a)) break;
        const Mat& X = value(r.a);
        Mat d(X.rows(), X.cols());
        const double* xs = X.data();
        const double* ys = r.val.data();
        const double* gs = gi.data();
        double* ds = d.data();
        for (Eigen::Index k = 0; k < X.size(); ++k)
          ds[k] = gs[k] * elem_deriv(r.eop, xs[k], ys[k], r.attr);
        acc(r.a, d);
        break;
      }
      case OpKind::Block: {
        if (skip(r.a)) break;
        const Mat& A = value(r.a);
        Mat d = Mat::Zero(A.rows(), A.cols());
        d.block(r.i0, r.j0, r.p, r.q) = gi;
        acc(r.a, d);
        break;
      }
      case OpKind::VCat: {
        const Eigen::Index ra = value(r.a).rows();
        if (!skip(r.a)) acc(r.a, gi.topRows(ra));
        if (!skip(r.b)) acc(r.b, gi.bottomRows(gi.rows() - ra));
        break;
      }
      case OpKind::HCat: {
        const Eigen::Index ca = value(r.a).cols();
        if (!skip(r.a)) acc(r.a, gi.leftCols(ca));
        if (!skip(r.b)) acc(r.b, gi.rightCols(gi.cols() - ca));
        break;
      }
      case OpKind::Transpose:
        if (!skip(r.a)) acc(r.a, gi.transpose());
        break;
      case OpKind::Reshape: {
        if (skip(r.a)) break;
        const Mat& A = value(r.a);
        acc(r.a, Eigen::Map<const Mat>(gi.data(), A.rows(), A.cols()));
        break;
      }
      case OpKind::Sum: {
        if (skip(r.a)) break;
        const Mat& A = value(r.a);
        acc(r.a, Mat::Constant(A.rows(), A.cols(), gi(0, 0)));
        break;
      }
      case OpKind::ColNorm: {
        if (skip(r.a)) break;
        const Mat& A = value(r.a);
        Mat d = Mat::Zero(A.rows(), A.cols());
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
          const double nj = r.val(0, j);
          if (nj > 0.0) d.col(j) = (gi(0, j) / nj) * A.col(j);
        }
        acc(r.a, d);
        break;
      }
      case OpKind::ColDot: {
        if (!skip(r.a)) acc(r.a, (value(r.b).array().rowwise() * gi.row(0).array()).matrix());
        if (!skip(r.b)) acc(r.b, (value(r.a).array().rowwise() * gi.row(0).array()).matrix());
        break;
      }
      case OpKind::ColScale: {
        if (!skip(r.a)) acc(r.a, (gi.array().rowwise() * value(r.b).row(0).array()).matrix());
        if (!skip(r.b)) acc(r.b, gi.cwiseProduct(value(r.a)).colwise().sum());
        break;
      }
      case OpKind::GatherCols: {
        if (skip(r.a)) break;
        const Mat& A = value(r.a);
        Mat d = Mat::Zero(A.rows(), A.cols());
        for (std::size_t m = 0; m < r.idx.size(); ++m)
          d.col(r.idx[m]) += gi.col(static_cast<Eigen::Index>(m));
        acc(r.a, d);
        break;
      }
      case OpKind::VnLeakyRelu: {
        const Mat& Q = value(r.a);
        const Mat& D = value(r.b);
        Mat gq = Mat::Zero(Q.rows(), Q.cols());
        Mat gd = Mat::Zero(D.rows(), D.cols());
        const double c1 = 1.0 - r.attr;
        const Eigen::Index blocks = Q.cols() / 3;
        for (Eigen::Index k = 0; k < Q.rows(); ++k) {
          for (Eigen::Index jb = 0; jb < blocks; ++jb) {
            const Eigen::Index c = 3 * jb;
            const double qx = Q(k, c), qy = Q(k, c + 1), qz = Q(k, c + 2);
            const double dx = D(k, c), dy = D(k, c + 1), dz = D(k, c + 2);
            const double gx = gi(k, c), gy = gi(k, c + 1), gz = gi(k, c + 2);
            const double s = qx * dx + qy * dy + qz * dz;
            if (s >= 0.0) {
              gq(k, c) += gx;
              gq(k, c + 1) += gy;
              gq(k, c + 2) += gz;
            } else {
              const double dd = dx * dx + dy * dy + dz * dz + 1e-12;
              const double t = s / dd;
              const double gdot = gx * dx + gy * dy + gz * dz;
              // y = q - c1 (q.d/dd) d
              gq(k, c) += gx - c1 * gdot / dd * dx;
              gq(k, c + 1) += gy - c1 * gdot / dd * dy;
              gq(k, c + 2) += gz - c1 * gdot / dd * dz;
              gd(k, c) += -c1 * (gdot / dd * qx + t * gx - 2.0 * t * gdot / dd * dx);
              gd(k, c + 1) += -c1 * (gdot / dd * qy + t * gy - 2.0 * t * gdot / dd * dy);
              gd(k, c + 2) += -c1 * (gdot / dd * qz + t * gz - 2.0 * t * gdot / dd * dz);
            }
          }
        }
        if (!skip(r.a)) acc(r.a, gq);
        if (!skip(r.b)) acc(r.b, gd);
        break;
      }
      case OpKind::BlockPoolMean: {
        if (skip(r.a)) break;
        const Mat& A = value(r.a);
        const int bc = r.i0;
        const int group = r.p;
        Mat d(A.rows(), A.cols());
        const Eigen::Index out_blocks = r.val.cols() / bc;
        for (Eigen::Index jb = 0; jb < out_blocks; ++jb) {
          for (int e = 0; e < group; ++e) {
            d.middleCols((jb * group + e) * static_cast<Eigen::Index>(bc), bc) =
                gi.middleCols(jb * bc, bc) / static_cast<double>(group);
          }
        }
        acc(r.a, d);
        break;
      }
    }
    // Free this node's gradient buffer early; everything upstream of it has
    // already been accumulated.
    g[static_cast<std::size_t>(i)] = Mat();
  }
}

double eval(const Program& prog, const ParamSet& params) {
  Graph g(&params);
  const Graph::Node out = prog(g);
  return g.scalar(out);
}

GradResult eval_and_grad(const Program& prog, const ParamSet& params) {
  Graph g(&params);
  const Graph::Node out = prog(g);
  GradResult res;
  res.value = g.scalar(out);
  res.grads = params.zeros_like();
  g.backward(out, res.grads);
  return res;
}

namespace {

double central_difference(const Program& prog, ParamSet& work, const std::string& name,
                          Eigen::Index k, double eps) {
  double* slot = work.at(name).data() + k;
  const double orig = *slot;
  *slot = orig + eps;
  const double fp = eval(prog, work);
  *slot = orig - eps;
  const double fm = eval(prog, work);
  *slot = orig;
  return (fp - fm) / (2.0 * eps);
}

}  // namespace

double finite_diff_check(const Program& prog, const ParamSet& params, double eps) {
  const GradResult res = eval_and_grad(prog, params);
  ParamSet work = params;
  double worst = 0.0;
  for (const auto& name : work.names()) {
    const Mat& ga = res.grads.at(name);
    for (Eigen::Index k = 0; k < ga.size(); ++k) {
      const double cd = central_difference(prog, work, name, k, eps);
      const double err = std::abs(ga.data()[k] - cd) / std::max(1.0, std::abs(cd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double finite_diff_check_sampled(const Program& prog, const ParamSet& params, double eps,
                                 int samples, std::uint64_t seed) {
  const GradResult res = eval_and_grad(prog, params);
  ParamSet work = params;
  const std::size_t total = params.scalar_count();
  require(total > 0, "finite_diff_check_sampled: empty ParamSet");
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    std::size_t flat = static_cast<std::size_t>(rng.below(total));
    // Locate the entry owning this flat index.
    for (const auto& name : work.names()) {
      const Mat& m = work.at(name);
      const std::size_t sz = static_cast<std::size_t>(m.size());
      if (flat < sz) {
        const double cd =
            central_difference(prog, work, name, static_cast<Eigen::Index>(flat), eps);
        const double ga = res.grads.at(name).data()[flat];
        worst = std::max(worst, std::abs(ga - cd) / std::max(1.0, std::abs(cd)));
        break;
      }
      flat -= sz;
    }
  }
  return worst;
}

}  // namespace itx::diff
