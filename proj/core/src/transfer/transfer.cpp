#include "itx/transfer/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "itx/geom/nearest.hpp"
#include "itx/geom/rotation.hpp"

namespace itx::transfer {

namespace {

using diff::Graph;
using diff::Mat;
using diff::ParamSet;
using Node = Graph::Node;

std::string frame_prefix(int k) { return "f" + std::to_string(k) + "."; }

// Constant matrices of one frame's loss that never change across iterations.
struct FramePre {
  Mat ast;       // [3 x N] spatial targets a^st
  Mat wat;       // [N x N] agent-neighbor weights, (j, i) = w_ij
  Mat obj_part;  // [3 x N] per point: sum_j w_ij o^st_j
  Mat delta;     // [3 x N] source Laplacian coordinates
};

FramePre precompute_frame(const TransferProblem& p) {
  const auto& g = p.graph;
  const int n = g.agent_count;
  FramePre pre;
  pre.ast.resize(3, n);
  pre.wat = Mat::Zero(n, n);
  pre.obj_part = Mat::Zero(3, n);
  pre.delta.resize(3, n);
  for (int i = 0; i < n; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    pre.ast.col(i) = p.corr.spatial[ui];
    pre.delta.col(i) = g.delta[ui];
    const auto& an = g.agent_neighbors[ui];
    const auto& aw = g.agent_weights[ui];
    for (std::size_t m = 0; m < an.size(); ++m) pre.wat(an[m], i) = aw[m];
    const auto& on = g.object_neighbors[ui];
    const auto& ow = g.object_weights[ui];
    for (std::size_t m = 0; m < on.size(); ++m) {
      const int tgt = p.corr.surface[static_cast<std::size_t>(on[m])];
      pre.obj_part.col(i) += ow[m] * p.target_object.points[static_cast<std::size_t>(tgt)];
    }
  }
  return pre;
}

// Skew-symmetric cross-product matrix of a [3 x 1] node.
Node taped_skew(Graph& g, Node w) {
  Node wx = g.block(w, 0, 0, 1, 1);
  Node wy = g.block(w, 1, 0, 1, 1);
  Node wz = g.block(w, 2, 0, 1, 1);
  Node z = g.constant(Mat::Zero(1, 1));
  Node r0 = g.hcat(g.hcat(z, g.scale(wz, -1.0)), wy);
  Node r1 = g.hcat(g.hcat(wz, z), g.scale(wx, -1.0));
  Node r2 = g.hcat(g.hcat(g.scale(wy, -1.0), wx), z);
  return g.vcat(g.vcat(r0, r1), r2);
}

// Hinge rotation about a fixed unit axis by a [1 x 1] angle node:
// R = I + sin(t) K + (1 - cos(t)) K^2 with K the constant axis skew.
Node taped_hinge(Graph& g, Node angle, const Vec3& axis) {
  Mat k(3, 3);
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  Node kc = g.constant(k);
  Node k2c = g.constant(Mat(k * k));
  Node eye = g.constant(Mat(Mat::Identity(3, 3)));
  Node s = g.elem(diff::ElemOp::Sin, angle);
  Node one_minus_cos = g.shift(g.scale(g.elem(diff::ElemOp::Cos, angle), -1.0), 1.0);
  return g.add(g.add(eye, g.scalemul(s, kc)), g.scalemul(one_minus_cos, k2c));
}

Mat vec_to_mat(const Vec3& v) {
  Mat m(3, 1);
  m << v.x(), v.y(), v.z();
  return m;
}

struct EvalNodes {
  std::vector<FrameLossNodes> frames;
  std::vector<Node> smooth;  // per consecutive pair, raw values
  Node total = -1;
};

FrameLossNodes build_frame_loss_pre(Graph& g, const TransferProblem& p, const FramePre& pre,
                                    const FrozenContext& ctx, const TransferConfig& cfg,
                                    const std::string& prefix) {
  const int n = p.graph.agent_count;
  Node a = taped_agent_points(g, *p.def, prefix);

  FrameLossNodes out;
  out.spatial = g.sum_squares(g.sub(a, g.constant(pre.ast)));

  // Laplacian detail: A - A W^T - (object part + aligned source coordinates).
  Mat c(3, n);
  for (int i = 0; i < n; ++i)
    c.col(i) = pre.obj_part.col(i) +
               ctx.align[static_cast<std::size_t>(i)] * pre.delta.col(i);
  Node lg = g.sub(g.sub(a, g.matmul(a, g.constant(pre.wat))), g.constant(c));
  out.surface = g.sum_squares(lg);

  if (ctx.interior.empty()) {
    out.penetration = g.constant(0.0);
  } else {
    Mat oin(3, static_cast<int>(ctx.interior.size()));
    for (std::size_t m = 0; m < ctx.interior.size(); ++m)
      oin.col(static_cast<int>(m)) =
          p.target_object.points[static_cast<std::size_t>(ctx.interior[m])];
    Node picked = g.gather_cols(a, ctx.nearest_agent);
    out.penetration = g.sum_squares(g.sub(picked, g.constant(oin)));
  }

  out.total = g.add(g.add(g.scale(out.spatial, cfg.lambda_spatial),
                          g.scale(out.surface, cfg.lambda_surface)),
                    g.scale(out.penetration, cfg.lambda_penetration));
  return out;
}

// Window objective over per-frame packed parameters, with frozen contexts.
EvalNodes build_window(Graph& g, const std::vector<const TransferProblem*>& frames,
                       const std::vector<FramePre>& pres,
                       const std::vector<FrozenContext>& ctxs, const TransferConfig& cfg) {
  EvalNodes nodes;
  Node total = -1;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    FrameLossNodes fl =
        build_frame_loss_pre(g, *frames[k], pres[k], ctxs[k], cfg, frame_prefix(static_cast<int>(k)));
    nodes.frames.push_back(fl);
    total = (total < 0) ? fl.total : g.add(total, fl.total);
  }
  const int joints = frames[0]->def->joint_count();
  if (joints > 0) {
    for (std::size_t k = 1; k < frames.size(); ++k) {
      Node prev = g.param(frame_prefix(static_cast<int>(k - 1)) + "theta");
      Node cur = g.param(frame_prefix(static_cast<int>(k)) + "theta");
      Node s = g.sum_squares(g.sub(cur, prev));
      nodes.smooth.push_back(s);
      total = g.add(total, g.scale(s, cfg.lambda_smooth));
    }
  }
  nodes.total = total;
  return nodes;
}

struct WindowEval {
  LossValues loss;
  ParamSet grads;  // empty when gradients were not requested
};

LossValues read_components(const Graph& g, const EvalNodes& nodes) {
  LossValues v;
  for (const auto& f : nodes.frames) {
    v.spatial += g.scalar(f.spatial);
    v.surface += g.scalar(f.surface);
    v.penetration += g.scalar(f.penetration);
  }
  for (Node s : nodes.smooth) v.smooth += g.scalar(s);
  v.total = g.scalar(nodes.total);
  return v;
}

WindowEval evaluate_window(const ParamSet& params,
                           const std::vector<const TransferProblem*>& frames,
                           const std::vector<FramePre>& pres,
                           const std::vector<agent::AgentState>& states,
                           const TransferConfig& cfg, bool want_grads) {
  std::vector<FrozenContext> ctxs;
  ctxs.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k)
    ctxs.push_back(freeze_context(*frames[k], states[k]));

  Graph g(&params);
  EvalNodes nodes = build_window(g, frames, pres, ctxs, cfg);
  WindowEval out;
  out.loss = read_components(g, nodes);
  if (want_grads) {
    out.grads = params.zeros_like();
    g.backward(nodes.total, out.grads);
    require(out.grads.all_finite(), "transfer: non-finite gradient");
  }
  return out;
}

// Per-frame clipped gradient step followed by the joint-angle projection.
ParamSet project_step(const ParamSet& params, const ParamSet& grads, double lr,
                      const TransferConfig& cfg,
                      const std::vector<const TransferProblem*>& frames) {
  ParamSet out = params;  // copy
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const std::string pre = frame_prefix(static_cast<int>(k));
    std::vector<std::string> names = {pre + "rot", pre + "trans"};
    if (params.has(pre + "theta")) names.push_back(pre + "theta");
    double sq = 0.0;
    for (const auto& n : names) sq += grads.at(n).squaredNorm();
    const double norm = std::sqrt(sq);
    const double s = (norm > cfg.clip_norm && norm > 0.0) ? cfg.clip_norm / norm : 1.0;
    for (const auto& n : names) out.at(n) -= (lr * s) * grads.at(n);
    if (params.has(pre + "theta")) {
      Eigen::VectorXd th = out.at(pre + "theta").col(0);
      Eigen::VectorXd clamped =
          agent::clamp_joints(th, frames[k]->source_state.theta, cfg.gamma);
      out.at(pre + "theta").col(0) = clamped;
    }
  }
  return out;
}

std::vector<agent::AgentState> unpack_window(const ParamSet& params, int joints, int frames) {
  std::vector<agent::AgentState> out;
  out.reserve(static_cast<std::size_t>(frames));
  for (int k = 0; k < frames; ++k) out.push_back(unpack_state(params, joints, frame_prefix(k)));
  return out;
}

struct WindowResult {
  std::vector<agent::AgentState> states;
  std::vector<IterationRecord> trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

WindowResult optimize_window(const std::vector<const TransferProblem*>& frames,
                             const std::vector<agent::AgentState>& inits,
                             const TransferConfig& cfg) {
  const int joints = frames[0]->def->joint_count();
  std::vector<FramePre> pres;
  pres.reserve(frames.size());
  for (const TransferProblem* p : frames) pres.push_back(precompute_frame(*p));

  // Project the starting point so the joint box holds at iterate 0 as well.
  ParamSet params;
  std::vector<agent::AgentState> states;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    agent::AgentState s = inits[k];
    if (joints > 0)
      s.theta = agent::clamp_joints(s.theta, frames[k]->source_state.theta, cfg.gamma);
    states.push_back(s);
    ParamSet packed = pack_state(s, frame_prefix(static_cast<int>(k)));
    for (const auto& [name, value] : packed) params.add(name, value);
  }

  WindowResult result;
  result.states = states;
  const double frame_count = static_cast<double>(frames.size());

  double l_cur = 0.0;
  try {
    for (int it = 0; it < cfg.max_iters; ++it) {
      WindowEval cur = evaluate_window(params, frames, pres, states, cfg, true);
      if (it == 0) {
        result.initial_loss = cur.loss.total;
        result.final_loss = cur.loss.total;
      }
      l_cur = cur.loss.total;

      const double lr = learning_rate_at(cfg, it);
      ParamSet cand = project_step(params, cur.grads, lr, cfg, frames);
      std::vector<agent::AgentState> cand_states = unpack_window(
          cand, joints, static_cast<int>(frames.size()));
      WindowEval ce = evaluate_window(cand, frames, pres, cand_states, cfg, false);

      double applied_lr = lr;
      bool accepted = true;
      if (ce.loss.total > l_cur) {
        cand = project_step(params, cur.grads, lr * 0.5, cfg, frames);
        cand_states = unpack_window(cand, joints, static_cast<int>(frames.size()));
        ce = evaluate_window(cand, frames, pres, cand_states, cfg, false);
        applied_lr = lr * 0.5;
        if (ce.loss.total > l_cur) accepted = false;
      }

      IterationRecord rec;
      rec.iteration = it;
      rec.learning_rate = accepted ? applied_lr : 0.0;
      rec.accepted = accepted;
      if (accepted) {
        params = std::move(cand);
        states = std::move(cand_states);
        rec.loss = ce.loss;
      } else {
        rec.loss = cur.loss;
      }
      rec.states = states;
      result.trace.push_back(std::move(rec));

      result.states = states;
      result.final_loss = result.trace.back().loss.total;
      if (std::abs(result.final_loss - l_cur) / frame_count < cfg.tolerance) break;
    }
  } catch (const TransferError&) {
    throw;
  } catch (const Error& e) {
    throw TransferError(std::string("transfer diverged: ") + e.what(), states);
  }
  if (result.trace.empty()) {
    // max_iters == 0: report the loss at the (projected) initial point.
    WindowEval cur = evaluate_window(params, frames, pres, states, cfg, false);
    result.initial_loss = cur.loss.total;
    result.final_loss = cur.loss.total;
  }
  return result;
}

}  // namespace

double learning_rate_at(const TransferConfig& cfg, int iteration) {
  if (cfg.lr_halving_iters <= 0) return cfg.learning_rate;
  return cfg.learning_rate * std::pow(0.5, iteration / cfg.lr_halving_iters);
}

void TransferProblem::validate() const {
  require(def != nullptr, "transfer problem: missing agent definition");
  require(def->samples.size() == def->links.size(),
          "transfer problem: agent definition not finalized");
  const int n_agent = def->point_count();
  require(graph.agent_count == n_agent,
          "transfer problem: interaction graph agent count does not match the agent");
  require(static_cast<int>(source_object.points.size()) == graph.object_count,
          "transfer problem: source object does not match the interaction graph");
  require(static_cast<int>(corr.spatial.size()) == n_agent,
          "transfer problem: spatial correspondence count does not match the agent");
  require(static_cast<int>(corr.surface.size()) == graph.object_count,
          "transfer problem: surface correspondence count does not match the source object");
  require(!target_object.points.empty(), "transfer problem: empty target object");
  for (int idx : corr.surface)
    require(idx >= 0 && idx < static_cast<int>(target_object.points.size()),
            "transfer problem: surface correspondence index out of range");
  require(source_state.theta.size() == def->joint_count(),
          "transfer problem: source state does not match the agent's joints");
  require(static_cast<int>(graph.source_normals.size()) == n_agent,
          "transfer problem: interaction graph is missing source normals");
}

FrozenContext freeze_context(const TransferProblem& problem, const agent::AgentState& state) {
  FrozenContext ctx;
  const agent::AgentPoints pts = agent::forward_kinematics(*problem.def, state);
  ctx.align.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    ctx.align.push_back(geom::rotation_aligning(problem.graph.source_normals[i], pts.normals[i]));

  const std::vector<double> sd = agent::agent_sdf(*problem.def, state, problem.target_object.points);
  std::vector<int> interior;
  for (std::size_t m = 0; m < sd.size(); ++m)
    if (sd[m] < 0.0) interior.push_back(static_cast<int>(m));
  ctx.interior = std::move(interior);
  if (!ctx.interior.empty()) {
    geom::NearestIndex agent_index(pts.positions);
    ctx.nearest_agent.reserve(ctx.interior.size());
    for (int m : ctx.interior)
      ctx.nearest_agent.push_back(
          agent_index.nearest(problem.target_object.points[static_cast<std::size_t>(m)]));
  }
  return ctx;
}

ParamSet pack_state(const agent::AgentState& state, const std::string& prefix) {
  ParamSet out;
  out.add(prefix + "rot", vec_to_mat(state.rot));
  out.add(prefix + "trans", vec_to_mat(state.trans));
  if (state.theta.size() > 0) {
    Mat th(state.theta.size(), 1);
    th.col(0) = state.theta;
    out.add(prefix + "theta", th);
  }
  return out;
}

agent::AgentState unpack_state(const diff::ParamSet& params, int joint_count,
                               const std::string& prefix) {
  agent::AgentState s;
  s.rot = Vec3(params.at(prefix + "rot").col(0));
  s.trans = Vec3(params.at(prefix + "trans").col(0));
  if (joint_count > 0) {
    s.theta = params.at(prefix + "theta").col(0);
    require(s.theta.size() == joint_count, "unpack_state: joint count mismatch");
  } else {
    s.theta = Eigen::VectorXd(0);
  }
  return s;
}

Node taped_axis_angle(diff::Graph& g, Node w) {
  Node x = g.elem(diff::ElemOp::Sqrt, g.sum_squares(w));
  Node a = g.elem(diff::ElemOp::Sinc, x);
  Node b = g.elem(diff::ElemOp::Cosc, x);
  Node k = taped_skew(g, w);
  Node k2 = g.matmul(k, k);
  Node eye = g.constant(Mat(Mat::Identity(3, 3)));
  return g.add(g.add(eye, g.scalemul(a, k)), g.scalemul(b, k2));
}

Node taped_agent_points(diff::Graph& g, const agent::AgentDef& def, const std::string& prefix) {
  require(def.samples.size() == def.links.size(),
          "taped_agent_points: definition not finalized");
  Node rot = g.param(prefix + "rot");
  Node trans = g.param(prefix + "trans");
  Node theta = def.joint_count() > 0 ? g.param(prefix + "theta") : Node(-1);

  std::vector<Node> link_r(def.links.size());
  std::vector<Node> link_t(def.links.size());
  link_r[0] = taped_axis_angle(g, rot);
  link_t[0] = trans;
  for (std::size_t i = 1; i < def.links.size(); ++i) {
    const agent::Link& l = def.links[i];
    const std::size_t par = static_cast<std::size_t>(l.parent);
    Node angle = g.block(theta, static_cast<int>(i) - 1, 0, 1, 1);
    Node hinge = taped_hinge(g, angle, l.axis);
    Node r_off = g.matmul(link_r[par], g.constant(Mat(l.offset_R)));
    link_r[i] = g.matmul(r_off, hinge);
    link_t[i] = g.add(g.matmul(link_r[par], g.constant(vec_to_mat(l.offset_t))), link_t[par]);
  }

  Node all = -1;
  for (std::size_t i = 0; i < def.links.size(); ++i) {
    const auto& pts = def.samples[i].points;
    if (pts.empty()) continue;
    Mat local(3, static_cast<int>(pts.size()));
    for (std::size_t k = 0; k < pts.size(); ++k) local.col(static_cast<int>(k)) = pts[k];
    Node posed = g.affine(link_r[i], g.constant(local), link_t[i]);
    all = (all < 0) ? posed : g.hcat(all, posed);
  }
  require(all >= 0, "taped_agent_points: agent has no surface samples");
  return all;
}

FrameLossNodes build_frame_loss(diff::Graph& g, const TransferProblem& problem,
                                const FrozenContext& ctx, const TransferConfig& cfg,
                                const std::string& prefix) {
  problem.validate();
  require(static_cast<int>(ctx.align.size()) == problem.graph.agent_count,
          "build_frame_loss: context does not match the problem");
  require(ctx.interior.size() == ctx.nearest_agent.size(),
          "build_frame_loss: context interior arrays mismatch");
  const FramePre pre = precompute_frame(problem);
  return build_frame_loss_pre(g, problem, pre, ctx, cfg, prefix);
}

LossValues transfer_loss(const TransferProblem& problem, const agent::AgentState& state,
                         const TransferConfig& cfg) {
  problem.validate();
  const FrozenContext ctx = freeze_context(problem, state);
  const ParamSet params = pack_state(state);
  Graph g(&params);
  FrameLossNodes nodes = build_frame_loss(g, problem, ctx, cfg, "");
  LossValues v;
  v.spatial = g.scalar(nodes.spatial);
  v.surface = g.scalar(nodes.surface);
  v.penetration = g.scalar(nodes.penetration);
  v.total = g.scalar(nodes.total);
  return v;
}

agent::AgentState default_init(const TransferProblem& problem) {
  problem.validate();
  const agent::AgentPoints pts = agent::forward_kinematics(*problem.def, problem.source_state);
  Vec3 offset = Vec3::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) offset += problem.corr.spatial[i] - pts.positions[i];
  offset /= static_cast<double>(pts.size());
  agent::AgentState init = problem.source_state;
  init.trans += offset;
  return init;
}

TransferResult transfer_single(const TransferProblem& problem, const agent::AgentState& init,
                               const TransferConfig& cfg) {
  problem.validate();
  require(init.theta.size() == problem.def->joint_count(),
          "transfer_single: init does not match the agent's joints");
  WindowResult wr = optimize_window({&problem}, {init}, cfg);
  TransferResult out;
  out.state = wr.states[0];
  out.trace = std::move(wr.trace);
  out.initial_loss = wr.initial_loss;
  out.final_loss = wr.final_loss;
  return out;
}

TransferResult transfer_single(const TransferProblem& problem, const TransferConfig& cfg) {
  return transfer_single(problem, default_init(problem), cfg);
}

std::vector<int> window_starts(int frames, int window, int stride) {
  require(frames >= 1, "window_starts: empty sequence");
  require(window >= 1 && stride >= 1, "window_starts: window and stride must be positive");
  if (window >= frames) return {0};
  std::vector<int> starts;
  int s = 0;
  while (true) {
    starts.push_back(std::min(s, frames - window));
    if (s + window >= frames) break;
    s += stride;
  }
  return starts;
}

std::vector<agent::AgentState> transfer_sequence(const std::vector<TransferProblem>& problems,
                                                 const TransferConfig& cfg,
                                                 std::vector<WindowTrace>* traces) {
  require(!problems.empty(), "transfer_sequence: empty sequence");
  require(cfg.stride <= cfg.window,
          "transfer_sequence: stride larger than the window would leave frames uncovered");
  for (const TransferProblem& p : problems) {
    p.validate();
    require(p.def == problems.front().def,
            "transfer_sequence: frames must share one agent definition");
    require(p.target_object.points.size() == problems.front().target_object.points.size(),
            "transfer_sequence: frames must share one target object");
  }

  const int n = static_cast<int>(problems.size());
  const int window = std::min(cfg.window, n);
  std::vector<agent::AgentState> out(static_cast<std::size_t>(n));
  for (int start : window_starts(n, window, cfg.stride)) {
    std::vector<const TransferProblem*> frames;
    std::vector<agent::AgentState> inits;
    for (int k = start; k < start + window; ++k) {
      frames.push_back(&problems[static_cast<std::size_t>(k)]);
      inits.push_back(default_init(problems[static_cast<std::size_t>(k)]));
    }
    WindowResult wr = optimize_window(frames, inits, cfg);
    for (int k = 0; k < window; ++k)
      out[static_cast<std::size_t>(start + k)] = wr.states[static_cast<std::size_t>(k)];
    if (traces != nullptr) {
      WindowTrace wt;
      wt.start = start;
      wt.length = window;
      wt.trace = std::move(wr.trace);
      wt.initial_loss = wr.initial_loss;
      wt.final_loss = wr.final_loss;
      traces->push_back(std::move(wt));
    }
  }
  return out;
}

}  // namespace itx::transfer
