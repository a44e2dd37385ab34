#pragma once

#include <string>
#include <vector>

#include "itx/agent/agent.hpp"
#include "itx/corr/correspond.hpp"
#include "itx/diff/graph.hpp"
#include "itx/geom/point_cloud.hpp"
#include "itx/interaction/graph.hpp"
#include "itx/util/error.hpp"

namespace itx::transfer {

using geom::Vec3;

// Knobs of the constrained pose optimization.  The search runs projected
// gradient descent on (root rotation, root translation, joint angles): each
// iteration clips the gradient to a global norm per frame, applies the
// (halving-scheduled) learning rate, and projects the joint angles back into
// the +-gamma box around their source values.  A step that fails to decrease
// the loss is retried once at half length, then rejected.
struct TransferConfig {
  double lambda_spatial = 1.0;      // position-reference term
  double lambda_surface = 1.0;      // Laplacian-detail term
  double lambda_penetration = 1.0;  // interior-point repulsion term
  double lambda_smooth = 0.01;      // adjacent-frame joint continuity (sequences)
  double gamma = 10.0 * 3.14159265358979323846 / 180.0;  // joint-angle box, radians
  double learning_rate = 0.01;
  int lr_halving_iters = 10;  // <=0 disables the halving schedule
  double clip_norm = 0.01;    // per-frame global gradient norm bound
  int max_iters = 100;
  double tolerance = 1e-4;    // stop when |loss change| / frames < tolerance
  int window = 12;            // sequence window length K
  int stride = 6;             // sequence window advance
};

// Learning rate at a given iteration under the halving schedule.
double learning_rate_at(const TransferConfig& cfg, int iteration);

// One transfer task: the source interaction, its frozen interaction graph,
// the correspondences into the target, and the target points (used both for
// corresponded object neighbor positions and for penetration detection).
struct TransferProblem {
  const agent::AgentDef* def = nullptr;
  agent::AgentState source_state;
  geom::PointCloud source_object;        // O^s, indexing the graph's object side
  interaction::InteractionGraph graph;   // built on (O^s, source agent points)
  corr::Correspondence corr;             // spatial a^st per agent point, surface map per object point
  geom::PointCloud target_object;        // O^t; corr.surface indexes into it

  // Checks pointer presence and array congruence; throws on violation.
  void validate() const;
};

// Loss pieces at one state (already lambda-weighted into total).
struct LossValues {
  double spatial = 0.0;
  double surface = 0.0;
  double penetration = 0.0;
  double smooth = 0.0;
  double total = 0.0;
};

// Selections that are refreshed from the current state each iteration but held
// constant inside one differentiation: the per-point normal-alignment
// rotations, the target points currently inside the agent, and the nearest
// agent sample for each such interior point.
struct FrozenContext {
  std::vector<geom::Mat3> align;   // per agent point: source normal -> current normal
  std::vector<int> interior;       // target-point indices with agent_sdf < 0
  std::vector<int> nearest_agent;  // per interior entry: closest agent point index
};

FrozenContext freeze_context(const TransferProblem& problem, const agent::AgentState& state);

// Pose <-> parameter packing.  Entries are named {prefix}rot, {prefix}trans,
// and (when the agent has joints) {prefix}theta.
diff::ParamSet pack_state(const agent::AgentState& state, const std::string& prefix = "");
agent::AgentState unpack_state(const diff::ParamSet& params, int joint_count,
                               const std::string& prefix = "");

// Rotation matrix of an axis-angle 3-vector node (Rodrigues form), exactly
// differentiable including at the zero rotation.
diff::Graph::Node taped_axis_angle(diff::Graph& g, diff::Graph::Node w);

// Posed agent sample positions as a [3 x N] node over the packed pose
// parameters; column order matches forward_kinematics.
diff::Graph::Node taped_agent_points(diff::Graph& g, const agent::AgentDef& def,
                                     const std::string& prefix = "");

// Lambda-weighted loss tape for one frame under a frozen context.
struct FrameLossNodes {
  diff::Graph::Node spatial = -1;
  diff::Graph::Node surface = -1;
  diff::Graph::Node penetration = -1;
  diff::Graph::Node total = -1;
};
FrameLossNodes build_frame_loss(diff::Graph& g, const TransferProblem& problem,
                                const FrozenContext& ctx, const TransferConfig& cfg,
                                const std::string& prefix = "");

// Loss components at a state (context frozen from that same state).
LossValues transfer_loss(const TransferProblem& problem, const agent::AgentState& state,
                         const TransferConfig& cfg);

// One optimization iteration's record: the loss at the accepted state (equal
// to the previous record's loss when the step was rejected), the learning
// rate used, and the per-frame states after the iteration.
struct IterationRecord {
  int iteration = 0;
  LossValues loss;
  double learning_rate = 0.0;
  bool accepted = false;
  std::vector<agent::AgentState> states;
};

struct TransferResult {
  agent::AgentState state;
  std::vector<IterationRecord> trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Thrown when a non-finite value appears during optimization; carries the
// last valid per-frame states.
class TransferError : public Error {
 public:
  TransferError(const std::string& msg, std::vector<agent::AgentState> last)
      : Error(msg), last_states(std::move(last)) {}
  std::vector<agent::AgentState> last_states;
};

// Source state with the root translation shifted by the mean of
// (a^st - source agent points): the corresponded targets supply the warm
// start's rigid offset.
agent::AgentState default_init(const TransferProblem& problem);

// Single-frame transfer from an explicit initial state, and the convenience
// overload starting from default_init.
TransferResult transfer_single(const TransferProblem& problem, const agent::AgentState& init,
                               const TransferConfig& cfg);
TransferResult transfer_single(const TransferProblem& problem, const TransferConfig& cfg);

// Window start offsets for a sequence: 0, stride, 2*stride, ... with the last
// window shifted back so it ends exactly at the final frame.
std::vector<int> window_starts(int frames, int window, int stride);

// Sliding-window sequence optimization: each window of cfg.window frames is
// optimized jointly (adding the adjacent-frame smoothness term), windows
// advance by cfg.stride, and frames covered by several windows keep the
// Per-window optimization record reported by sequence runs.
struct WindowTrace {
  int start = 0;   // first frame covered by the window
  int length = 0;  // frames in the window
  std::vector<IterationRecord> trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// latest window's result.  Every window starts fresh from default_init so
// identical frames yield identical outputs.  When `traces` is non-null it
// receives one record per optimized window, in processing order.
std::vector<agent::AgentState> transfer_sequence(const std::vector<TransferProblem>& problems,
                                                 const TransferConfig& cfg,
                                                 std::vector<WindowTrace>* traces = nullptr);

}  // namespace itx::transfer
