#pragma once

#include "itx/agent/agent.hpp"

namespace itx::agent {

// Three-fingered gripper sized for unit-normalized tabletop objects: a palm
// capsule with one opposing finger and a two-finger pair, each finger having
// proximal and distal hinge links (6 joints, 600 surface points).  Positive
// angles curl the fingers inward toward the palm axis.
AgentDef make_gripper();

// Seated figure for unit-normalized chairs: torso plus two legs (hip + knee)
// and two arms (shoulder + elbow), all pitch hinges (8 joints, 900 surface
// points).  Positive hip angles swing the thighs forward.
AgentDef make_sitter();

// Lookup by name ("gripper" | "sitter"); throws on anything else.
AgentDef make_agent(const std::string& name);

}  // namespace itx::agent
