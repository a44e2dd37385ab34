#pragma once

#include <string>

#include "itx/agent/agent.hpp"
#include "itx/geom/point_cloud.hpp"

namespace itx::tools {

// True for the built-in interaction names ("demo_grasp", "demo_sit").
bool is_demo_interaction(const std::string& name);

// Agent preset the named demo interaction is authored for.
std::string demo_agent_preset(const std::string& name);

// Authors a contact pose against the sampled object deterministically:
// the agent approaches along a straight line by bisection until its surface
// clears the object by a hair, then (for the grasp) the fingers curl in by a
// second bisection until first contact.  demo_grasp lowers a gripper over the
// object top; demo_sit seats a pre-bent sitter onto the object from above.
agent::AgentState author_demo_pose(const std::string& name, const agent::AgentDef& def,
                                   const geom::PointCloud& object);

}  // namespace itx::tools
