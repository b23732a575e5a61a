#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "metaplan/geometry.hpp"

namespace metaplan {

// -- Action language ---------------------------------------------------------
//
// The wire grammar between backend and framework (see docs/grammar.md):
//
//   response  = { ignorable-line } , plan-line , { plan-line | ignorable-line } ;
//   plan-line = "PLAN" , agent-id , ":" , action , { "->" , action } ;
//   action    = "PICK" obj [ "HANDLE" id | "OFFSET" number ]
//             | "PLACE" obj "AT" pose
//             | "MOVE" "TO" pose
//             | "TWIST" number
//             | "OPEN" | "CLOSE" | "WAIT" ;
//   pose      = "(" number "," number "," number [ "," number ] ")" ;

struct GraspByHandle {
    std::string handle_id;
    bool operator==(const GraspByHandle&) const = default;
};

/// Grasp point measured in meters along the object's axis.
struct GraspByOffset {
    double offset = 0.0;
    bool operator==(const GraspByOffset&) const = default;
};

using GraspSpec = std::variant<GraspByHandle, GraspByOffset>;

struct PickAction {
    std::string object_id;
    GraspSpec grasp = GraspByOffset{0.0};
    bool operator==(const PickAction&) const = default;
};

struct PlaceAction {
    std::string object_id;
    Pose at;
    bool operator==(const PlaceAction&) const = default;
};

struct MoveAction {
    Pose to;
    bool operator==(const MoveAction&) const = default;
};

struct TwistAction {
    double degrees = 0.0;  // in [-180, 180]
    bool operator==(const TwistAction&) const = default;
};

struct OpenAction {
    bool operator==(const OpenAction&) const = default;
};
struct CloseAction {
    bool operator==(const CloseAction&) const = default;
};
struct WaitAction {
    bool operator==(const WaitAction&) const = default;
};

using Action = std::variant<PickAction, PlaceAction, MoveAction, TwistAction, OpenAction,
                            CloseAction, WaitAction>;

struct AgentPlan {
    std::string agent_id;
    std::vector<Action> actions;  // non-empty
    bool operator==(const AgentPlan&) const = default;
};

/// Step-aligned plans for all agents: action k of every agent executes in the
/// same environment step. After parsing, shorter plans are padded with WAIT.
struct JointPlan {
    std::map<std::string, AgentPlan> plans;

    std::size_t length() const {
        std::size_t n = 0;
        for (const auto& [_, p] : plans) n = std::max(n, p.actions.size());
        return n;
    }
    bool operator==(const JointPlan&) const = default;
};

JointPlan parse_plan(const std::string& text);
std::string serialize_plan(const JointPlan& plan);
std::string serialize_action(const Action& action);

// -- Prompt assembly ---------------------------------------------------------

struct PromptSection {
    std::string label;  // GOAL | OBSERVATION | META | FORMAT
    std::string text;
};

struct PromptBundle {
    std::string agent_id;  // or "CENTRAL"
    std::vector<PromptSection> sections;
    std::string rendered;  // concatenation of sections in order
};

struct Observation;  // world.hpp

/// One line per visible object, `<id> <kind> at (x,y,z,yaw)` with 3 decimals,
/// sorted by id, then the agent's own arm state.
std::string render_observation(const Observation& o);

/// Deterministic prompt: GOAL verbatim, rendered observation, META (the
/// rendered metacognition input), and the grammar reminder as FORMAT.
PromptBundle render_prompt(const std::string& agent_id, const std::string& goal,
                           const Observation& o, const std::string& meta_text);

/// The FORMAT section body shared by every prompt.
std::string grammar_reminder();

}  // namespace metaplan
