#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "metaplan/geometry.hpp"
#include "metaplan/kinematics.hpp"
#include "metaplan/plan.hpp"
#include "metaplan/world.hpp"

namespace metaplan {

// -- Collision checking -------------------------------------------------------

struct PlacedShape {
    std::string entity;  // arm or object id (stable, used for pair ordering)
    Capsule capsule;
};

struct CollisionHit {
    std::string a;
    std::string b;
    Vec3 position;  // midpoint of closest approach
};

/// Pairwise narrow phase over placed capsules. Shapes sharing the same entity
/// name are never tested against each other. Returns the lexicographically
/// first colliding (a, b) pair.
std::optional<CollisionHit> check_collision(const std::vector<PlacedShape>& shapes);

/// Decompose a scene object into collision capsules. Boxes become one capsule
/// per long axis; grooves and tables are openings/support surfaces and yield none.
std::vector<Capsule> object_capsules(const SceneObject& obj);

// -- Failure feedback ---------------------------------------------------------

struct CollisionFailure {
    std::string a;
    std::string b;
    Pose position;
    bool operator==(const CollisionFailure&) const = default;
};

struct IkInfeasibleFailure {
    std::string agent_id;
    Pose target;
    IkReason reason = IkReason::OutOfReach;
    bool operator==(const IkInfeasibleFailure&) const = default;
};

struct RopeOverstretchFailure {
    double length = 0.0;
    double max = 0.0;
    bool operator==(const RopeOverstretchFailure&) const = default;
};

struct GraspErrorFailure {
    std::string agent_id;
    std::string object_id;
    std::string reason;
    bool operator==(const GraspErrorFailure&) const = default;
};

using FailureNature =
    std::variant<CollisionFailure, IkInfeasibleFailure, RopeOverstretchFailure, GraspErrorFailure>;

struct FailureFeedback {
    FailureNature nature;
    int step_index = 0;
    int waypoint_index = 0;
    bool operator==(const FailureFeedback&) const = default;
};

/// Stable JSON record (keys: nature, a, b, position, step_index,
/// waypoint_index) embedded in reflection prompts and transcripts.
std::string failure_to_json(const FailureFeedback& failure);

struct ValidationReport {
    bool ok = false;
    std::optional<FailureFeedback> failure;  // present iff !ok
    int checked_steps = 0;
};

/// Per-agent waypoints realizing each environment step of a validated plan.
struct Trajectory {
    std::string agent_id;
    std::vector<std::vector<Waypoint>> steps;
};

struct ValidationResult {
    ValidationReport report;
    std::map<std::string, Trajectory> trajectories;
};

/// Simulates the joint plan step by step without mutating `world`: resolves
/// action targets, runs IK, interpolates, and sweeps all agents' waypoints in
/// lockstep checking arm/object collisions and rope length constraints.
/// First failure wins.
ValidationResult validate_joint_plan(const WorldState& world, const TaskSpec& task,
                                     const JointPlan& plan);

}  // namespace metaplan
