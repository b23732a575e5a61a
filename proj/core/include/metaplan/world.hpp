#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "metaplan/geometry.hpp"
#include "metaplan/plan.hpp"

namespace metaplan {

enum class ObjectKind { Rope, Panel, Door, Cup, FoodItem, Wall, Stud, Groove, Table };

std::string to_string(ObjectKind kind);
ObjectKind object_kind_from_string(const std::string& s);

struct GeometrySpec {
    enum class Shape { Sphere, Capsule, Box };
    Shape shape = Shape::Sphere;
    double radius = 0.0;       // sphere, capsule
    Vec3 p0, p1;               // capsule endpoints, local to the pose
    Vec3 half_extents;         // box
    bool operator==(const GeometrySpec&) const = default;
};

struct Handle {
    std::string id;
    double offset = 0.0;  // meters along the object axis
    bool operator==(const Handle&) const = default;
};

struct SceneObject {
    std::string id;
    ObjectKind kind = ObjectKind::Table;
    Pose pose;
    GeometrySpec geometry;
    std::vector<Handle> handles;
    bool graspable = false;

    /// Length of the grasp axis: capsule length, box x-extent, sphere diameter.
    double axial_length() const;
    bool operator==(const SceneObject&) const = default;
};

struct ArmModel {
    std::string agent_id;
    Pose base;
    std::array<double, 2> link_lengths{};                  // upper, fore
    std::array<std::array<double, 2>, 3> joint_limits{};   // base_yaw, shoulder, elbow
    double capsule_radius = 0.0;
    double reachable_radius = 0.0;
    bool operator==(const ArmModel&) const = default;
};

struct Grasp {
    std::string object_id;
    double offset = 0.0;  // meters along the object axis
    bool operator==(const Grasp&) const = default;
};

enum class Gripper { Open, Closed };

struct ArmState {
    std::array<double, 3> joints{};  // base_yaw, shoulder, elbow
    Gripper gripper = Gripper::Open;
    std::optional<Grasp> held;       // held implies gripper closed
    bool operator==(const ArmState&) const = default;
};

// -- Success predicates ------------------------------------------------------

struct RopeInGroove {
    std::string groove_id;
    std::string clearance_wall_id;
    bool operator==(const RopeInGroove&) const = default;
};

struct PanelInstalled {
    Pose target;
    double pos_tol = 0.0;
    double ang_tol = 0.0;
    bool operator==(const PanelInstalled&) const = default;
};

struct PlacementRegion {
    Vec3 center;
    double radius = 0.0;
    bool operator==(const PlacementRegion&) const = default;
};

struct DoorOpenAndPlaced {
    std::string door_id;
    double hinge_threshold = 0.0;  // radians
    std::map<std::string, PlacementRegion> placements;
    bool operator==(const DoorOpenAndPlaced&) const = default;
};

struct StackOrder {
    std::vector<std::string> order;  // bottom to top
    double xy_tol = 0.0;
    bool operator==(const StackOrder&) const = default;
};

using SuccessPredicate = std::variant<RopeInGroove, PanelInstalled, DoorOpenAndPlaced, StackOrder>;

struct TaskSpec {
    std::string task_id;  // move_rope | arrange_cabinet | make_sandwich | install_drywall
    std::map<std::string, std::string> agent_goals;
    std::vector<SceneObject> initial_scene;
    std::vector<ArmModel> arms;
    SuccessPredicate success;
    int max_env_steps = 10;
    int max_replans = 5;
    std::uint64_t seed = 0;

    const ArmModel& arm(const std::string& agent_id) const;
};

struct WorldState {
    int step_count = 0;
    std::map<std::string, ArmState> arm_states;
    std::map<std::string, SceneObject> objects;
    bool done = false;
    bool operator==(const WorldState&) const = default;
};

struct Observation {
    std::string agent_id;
    struct VisibleObject {
        std::string object_id;
        Pose pose;
        ObjectKind kind = ObjectKind::Table;
    };
    std::vector<VisibleObject> visible_objects;  // sorted by object_id
    ArmState own_arm;
    double reachable_radius = 0.0;
    int step_count = 0;
};

struct StepOutcome {
    bool done = false;
};

using JointConfig = std::array<double, 3>;  // base_yaw, shoulder, elbow

struct Waypoint {
    JointConfig config{};
    Pose ee;
    bool operator==(const Waypoint&) const = default;
};

// -- Operations ---------------------------------------------------------------

TaskSpec load_task(const std::string& json_text);
TaskSpec load_task_file(const std::string& path);

/// Home joints (zeros clamped into limits), initial scene poses with
/// deterministic seed jitter (uniform +-1cm on graspable object x,y).
WorldState reset(const TaskSpec& task);

Observation observe(const WorldState& world, const TaskSpec& task, const std::string& agent_id);

/// Full-state variant: every object visible regardless of radius.
Observation observe_full(const WorldState& world, const TaskSpec& task,
                         const std::string& agent_id);

/// Executes one synchronized step of previously validated actions. The
/// per-agent waypoint lists are the validator's sub-trajectories for this
/// step; an agent's arm ends at its last waypoint.
std::pair<WorldState, StepOutcome> apply_joint_step(
    const WorldState& world, const TaskSpec& task, const std::map<std::string, Action>& actions,
    const std::map<std::string, std::vector<Waypoint>>& trajectories);

bool check_success(const WorldState& world, const TaskSpec& task);

// -- Shared grasp geometry (also used by the validator) -----------------------

/// Unit direction of the object's grasp axis in world coordinates.
Vec3 object_axis_dir(const SceneObject& obj);

/// Origin of the grasp axis in world coordinates (capsule p0; box/sphere center).
Vec3 object_axis_origin(const SceneObject& obj);

/// World position of a grasp at `offset` meters along the object axis.
Vec3 grasp_point(const SceneObject& obj, double offset);

/// Resolve a grasp spec (handle or offset) to its axial offset.
double resolve_grasp_offset(const SceneObject& obj, const GraspSpec& grasp, std::string* error);

/// World endpoints of a rope given its two grasp points and grasp offsets;
/// the free ends extrapolate along the grasp line.
std::pair<Vec3, Vec3> rope_endpoints_from_grasps(double rope_length, Vec3 g_low, double off_low,
                                                 Vec3 g_high, double off_high);

}  // namespace metaplan
