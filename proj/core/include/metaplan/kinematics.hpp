#pragma once

#include <variant>
#include <vector>

#include "metaplan/world.hpp"

namespace metaplan {

/// End-effector pose: base_yaw selects a vertical working plane through the
/// base; within it, a planar 2-link chain (shoulder, elbow) with z measured
/// from base height.
Pose forward_kinematics(const ArmModel& arm, const JointConfig& q);

/// Joint positions (shoulder, elbow, end effector) for collision capsules.
struct ArmPoints {
    Vec3 shoulder;
    Vec3 elbow;
    Vec3 ee;
};
ArmPoints arm_points(const ArmModel& arm, const JointConfig& q);

enum class IkReason { OutOfReach, JointLimit };

struct IkFailure {
    IkReason reason = IkReason::OutOfReach;
};

/// Analytic two-link IK in the vertical plane toward the target; elbow-down
/// branch preferred, elbow-up tried when elbow-down violates joint limits.
std::variant<JointConfig, IkFailure> inverse_kinematics(const ArmModel& arm, const Vec3& target);

/// Linear joint-space interpolation; the waypoint count is chosen so the
/// end-effector chord between `from` and `to` is cut into pieces of at most
/// `kInterpolationResolution` (actual arc steps can exceed it slightly).
inline constexpr double kInterpolationResolution = 0.05;  // meters

std::vector<Waypoint> interpolate(const JointConfig& from, const JointConfig& to,
                                  const ArmModel& arm);

}  // namespace metaplan
