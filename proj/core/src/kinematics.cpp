#include "metaplan/kinematics.hpp"

#include <cmath>

namespace metaplan {

namespace {

/// Shoulder/elbow/ee positions in the vertical working plane selected by the
/// base yaw joint. Returns all three so collision shapes can share the math.
ArmPoints points_impl(const ArmModel& arm, const JointConfig& q) {
    const double plane = arm.base.yaw + q[0];
    const Vec3 radial{std::cos(plane), std::sin(plane), 0.0};
    const Vec3 base = arm.base.position();

    const double l1 = arm.link_lengths[0];
    const double l2 = arm.link_lengths[1];
    const double r1 = l1 * std::cos(q[1]);
    const double z1 = l1 * std::sin(q[1]);
    const double r2 = r1 + l2 * std::cos(q[1] + q[2]);
    const double z2 = z1 + l2 * std::sin(q[1] + q[2]);

    ArmPoints pts;
    pts.shoulder = base;
    pts.elbow = base + radial * r1 + Vec3{0, 0, z1};
    pts.ee = base + radial * r2 + Vec3{0, 0, z2};
    return pts;
}

bool within_limits(const ArmModel& arm, const JointConfig& q) {
    for (std::size_t i = 0; i < 3; ++i) {
        if (q[i] < arm.joint_limits[i][0] - 1e-12 || q[i] > arm.joint_limits[i][1] + 1e-12)
            return false;
    }
    return true;
}

}  // namespace

ArmPoints arm_points(const ArmModel& arm, const JointConfig& q) {
    return points_impl(arm, q);
}

Pose forward_kinematics(const ArmModel& arm, const JointConfig& q) {
    const ArmPoints pts = points_impl(arm, q);
    return Pose{pts.ee.x, pts.ee.y, pts.ee.z, normalize_yaw(arm.base.yaw + q[0])};
}

std::variant<JointConfig, IkFailure> inverse_kinematics(const ArmModel& arm, const Vec3& target) {
    const Vec3 d = target - arm.base.position();
    const double r = std::sqrt(d.x * d.x + d.y * d.y);
    const double z = d.z;
    const double l1 = arm.link_lengths[0];
    const double l2 = arm.link_lengths[1];
    const double dist2 = r * r + z * z;
    const double dist = std::sqrt(dist2);

    constexpr double kEps = 1e-9;
    if (dist > l1 + l2 + kEps || dist < std::abs(l1 - l2) - kEps)
        return IkFailure{IkReason::OutOfReach};

    double base_yaw;
    if (r < 1e-12) {
        base_yaw = 0.0;  // target on the base axis: any plane works
    } else {
        base_yaw = normalize_yaw(std::atan2(d.y, d.x) - arm.base.yaw);
    }

    double cos_elbow = (dist2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    cos_elbow = std::clamp(cos_elbow, -1.0, 1.0);
    const double elbow_mag = std::acos(cos_elbow);
    const double gamma = std::atan2(z, r);

    // Prefer elbow "down" (positive elbow angle); fall back to the mirrored
    // solution when joint limits rule the first one out.
    for (const double elbow : {elbow_mag, -elbow_mag}) {
        const double shoulder =
            gamma - std::atan2(l2 * std::sin(elbow), l1 + l2 * std::cos(elbow));
        const JointConfig q{base_yaw, shoulder, elbow};
        if (within_limits(arm, q)) return q;
    }
    return IkFailure{IkReason::JointLimit};
}

std::vector<Waypoint> interpolate(const JointConfig& from, const JointConfig& to,
                                  const ArmModel& arm) {
    // Upper bound on end-effector displacement per unit of joint motion; this
    // keeps consecutive sweep samples within the resolution even when the
    // chord between the endpoints is short but the arc is long.
    const double reach = arm.link_lengths[0] + arm.link_lengths[1];
    const double bound = std::abs(to[0] - from[0]) * reach +
                         std::abs(to[1] - from[1]) * reach +
                         std::abs(to[2] - from[2]) * arm.link_lengths[1];

    std::size_t segments = static_cast<std::size_t>(std::ceil(bound / kInterpolationResolution));
    if (segments == 0 && !(from == to)) segments = 1;

    std::vector<Waypoint> out;
    out.reserve(segments + 1);
    for (std::size_t i = 0; i <= segments; ++i) {
        JointConfig q = to;  // exact arrival at the final waypoint
        if (i < segments) {
            const double t = static_cast<double>(i) / segments;
            for (std::size_t k = 0; k < 3; ++k) q[k] = from[k] + (to[k] - from[k]) * t;
        }
        out.push_back(Waypoint{q, forward_kinematics(arm, q)});
    }
    return out;
}

}  // namespace metaplan
