#include "metaplan/validate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "metaplan/errors.hpp"

namespace metaplan {

using nlohmann::json;

namespace {

/// Slack tolerated on the grasp-to-grasp span of a taut rope; absorbs the
/// small mid-trajectory bulge of joint-space interpolation.
constexpr double kRopeSlack = 0.02;

/// Height above the grasp point from which an object is released on PLACE.
/// The gripper opens at this standoff and the object settles into the target
/// pose, so the end effector never rests in contact with what it just set
/// down and the next step does not begin in collision.
constexpr double kPlaceHover = 0.08;

}  // namespace

std::vector<Capsule> object_capsules(const SceneObject& obj) {
    if (obj.kind == ObjectKind::Groove || obj.kind == ObjectKind::Table) return {};
    const Vec3 pos = obj.pose.position();
    const double yaw = obj.pose.yaw;
    switch (obj.geometry.shape) {
        case GeometrySpec::Shape::Sphere:
            return {Capsule{pos, pos, obj.geometry.radius}};
        case GeometrySpec::Shape::Capsule:
            return {Capsule{pos + rotate_yaw(obj.geometry.p0, yaw),
                            pos + rotate_yaw(obj.geometry.p1, yaw), obj.geometry.radius}};
        case GeometrySpec::Shape::Box: {
            // Thin-cross approximation: one capsule per axis longer than the
            // smallest half extent, with the smallest half extent as radius.
            const Vec3& h = obj.geometry.half_extents;
            const double r = std::min({h.x, h.y, h.z});
            const std::array<Vec3, 3> axes = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
            const std::array<double, 3> extents = {h.x, h.y, h.z};
            std::vector<Capsule> out;
            for (std::size_t i = 0; i < 3; ++i) {
                if (extents[i] > r + 1e-12) {
                    const Vec3 half = rotate_yaw(axes[i] * (extents[i] - r), yaw);
                    out.push_back(Capsule{pos - half, pos + half, r});
                }
            }
            if (out.empty()) out.push_back(Capsule{pos, pos, r});  // near-cube
            return out;
        }
    }
    return {};
}

namespace {

using ExclusionSet = std::set<std::pair<std::string, std::string>>;

std::pair<std::string, std::string> ordered_pair(const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

std::optional<CollisionHit> first_collision(const std::vector<PlacedShape>& shapes,
                                            const ExclusionSet& excluded) {
    std::optional<CollisionHit> best;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        for (std::size_t k = i + 1; k < shapes.size(); ++k) {
            const auto& sa = shapes[i];
            const auto& sb = shapes[k];
            if (sa.entity == sb.entity) continue;
            const auto pair = ordered_pair(sa.entity, sb.entity);
            if (excluded.count(pair)) continue;
            const SegmentDistance d =
                segment_segment_distance(sa.capsule.a, sa.capsule.b, sb.capsule.a, sb.capsule.b);
            if (d.dist < sa.capsule.radius + sb.capsule.radius) {
                CollisionHit hit{pair.first, pair.second, (d.on_a + d.on_b) * 0.5};
                if (!best || std::make_pair(hit.a, hit.b) < std::make_pair(best->a, best->b))
                    best = hit;
            }
        }
    }
    return best;
}

}  // namespace

std::optional<CollisionHit> check_collision(const std::vector<PlacedShape>& shapes) {
    return first_collision(shapes, {});
}

std::string failure_to_json(const FailureFeedback& failure) {
    json j;
    j["step_index"] = failure.step_index;
    j["waypoint_index"] = failure.waypoint_index;
    if (const auto* c = std::get_if<CollisionFailure>(&failure.nature)) {
        j["nature"] = "collision";
        j["a"] = c->a;
        j["b"] = c->b;
        j["position"] = {c->position.x, c->position.y, c->position.z};
    } else if (const auto* ik = std::get_if<IkInfeasibleFailure>(&failure.nature)) {
        j["nature"] = "ik_infeasible";
        j["agent_id"] = ik->agent_id;
        j["target"] = {ik->target.x, ik->target.y, ik->target.z, ik->target.yaw};
        j["reason"] = ik->reason == IkReason::OutOfReach ? "out_of_reach" : "joint_limit";
    } else if (const auto* r = std::get_if<RopeOverstretchFailure>(&failure.nature)) {
        j["nature"] = "rope_overstretch";
        j["length"] = r->length;
        j["max"] = r->max;
    } else if (const auto* g = std::get_if<GraspErrorFailure>(&failure.nature)) {
        j["nature"] = "grasp_error";
        j["agent_id"] = g->agent_id;
        j["object_id"] = g->object_id;
        j["reason"] = g->reason;
    }
    return j.dump();
}

// -- Plan validation ----------------------------------------------------------

namespace {

/// Local grasp point (object frame) at an axial offset. Mirrors the
/// attachment math used when the environment derives held-object poses.
Vec3 local_grasp(const SceneObject& obj, double offset) {
    if (obj.geometry.shape == GeometrySpec::Shape::Capsule) {
        Vec3 axis = obj.geometry.p1 - obj.geometry.p0;
        double len = norm(axis);
        Vec3 dir = len < 1e-12 ? Vec3{1, 0, 0} : axis * (1.0 / len);
        return obj.geometry.p0 + dir * offset;
    }
    return {offset, 0, 0};
}

/// (agent, offset) holders of an object, sorted by offset.
std::vector<std::pair<std::string, double>> holders_of(const WorldState& world,
                                                       const std::string& object_id) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [agent, state] : world.arm_states) {
        if (state.held && state.held->object_id == object_id)
            out.push_back({agent, state.held->offset});
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    return out;
}

/// Pose of a held object re-derived from hypothetical holder ee positions.
Pose held_pose(const SceneObject& obj, const std::vector<std::pair<std::string, double>>& hs,
               const std::map<std::string, Vec3>& ee) {
    if (hs.size() == 1) {
        const Vec3 g = ee.at(hs[0].first);
        const Vec3 pos = g - rotate_yaw(local_grasp(obj, hs[0].second), obj.pose.yaw);
        return Pose{pos.x, pos.y, pos.z, obj.pose.yaw};
    }
    const Vec3 g_low = ee.at(hs[0].first);
    const Vec3 g_high = ee.at(hs[1].first);
    if (obj.kind == ObjectKind::Rope) {
        auto [p0, p1] = rope_endpoints_from_grasps(obj.axial_length(), g_low, hs[0].second,
                                                   g_high, hs[1].second);
        const double yaw = normalize_yaw(std::atan2(p1.y - p0.y, p1.x - p0.x));
        const Vec3 pos = p0 - rotate_yaw(obj.geometry.p0, yaw);
        return Pose{pos.x, pos.y, pos.z, yaw};
    }
    const Vec3 l_low = local_grasp(obj, hs[0].second);
    const Vec3 l_high = local_grasp(obj, hs[1].second);
    const Vec3 dg = g_high - g_low;
    const Vec3 dl = l_high - l_low;
    const double yaw = normalize_yaw(std::atan2(dg.y, dg.x) - std::atan2(dl.y, dl.x));
    const Vec3 pos = g_low - rotate_yaw(l_low, yaw);
    return Pose{pos.x, pos.y, pos.z, yaw};
}

/// Evenly resample a waypoint list to exactly n configurations so that all
/// agents sweep their step in lockstep.
std::vector<Waypoint> resample(const std::vector<Waypoint>& wps, std::size_t n,
                               const ArmModel& arm) {
    std::vector<Waypoint> out;
    out.reserve(n);
    const std::size_t m = wps.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = n == 1 ? double(m - 1) : double(i) * double(m - 1) / double(n - 1);
        const std::size_t j = std::min(static_cast<std::size_t>(t), m - 1);
        const std::size_t k = std::min(j + 1, m - 1);
        const double frac = t - double(j);
        JointConfig q;
        for (std::size_t c = 0; c < 3; ++c)
            q[c] = wps[j].config[c] + (wps[k].config[c] - wps[j].config[c]) * frac;
        out.push_back(Waypoint{q, forward_kinematics(arm, q)});
    }
    return out;
}

ValidationResult fail(FailureNature nature, int step, int waypoint, int checked) {
    ValidationResult res;
    res.report.ok = false;
    res.report.failure = FailureFeedback{std::move(nature), step, waypoint};
    res.report.checked_steps = checked;
    return res;
}

}  // namespace

ValidationResult validate_joint_plan(const WorldState& world, const TaskSpec& task,
                                     const JointPlan& plan) {
    if (plan.plans.empty()) throw std::invalid_argument("empty joint plan");
    for (const auto& [agent, _] : plan.plans) task.arm(agent);  // throws UnknownAgent

    WorldState sim = world;
    // The simulated rollout must not trip the environment's step cap; the
    // episode loop enforces that budget separately.
    TaskSpec sim_task = task;
    sim_task.max_env_steps = std::numeric_limits<int>::max();

    ValidationResult result;
    for (const auto& [agent, _] : plan.plans) result.trajectories[agent] = Trajectory{agent, {}};

    const std::size_t steps = plan.length();
    for (std::size_t s = 0; s < steps; ++s) {
        std::map<std::string, Action> actions;
        for (const auto& [agent, ap] : plan.plans) {
            actions[agent] = s < ap.actions.size() ? ap.actions[s] : Action{WaitAction{}};
        }

        // Resolve each agent's end-effector target for this step. Grasp
        // preconditions are checked here so the committed transition below
        // cannot reject them.
        std::map<std::string, std::optional<Vec3>> targets;  // nullopt: arm stays put
        for (const auto& [agent, action] : actions) {
            const ArmState& st = sim.arm_states.at(agent);
            const Vec3 current_ee = forward_kinematics(task.arm(agent), st.joints).position();
            if (const auto* pick = std::get_if<PickAction>(&action)) {
                if (st.held)
                    return fail(GraspErrorFailure{agent, pick->object_id,
                                                  "already holding " + st.held->object_id},
                                int(s), 0, int(s));
                auto it = sim.objects.find(pick->object_id);
                if (it == sim.objects.end())
                    return fail(GraspErrorFailure{agent, pick->object_id, "unknown object"},
                                int(s), 0, int(s));
                if (!it->second.graspable)
                    return fail(GraspErrorFailure{agent, pick->object_id, "not graspable"},
                                int(s), 0, int(s));
                std::string err;
                const double offset = resolve_grasp_offset(it->second, pick->grasp, &err);
                if (!err.empty())
                    return fail(GraspErrorFailure{agent, pick->object_id, err}, int(s), 0,
                                int(s));
                targets[agent] = grasp_point(it->second, offset);
            } else if (const auto* place = std::get_if<PlaceAction>(&action)) {
                if (!st.held || st.held->object_id != place->object_id)
                    return fail(GraspErrorFailure{agent, place->object_id, "not holding object"},
                                int(s), 0, int(s));
                const SceneObject& obj = sim.objects.at(place->object_id);
                targets[agent] = place->at.position() +
                                 rotate_yaw(local_grasp(obj, st.held->offset),
                                            normalize_yaw(place->at.yaw)) +
                                 Vec3{0, 0, kPlaceHover};
            } else if (const auto* move = std::get_if<MoveAction>(&action)) {
                targets[agent] = move->to.position();
            } else if (const auto* twist = std::get_if<TwistAction>(&action)) {
                if (!st.held)
                    return fail(GraspErrorFailure{agent, "", "twist while holding nothing"},
                                int(s), 0, int(s));
                const auto hs = holders_of(sim, st.held->object_id);
                if (hs.size() == 2) {
                    // Dual grasp: the end effector orbits the grasp midpoint.
                    const Vec3 other_ee =
                        forward_kinematics(task.arm(hs[0].first == agent ? hs[1].first
                                                                         : hs[0].first),
                                           sim.arm_states.at(hs[0].first == agent ? hs[1].first
                                                                                  : hs[0].first)
                                               .joints)
                            .position();
                    const Vec3 mid = (current_ee + other_ee) * 0.5;
                    targets[agent] =
                        mid + rotate_yaw(current_ee - mid, twist->degrees * kPi / 180.0);
                } else {
                    targets[agent] = std::nullopt;  // object rotates about the fixed grasp
                }
            } else {
                targets[agent] = std::nullopt;  // OPEN / CLOSE / WAIT
            }
        }

        // IK + per-agent interpolation.
        std::map<std::string, std::vector<Waypoint>> raw;
        std::size_t max_len = 1;
        for (const auto& [agent, target] : targets) {
            const ArmModel& arm = task.arm(agent);
            const JointConfig from = sim.arm_states.at(agent).joints;
            if (!target) {
                raw[agent] = {Waypoint{from, forward_kinematics(arm, from)}};
                continue;
            }
            const auto ik = inverse_kinematics(arm, *target);
            if (const auto* f = std::get_if<IkFailure>(&ik)) {
                return fail(IkInfeasibleFailure{
                                agent, Pose{target->x, target->y, target->z, 0.0}, f->reason},
                            int(s), 0, int(s));
            }
            raw[agent] = interpolate(from, std::get<JointConfig>(ik), arm);
            max_len = std::max(max_len, raw[agent].size());
        }

        std::map<std::string, std::vector<Waypoint>> swept;
        for (const auto& [agent, wps] : raw)
            swept[agent] = resample(wps, max_len, task.arm(agent));

        // Collision/constraint sweep in lockstep.
        ExclusionSet excluded;
        for (const auto& [agent, st] : sim.arm_states) {
            if (st.held) excluded.insert(ordered_pair(agent, st.held->object_id));
        }
        for (const auto& [agent, action] : actions) {
            if (const auto* pick = std::get_if<PickAction>(&action))
                excluded.insert(ordered_pair(agent, pick->object_id));
        }

        for (std::size_t w = 0; w < max_len; ++w) {
            std::map<std::string, Vec3> ee;
            std::vector<PlacedShape> shapes;
            for (const auto& [agent, wps] : swept) {
                const ArmPoints pts = arm_points(task.arm(agent), wps[w].config);
                ee[agent] = pts.ee;
                const double r = task.arm(agent).capsule_radius;
                shapes.push_back({agent, Capsule{pts.shoulder, pts.elbow, r}});
                shapes.push_back({agent, Capsule{pts.elbow, pts.ee, r}});
            }
            // Arms not named in the plan hold still but still occupy space.
            for (const auto& [agent, st] : sim.arm_states) {
                if (swept.count(agent)) continue;
                const ArmPoints pts = arm_points(task.arm(agent), st.joints);
                ee[agent] = pts.ee;
                const double r = task.arm(agent).capsule_radius;
                shapes.push_back({agent, Capsule{pts.shoulder, pts.elbow, r}});
                shapes.push_back({agent, Capsule{pts.elbow, pts.ee, r}});
            }

            for (const auto& [obj_id, obj] : sim.objects) {
                const auto hs = holders_of(sim, obj_id);
                SceneObject placed = obj;
                if (!hs.empty()) placed.pose = held_pose(obj, hs, ee);
                for (const Capsule& c : object_capsules(placed))
                    shapes.push_back({obj_id, c});

                if (obj.kind == ObjectKind::Rope && hs.size() == 2) {
                    const double span = hs[1].second - hs[0].second;
                    const double sep = distance(ee.at(hs[0].first), ee.at(hs[1].first));
                    if (sep > span + kRopeSlack)
                        return fail(RopeOverstretchFailure{sep, span + kRopeSlack}, int(s),
                                    int(w), int(s));
                }
            }

            if (auto hit = first_collision(shapes, excluded)) {
                return fail(CollisionFailure{hit->a, hit->b,
                                             Pose{hit->position.x, hit->position.y,
                                                  hit->position.z, 0.0}},
                            int(s), int(w), int(s));
            }
        }

        for (const auto& [agent, wps] : swept)
            result.trajectories[agent].steps.push_back(wps);
        auto [next, _] = apply_joint_step(sim, sim_task, actions, swept);
        sim = std::move(next);
    }

    result.report.ok = true;
    result.report.checked_steps = int(steps);
    return result;
}

}  // namespace metaplan
