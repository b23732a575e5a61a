#include <doctest.h>

#include <random>

#include "metaplan/errors.hpp"
#include "metaplan/validate.hpp"

using namespace metaplan;

namespace {

std::string rope_task_json() {
    return R"({
      "task_id": "move_rope",
      "seed": 0,
      "agents": [
        {"id": "alice", "goal": "lift the rope",
         "arm": {"base": [-0.45, 0.35, 0.0, 3.14159], "link_lengths": [0.52, 0.47],
                 "joint_limits": [[-3.2, 3.2], [-1.9, 1.9], [-3.0, 3.0]],
                 "capsule_radius": 0.04, "reachable_radius": 0.99}},
        {"id": "bob", "goal": "lift the rope",
         "arm": {"base": [0.55, 0.35, 0.0, 0.0], "link_lengths": [0.5, 0.45],
                 "joint_limits": [[-3.2, 3.2], [-1.9, 1.9], [-3.0, 3.0]],
                 "capsule_radius": 0.04, "reachable_radius": 0.95}}
      ],
      "objects": [
        {"id": "rope", "kind": "rope", "pose": [-0.25, 0.45, 0.02, 0.0], "graspable": true,
         "geometry": {"shape": "capsule", "radius": 0.01, "p0": [0,0,0], "p1": [0.5,0,0]},
         "handles": [{"id": "left_end", "offset": 0.0}, {"id": "right_end", "offset": 0.5}]},
        {"id": "slot", "kind": "groove", "pose": [0.35, 0.8, 0.0, 1.5707963], "graspable": false,
         "geometry": {"shape": "box", "half_extents": [0.35, 0.05, 0.02]}}
      ],
      "success": {"variant": "rope_in_groove", "groove_id": "slot", "clearance_wall_id": "wall"}
    })";
}

}  // namespace

TEST_CASE("object_capsules: openings and surfaces have no collision volume") {
    SceneObject groove;
    groove.id = "slot";
    groove.kind = ObjectKind::Groove;
    groove.geometry.shape = GeometrySpec::Shape::Box;
    groove.geometry.half_extents = {0.35, 0.05, 0.02};
    CHECK(object_capsules(groove).empty());
    groove.kind = ObjectKind::Table;
    CHECK(object_capsules(groove).empty());
    groove.kind = ObjectKind::Wall;
    CHECK(!object_capsules(groove).empty());
}

TEST_CASE("object_capsules: sphere, capsule and box decompositions") {
    SceneObject cup;
    cup.id = "cup";
    cup.kind = ObjectKind::Cup;
    cup.geometry.shape = GeometrySpec::Shape::Sphere;
    cup.geometry.radius = 0.03;
    cup.pose = Pose{1, 2, 3, 0};
    auto caps = object_capsules(cup);
    REQUIRE(caps.size() == 1);
    CHECK(caps[0].a == caps[0].b);
    CHECK(caps[0].radius == doctest::Approx(0.03));

    SceneObject rope;
    rope.id = "rope";
    rope.kind = ObjectKind::Rope;
    rope.geometry.shape = GeometrySpec::Shape::Capsule;
    rope.geometry.radius = 0.01;
    rope.geometry.p0 = {0, 0, 0};
    rope.geometry.p1 = {0.5, 0, 0};
    rope.pose = Pose{0.1, 0.2, 0.02, kPi / 2};
    caps = object_capsules(rope);
    REQUIRE(caps.size() == 1);
    CHECK(distance(caps[0].a, {0.1, 0.2, 0.02}) < 1e-12);
    CHECK(distance(caps[0].b, {0.1, 0.7, 0.02}) < 1e-9);

    // A flat panel: x and z exceed the y half extent, so two crossed capsules
    // with the thin dimension as radius.
    SceneObject panel;
    panel.id = "panel";
    panel.kind = ObjectKind::Panel;
    panel.geometry.shape = GeometrySpec::Shape::Box;
    panel.geometry.half_extents = {0.4, 0.02, 0.25};
    panel.pose = Pose{0, 0.2, 0.25, 0};
    caps = object_capsules(panel);
    REQUIRE(caps.size() == 2);
    for (const auto& c : caps) CHECK(c.radius == doctest::Approx(0.02));
    CHECK(distance(caps[0].a, {-0.38, 0.2, 0.25}) < 1e-12);
    CHECK(distance(caps[0].b, {0.38, 0.2, 0.25}) < 1e-12);
    CHECK(distance(caps[1].a, {0, 0.2, 0.02}) < 1e-12);
    CHECK(distance(caps[1].b, {0, 0.2, 0.48}) < 1e-12);

    // A cube degenerates to a single ball.
    panel.geometry.half_extents = {0.1, 0.1, 0.1};
    caps = object_capsules(panel);
    REQUIRE(caps.size() == 1);
    CHECK(caps[0].a == caps[0].b);
}

TEST_CASE("check_collision basics") {
    std::vector<PlacedShape> shapes;
    shapes.push_back({"b_arm", Capsule{{0, 0, 0}, {1, 0, 0}, 0.05}});
    shapes.push_back({"a_arm", Capsule{{0.5, -0.5, 0}, {0.5, 0.5, 0}, 0.05}});
    auto hit = check_collision(shapes);
    REQUIRE(hit.has_value());
    CHECK(hit->a == "a_arm");  // pair reported in lexicographic order
    CHECK(hit->b == "b_arm");
    CHECK(hit->position.x == doctest::Approx(0.5));

    // Same entity never collides with itself.
    std::vector<PlacedShape> self;
    self.push_back({"arm", Capsule{{0, 0, 0}, {1, 0, 0}, 0.1}});
    self.push_back({"arm", Capsule{{0.5, -0.5, 0}, {0.5, 0.5, 0}, 0.1}});
    CHECK(!check_collision(self).has_value());

    // Separated shapes.
    std::vector<PlacedShape> apart;
    apart.push_back({"x", Capsule{{0, 0, 0}, {1, 0, 0}, 0.05}});
    apart.push_back({"y", Capsule{{0, 1, 0}, {1, 1, 0}, 0.05}});
    CHECK(!check_collision(apart).has_value());
}

TEST_CASE("check_collision: deterministic, symmetric, monotone in radius") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> r(0.01, 0.2);
    auto p = [&] { return Vec3{u(rng), u(rng), u(rng)}; };
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<PlacedShape> shapes;
        int n = 2 + int(rng() % 5);
        for (int i = 0; i < n; ++i)
            shapes.push_back({"e" + std::to_string(i), Capsule{p(), p(), r(rng)}});

        auto h1 = check_collision(shapes);
        auto h2 = check_collision(shapes);
        REQUIRE(h1.has_value() == h2.has_value());
        if (h1) {
            CHECK(h1->a == h2->a);
            CHECK(h1->b == h2->b);
            CHECK(h1->a < h1->b);
        }

        // Shuffling input order cannot change the reported pair.
        std::vector<PlacedShape> shuffled = shapes;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto h3 = check_collision(shuffled);
        REQUIRE(h1.has_value() == h3.has_value());
        if (h1) {
            CHECK(h1->a == h3->a);
            CHECK(h1->b == h3->b);
        }

        // Growing every radius can only create collisions, never remove them.
        std::vector<PlacedShape> fat = shapes;
        for (auto& s : fat) s.capsule.radius += 0.1;
        auto h4 = check_collision(fat);
        if (h1) CHECK(h4.has_value());
    }
}

TEST_CASE("failure feedback serializes to stable JSON") {
    FailureFeedback f;
    f.step_index = 2;
    f.waypoint_index = 7;
    f.nature = CollisionFailure{"alice", "wall", Pose{0.1, 0.2, 0.3, 0}};
    std::string j = failure_to_json(f);
    CHECK(j.find("\"nature\":\"collision\"") != std::string::npos);
    CHECK(j.find("\"a\":\"alice\"") != std::string::npos);
    CHECK(j.find("\"step_index\":2") != std::string::npos);
    CHECK(failure_to_json(f) == j);  // deterministic

    f.nature = IkInfeasibleFailure{"bob", Pose{9, 9, 9, 0}, IkReason::OutOfReach};
    CHECK(failure_to_json(f).find("out_of_reach") != std::string::npos);
    f.nature = RopeOverstretchFailure{0.55, 0.52};
    CHECK(failure_to_json(f).find("rope_overstretch") != std::string::npos);
    f.nature = GraspErrorFailure{"bob", "slot", "not graspable"};
    CHECK(failure_to_json(f).find("grasp_error") != std::string::npos);
}

TEST_CASE("validate_joint_plan: a simple feasible plan produces trajectories") {
    TaskSpec task = load_task(rope_task_json());
    WorldState world = reset(task);
    JointPlan plan = parse_plan(
        "PLAN alice: PICK rope HANDLE left_end -> MOVE TO (-0.25,0.45,0.3)\n"
        "PLAN bob: WAIT -> WAIT\n");
    ValidationResult res = validate_joint_plan(world, task, plan);
    CAPTURE(res.report.failure ? failure_to_json(*res.report.failure) : "none");
    REQUIRE(res.report.ok);
    CHECK(res.report.checked_steps == 2);
    REQUIRE(res.trajectories.count("alice") == 1);
    REQUIRE(res.trajectories.at("alice").steps.size() == 2);
    // Both agents' per-step waypoint lists have equal length (lockstep sweep).
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(res.trajectories.at("alice").steps[s].size() ==
              res.trajectories.at("bob").steps[s].size());
    }
    // The validator must not mutate the input world.
    CHECK(world == reset(task));
}

TEST_CASE("validate_joint_plan: unreachable target reports IK failure") {
    TaskSpec task = load_task(rope_task_json());
    WorldState world = reset(task);
    JointPlan plan = parse_plan("PLAN alice: MOVE TO (3,3,3)\nPLAN bob: WAIT\n");
    ValidationResult res = validate_joint_plan(world, task, plan);
    REQUIRE(!res.report.ok);
    REQUIRE(res.report.failure.has_value());
    const auto* ik = std::get_if<IkInfeasibleFailure>(&res.report.failure->nature);
    REQUIRE(ik != nullptr);
    CHECK(ik->agent_id == "alice");
    CHECK(res.report.failure->step_index == 0);
}

TEST_CASE("validate_joint_plan: grasp preconditions become grasp errors") {
    TaskSpec task = load_task(rope_task_json());
    WorldState world = reset(task);

    auto run = [&](const std::string& text) {
        ValidationResult res = validate_joint_plan(world, task, parse_plan(text));
        REQUIRE(!res.report.ok);
        return res.report.failure->nature;
    };

    auto nature = run("PLAN alice: PICK ghost\nPLAN bob: WAIT\n");
    CHECK(std::get<GraspErrorFailure>(nature).reason == "unknown object");
    nature = run("PLAN alice: PICK slot\nPLAN bob: WAIT\n");
    CHECK(std::get<GraspErrorFailure>(nature).reason == "not graspable");
    nature = run("PLAN alice: PICK rope HANDLE middle\nPLAN bob: WAIT\n");
    CHECK(std::get<GraspErrorFailure>(nature).reason.find("no handle") != std::string::npos);
    nature = run("PLAN alice: PICK rope OFFSET 2.5\nPLAN bob: WAIT\n");
    CHECK(std::get<GraspErrorFailure>(nature).reason.find("outside") != std::string::npos);
    nature = run("PLAN alice: PLACE rope AT (0,0,0)\nPLAN bob: WAIT\n");
    CHECK(std::get<GraspErrorFailure>(nature).reason == "not holding object");
    nature = run("PLAN alice: TWIST 10\nPLAN bob: WAIT\n");
    CHECK(std::get<GraspErrorFailure>(nature).reason.find("holding nothing") !=
          std::string::npos);
}

TEST_CASE("validate_joint_plan: pulling a dual-grasped rope apart overstretches") {
    TaskSpec task = load_task(rope_task_json());
    WorldState world = reset(task);
    JointPlan plan = parse_plan(
        "PLAN alice: PICK rope HANDLE left_end -> MOVE TO (-0.4,0.45,0.1)\n"
        "PLAN bob: PICK rope HANDLE right_end -> MOVE TO (0.4,0.45,0.1)\n");
    ValidationResult res = validate_joint_plan(world, task, plan);
    REQUIRE(!res.report.ok);
    const auto* stretch = std::get_if<RopeOverstretchFailure>(&res.report.failure->nature);
    REQUIRE(stretch != nullptr);
    CHECK(stretch->length > stretch->max);
    CHECK(res.report.failure->step_index == 1);
}

TEST_CASE("validate_joint_plan: crossing arms collide") {
    TaskSpec task = load_task(rope_task_json());
    WorldState world = reset(task);
    // Send each arm deep into the other's workspace at the same height.
    JointPlan plan = parse_plan(
        "PLAN alice: MOVE TO (0.5,0.35,0.1)\n"
        "PLAN bob: MOVE TO (-0.3,0.35,0.1)\n");
    ValidationResult res = validate_joint_plan(world, task, plan);
    REQUIRE(!res.report.ok);
    CAPTURE(failure_to_json(*res.report.failure));
    const auto* hit = std::get_if<CollisionFailure>(&res.report.failure->nature);
    REQUIRE(hit != nullptr);
    CHECK(hit->a == "alice");
    CHECK(hit->b == "bob");
}
