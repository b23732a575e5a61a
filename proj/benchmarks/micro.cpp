// Microbenchmarks for the hot paths of the planning loop: kinematics,
// narrow-phase collision, plan parsing, and full joint-plan validation.

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "metaplan/geometry.hpp"
#include "metaplan/kinematics.hpp"
#include "metaplan/plan.hpp"
#include "metaplan/validate.hpp"
#include "metaplan/world.hpp"

namespace {

using namespace metaplan;

ArmModel bench_arm() {
    ArmModel arm;
    arm.agent_id = "bench";
    arm.base = Pose{0.3, -0.2, 0.1, 0.7};
    arm.link_lengths = {0.52, 0.47};
    arm.joint_limits = {{{-kPi, kPi}, {-1.9, 1.9}, {-3.0, 3.0}}};
    arm.capsule_radius = 0.04;
    arm.reachable_radius = 0.99;
    return arm;
}

void bm_forward_kinematics(benchmark::State& state) {
    const ArmModel arm = bench_arm();
    const JointConfig q{0.8, 0.4, -1.1};
    for (auto _ : state) benchmark::DoNotOptimize(forward_kinematics(arm, q));
}
BENCHMARK(bm_forward_kinematics);

void bm_inverse_kinematics(benchmark::State& state) {
    const ArmModel arm = bench_arm();
    const Vec3 target{0.7, 0.3, 0.4};
    for (auto _ : state) benchmark::DoNotOptimize(inverse_kinematics(arm, target));
}
BENCHMARK(bm_inverse_kinematics);

void bm_interpolate(benchmark::State& state) {
    const ArmModel arm = bench_arm();
    const JointConfig from{0.0, 0.2, -0.4};
    const JointConfig to{2.4, -1.1, 1.8};
    for (auto _ : state) benchmark::DoNotOptimize(interpolate(from, to, arm));
}
BENCHMARK(bm_interpolate);

void bm_check_collision(benchmark::State& state) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    std::vector<PlacedShape> shapes;
    for (int i = 0; i < int(state.range(0)); ++i) {
        shapes.push_back({"entity_" + std::to_string(i),
                          Capsule{{coord(rng), coord(rng), coord(rng)},
                                  {coord(rng), coord(rng), coord(rng)},
                                  0.02}});
    }
    for (auto _ : state) benchmark::DoNotOptimize(check_collision(shapes));
}
BENCHMARK(bm_check_collision)->Arg(8)->Arg(32);

void bm_parse_plan(benchmark::State& state) {
    const std::string text =
        "PLAN alice: PICK rope OFFSET 0.15 -> MOVE TO (-0.25,0.45,0.3) -> TWIST 90 "
        "-> PLACE rope AT (0.35,0.5,0.12,1.5708)\n"
        "PLAN bob: WAIT -> WAIT -> WAIT -> WAIT\n";
    for (auto _ : state) benchmark::DoNotOptimize(parse_plan(text));
}
BENCHMARK(bm_parse_plan);

void bm_validate_joint_plan(benchmark::State& state) {
    const TaskSpec task = load_task_file(std::string(METAPLAN_TASK_DIR) + "/move_rope.json");
    const WorldState world = reset(task);
    const JointPlan plan = parse_plan(
        "PLAN alice: PICK rope OFFSET 0.15 -> MOVE TO (-0.25,0.45,0.3) -> TWIST 90 "
        "-> PLACE rope AT (0.35,0.5,0.12,1.5708)\n"
        "PLAN bob: WAIT -> WAIT -> WAIT -> WAIT\n");
    for (auto _ : state) benchmark::DoNotOptimize(validate_joint_plan(world, task, plan));
}
BENCHMARK(bm_validate_joint_plan);

}  // namespace

BENCHMARK_MAIN();
