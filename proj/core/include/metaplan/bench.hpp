#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metaplan/metacog.hpp"

namespace metaplan {

struct RunConfig {
    std::vector<std::string> tasks;  // task ids, resolved through task_files
    std::string variant = "reflex";  // reflex | reflex_no_reflection | no_metacog | central_plan
    int rounds = 20;
    std::uint64_t base_seed = 0;
    bool freeze_library = false;
    std::string output_dir;
};

struct TaskMetrics {
    std::string task_id;
    std::string variant;
    int n_rounds = 0;
    int successes = 0;
    double success_rate = 0.0;    // 2 decimals in reports
    double success_stderr = 0.0;  // binomial stderr sqrt(p(1-p)/n)
    std::optional<double> avg_env_steps;  // successes only; absent without one
    double avg_replans = 0.0;             // over all rounds
    std::optional<double> reflection_success_rate;  // absent without reflections
};

/// p = successes/n and the binomial standard error sqrt(p(1-p)/n).
std::pair<double, double> success_rate(const std::vector<EpisodeResult>& results);

/// Mean env_steps over successful rounds only; absent when none succeeded.
std::optional<double> avg_env_steps(const std::vector<EpisodeResult>& results);

/// Mean replan_attempts over every round, successes and failures alike.
double avg_replans(const std::vector<EpisodeResult>& results);

/// Valid regenerations / all reflection attempts, scoped to episodes that
/// ultimately succeeded; absent when those episodes hold no reflections.
std::optional<double> reflection_success_rate(const std::vector<EpisodeResult>& results);

/// Half-away-from-zero rounding used for report formatting.
double round_to(double v, int decimals);

using BackendFactory = std::function<std::unique_ptr<LlmBackend>(const std::string& task_id,
                                                                 int round)>;

struct BenchOutput {
    std::vector<EpisodeResult> raw;  // tasks x rounds, never dropped
    std::vector<TaskMetrics> summary;
};

/// Runs rounds x tasks episodes (per-round seed = base_seed + round) with a
/// fresh backend per episode and aggregates the four metrics per task.
BenchOutput run_bench(const RunConfig& config, const std::map<std::string, TaskSpec>& tasks,
                      const BackendFactory& make_episode_backend);

/// Writes metrics.json (full precision), metrics.csv, and report.md into
/// output_dir. Deterministic: re-emitting the same data is byte-identical.
void emit_report(const BenchOutput& output, const std::string& output_dir);

}  // namespace metaplan
