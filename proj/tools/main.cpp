#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "metaplan/bench.hpp"
#include "metaplan/errors.hpp"
#include "metaplan/metacog.hpp"

using namespace metaplan;
using nlohmann::json;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitTaskFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInfrastructure = 3;

std::string read_file_or_usage(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError(std::string(what) + " not found: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

TaskSpec load_task_or_usage(const std::string& path) {
    return load_task(read_file_or_usage(path, "task file"));
}

SkillLibrary load_library(const std::string& path) {
    if (path.empty()) return SkillLibrary{};
    return SkillLibrary::from_json_text(read_file_or_usage(path, "library file"));
}

std::string expand_backend_spec(const std::string& spec, const std::string& task_id) {
    std::string out = spec;
    const std::string token = "{task}";
    for (std::size_t pos; (pos = out.find(token)) != std::string::npos;)
        out.replace(pos, token.size(), task_id);
    return out;
}

void print_result(const EpisodeResult& result, bool as_json) {
    if (as_json) {
        std::cout << episode_result_to_json(result) << "\n";
        return;
    }
    std::cout << "task: " << result.task_id << "\n"
              << "success: " << (result.success ? "yes" : "no") << "\n"
              << "env_steps: " << result.env_steps << "\n"
              << "replan_attempts: " << result.replan_attempts << "\n"
              << "reflections: " << result.reflections.size() << "\n";
    if (!result.error.empty()) std::cout << "error: " << result.error << "\n";
    if (!result.transcript_path.empty())
        std::cout << "transcript: " << result.transcript_path << "\n";
}

int run_one(const std::string& task_file, const std::string& backend_spec,
            const std::string& library_file, const std::string& variant,
            const std::string& transcript, std::uint64_t seed, bool has_seed, bool as_json) {
    TaskSpec task = load_task_or_usage(task_file);
    if (has_seed) task.seed = seed;
    SkillLibrary library = load_library(library_file);

    std::unique_ptr<LlmBackend> backend =
        make_backend(expand_backend_spec(backend_spec, task.task_id));
    std::string transcript_path = transcript;
    if (transcript_path.empty() && backend_spec.rfind("replay:", 0) != 0) {
        transcript_path =
            (std::filesystem::path(task_file).stem().string()) + ".transcript.jsonl";
    }
    if (!transcript_path.empty())
        backend = std::make_unique<RecordingBackend>(std::move(backend), transcript_path);

    EpisodeResult result =
        run_episode(task, library, *backend, options_for_variant(variant));
    result.transcript_path = transcript_path;
    print_result(result, as_json);
    if (!result.error.empty()) return kExitInfrastructure;
    return result.success ? kExitSuccess : kExitTaskFailure;
}

int run_bench_cmd(const std::vector<std::string>& task_files, const std::string& variant,
                  int rounds, std::uint64_t base_seed, const std::string& backend_spec,
                  const std::string& out_dir, bool freeze) {
    RunConfig config;
    config.variant = variant;
    config.rounds = rounds;
    config.base_seed = base_seed;
    config.freeze_library = freeze;
    config.output_dir = out_dir;

    std::map<std::string, TaskSpec> tasks;
    for (const auto& file : task_files) {
        TaskSpec task = load_task_or_usage(file);
        config.tasks.push_back(task.task_id);
        tasks[task.task_id] = std::move(task);
    }

    auto factory = [&](const std::string& task_id, int /*round*/) {
        return make_backend(expand_backend_spec(backend_spec, task_id));
    };
    BenchOutput output = run_bench(config, tasks, factory);
    emit_report(output, out_dir);

    bool all_clean = true;
    for (const auto& m : output.summary) {
        char steps[32] = "-";
        if (m.avg_env_steps) std::snprintf(steps, sizeof(steps), "%.1f", *m.avg_env_steps);
        std::printf("%s %s: success %.2f +/- %.2f, steps %s, replans %.1f\n",
                    m.task_id.c_str(), m.variant.c_str(), round_to(m.success_rate, 2),
                    round_to(m.success_stderr, 2), steps, round_to(m.avg_replans, 1));
        all_clean = all_clean && m.successes == m.n_rounds;
    }
    std::cout << "reports written to " << out_dir << "\n";
    return all_clean ? kExitSuccess : kExitTaskFailure;
}

int validate_plan_cmd(const std::string& task_file, const std::string& plan_file,
                      std::uint64_t seed, bool has_seed, bool as_json) {
    TaskSpec task = load_task_or_usage(task_file);
    if (has_seed) task.seed = seed;
    const std::string plan_text = read_file_or_usage(plan_file, "plan file");
    JointPlan plan;
    try {
        plan = parse_plan(plan_text);
    } catch (const std::exception& e) {
        std::cerr << "plan parse error: " << e.what() << "\n";
        return kExitUsage;
    }
    WorldState world = reset(task);
    ValidationResult res = validate_joint_plan(world, task, plan);
    if (as_json) {
        json doc;
        doc["ok"] = res.report.ok;
        if (res.report.failure) doc["failure"] = json::parse(failure_to_json(*res.report.failure));
        std::cout << doc.dump() << "\n";
    } else if (res.report.ok) {
        std::cout << "plan is valid\n";
    } else {
        std::cout << "plan rejected: " << failure_to_json(*res.report.failure) << "\n";
    }
    return res.report.ok ? kExitSuccess : kExitTaskFailure;
}

int skills_build_cmd(const std::string& library_file, const std::string& backend_spec,
                     const std::string& out_file) {
    SkillLibrary source = load_library(library_file);
    SkillLibrary built;
    for (const auto& [_, exemplar] : source.exemplars()) {
        auto backend = make_backend(expand_backend_spec(backend_spec, exemplar.source_task));
        built.add_exemplar(exemplar, extract_skills(exemplar, *backend));
    }
    built.save(out_file.empty() ? library_file : out_file);
    std::cout << "library: " << built.exemplars().size() << " exemplars, "
              << built.skills().size() << " skills, " << built.clusters().size()
              << " clusters\n";
    return kExitSuccess;
}

int skills_show_cmd(const std::string& library_file, bool as_json) {
    SkillLibrary library = load_library(library_file);
    if (as_json) {
        std::cout << library.to_json_text();
        return kExitSuccess;
    }
    for (const auto& cluster : library.clusters()) {
        std::cout << cluster.cluster_id << " " << cluster.canonical_name << "\n";
        for (const auto& member : cluster.members) {
            const auto& s = library.skills().at(member);
            std::cout << "  " << s.skill_id << " " << s.name << ": " << s.description << "\n";
        }
    }
    std::cout << library.exemplars().size() << " exemplars, " << library.skills().size()
              << " skills, " << library.clusters().size() << " clusters\n";
    return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"metaplan: multi-robot metacognitive planning loop"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "machine-readable JSON output");

    // run
    auto* run = app.add_subcommand("run", "run one episode of a task");
    std::string task_file, backend_spec = "scripted:fixtures/{task}.json", library_file;
    std::string variant = "reflex", transcript;
    std::uint64_t seed = 0;
    run->add_option("task", task_file, "task JSON file")->required();
    run->add_option("--backend", backend_spec, "backend spec kind:detail");
    run->add_option("--library", library_file, "skill library JSON");
    run->add_option("--variant", variant, "reflex|reflex_no_reflection|no_metacog|central_plan");
    run->add_option("--transcript", transcript, "transcript output path");
    auto* seed_opt = run->add_option("--seed", seed, "episode seed override");

    // bench
    auto* bench = app.add_subcommand("bench", "run the seeded benchmark");
    std::vector<std::string> bench_tasks;
    std::string bench_variant = "reflex", bench_backend = "scripted:fixtures/{task}.json";
    std::string out_dir = "results";
    int rounds = 20;
    std::uint64_t base_seed = 0;
    bool freeze = false;
    bench->add_option("--tasks", bench_tasks, "task JSON files")->required();
    bench->add_option("--variant", bench_variant, "benchmark variant");
    bench->add_option("--rounds", rounds, "rounds per task");
    bench->add_option("--base-seed", base_seed, "seed of round 0");
    bench->add_option("--backend", bench_backend, "backend spec; {task} expands to the task id");
    bench->add_option("--out", out_dir, "report output directory");
    bench->add_flag("--freeze-library", freeze, "do not ingest exemplars");

    // validate-plan
    auto* vp = app.add_subcommand("validate-plan", "validate a plan file against a task");
    std::string vp_task, vp_plan;
    vp->add_option("task", vp_task, "task JSON file")->required();
    vp->add_option("plan", vp_plan, "plan text file")->required();
    std::uint64_t vp_seed = 0;
    auto* vp_seed_opt = vp->add_option("--seed", vp_seed, "task seed override");

    // skills-build
    auto* sb = app.add_subcommand("skills-build", "extract and cluster skills from exemplars");
    std::string sb_library, sb_backend, sb_out;
    sb->add_option("--library", sb_library, "library JSON with exemplars")->required();
    sb->add_option("--backend", sb_backend, "backend spec for extraction")->required();
    sb->add_option("--out", sb_out, "output library path (default: in place)");

    // skills-show
    auto* ss = app.add_subcommand("skills-show", "print the skill library");
    std::string ss_library;
    ss->add_option("--library", ss_library, "library JSON file")->required();

    // replay
    auto* rp = app.add_subcommand("replay", "re-run an episode from a recorded transcript");
    std::string rp_task, rp_transcript, rp_library, rp_variant = "reflex";
    std::uint64_t rp_seed = 0;
    rp->add_option("task", rp_task, "task JSON file")->required();
    rp->add_option("transcript", rp_transcript, "recorded transcript JSONL")->required();
    rp->add_option("--library", rp_library, "skill library JSON");
    rp->add_option("--variant", rp_variant, "episode variant");
    auto* rp_seed_opt = rp->add_option("--seed", rp_seed, "episode seed override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitSuccess : kExitUsage;
    }

    try {
        if (run->parsed())
            return run_one(task_file, backend_spec, library_file, variant, transcript, seed,
                           seed_opt->count() > 0, as_json);
        if (bench->parsed())
            return run_bench_cmd(bench_tasks, bench_variant, rounds, base_seed, bench_backend,
                                 out_dir, freeze);
        if (vp->parsed())
            return validate_plan_cmd(vp_task, vp_plan, vp_seed, vp_seed_opt->count() > 0,
                                     as_json);
        if (sb->parsed()) return skills_build_cmd(sb_library, sb_backend, sb_out);
        if (ss->parsed()) return skills_show_cmd(ss_library, as_json);
        if (rp->parsed()) {
            TaskSpec task = load_task_or_usage(rp_task);
            if (rp_seed_opt->count() > 0) task.seed = rp_seed;
            SkillLibrary library = load_library(rp_library);
            auto backend =
                std::make_unique<ReplayBackend>(ReplayBackend::from_file(rp_transcript));
            EpisodeResult result =
                run_episode(task, library, *backend, options_for_variant(rp_variant));
            print_result(result, as_json);
            if (!result.error.empty()) return kExitInfrastructure;
            return result.success ? kExitSuccess : kExitTaskFailure;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const SchemaError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const BackendError& e) {
        std::cerr << e.what() << "\n";
        return kExitInfrastructure;
    } catch (const IoError& e) {
        std::cerr << e.what() << "\n";
        return kExitInfrastructure;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitInfrastructure;
    }
    return kExitUsage;
}
