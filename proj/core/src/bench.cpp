#include "metaplan/bench.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "metaplan/errors.hpp"

namespace metaplan {

using nlohmann::json;

std::pair<double, double> success_rate(const std::vector<EpisodeResult>& results) {
    if (results.empty()) throw std::invalid_argument("success_rate of empty result set");
    const double n = double(results.size());
    double successes = 0;
    for (const auto& r : results) successes += r.success ? 1 : 0;
    const double p = successes / n;
    return {p, std::sqrt(p * (1.0 - p) / n)};
}

std::optional<double> avg_env_steps(const std::vector<EpisodeResult>& results) {
    double sum = 0;
    int n = 0;
    for (const auto& r : results) {
        if (r.success) {
            sum += r.env_steps;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

double avg_replans(const std::vector<EpisodeResult>& results) {
    if (results.empty()) throw std::invalid_argument("avg_replans of empty result set");
    double sum = 0;
    for (const auto& r : results) sum += r.replan_attempts;
    return sum / double(results.size());
}

std::optional<double> reflection_success_rate(const std::vector<EpisodeResult>& results) {
    int valid = 0, total = 0;
    for (const auto& r : results) {
        if (!r.success) continue;  // scoped to ultimately-successful rounds
        for (const auto& rec : r.reflections) {
            ++total;
            if (rec.regenerated_plan_valid) ++valid;
        }
    }
    if (total == 0) return std::nullopt;
    return double(valid) / double(total);
}

double round_to(double v, int decimals) {
    double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

BenchOutput run_bench(const RunConfig& config, const std::map<std::string, TaskSpec>& tasks,
                      const BackendFactory& make_episode_backend) {
    if (config.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    BenchOutput output;
    const EpisodeOptions options = [&] {
        EpisodeOptions o = options_for_variant(config.variant);
        o.freeze_library = o.freeze_library || config.freeze_library;
        return o;
    }();

    for (const std::string& task_id : config.tasks) {
        auto it = tasks.find(task_id);
        if (it == tasks.end()) throw UnknownTask(task_id);

        std::vector<EpisodeResult> rounds;
        SkillLibrary library;  // per-task library, grown across rounds unless frozen
        for (int round = 0; round < config.rounds; ++round) {
            TaskSpec task = it->second;
            task.seed = config.base_seed + std::uint64_t(round);
            EpisodeResult result;
            try {
                auto backend = make_episode_backend(task_id, round);
                result = run_episode(task, library, *backend, options);
            } catch (const std::exception& e) {
                // Infrastructure failure: recorded as a failed round, never dropped.
                result.task_id = task_id;
                result.seed = task.seed;
                result.success = false;
                result.error = e.what();
            }
            rounds.push_back(result);
            output.raw.push_back(std::move(result));
        }

        TaskMetrics m;
        m.task_id = task_id;
        m.variant = config.variant;
        m.n_rounds = config.rounds;
        auto [p, se] = success_rate(rounds);
        for (const auto& r : rounds) m.successes += r.success ? 1 : 0;
        m.success_rate = p;
        m.success_stderr = se;
        m.avg_env_steps = avg_env_steps(rounds);
        m.avg_replans = avg_replans(rounds);
        m.reflection_success_rate = reflection_success_rate(rounds);
        output.summary.push_back(std::move(m));
    }
    return output;
}

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, round_to(v, decimals));
    return buf;
}

}  // namespace

void emit_report(const BenchOutput& output, const std::string& output_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (ec) throw IoError("cannot create output dir: " + output_dir);

    // metrics.json — full precision plus the raw per-round results.
    json doc;
    doc["summary"] = json::array();
    for (const auto& m : output.summary) {
        json row;
        row["task"] = m.task_id;
        row["variant"] = m.variant;
        row["rounds"] = m.n_rounds;
        row["successes"] = m.successes;
        row["success_rate"] = m.success_rate;
        row["success_stderr"] = m.success_stderr;
        if (m.avg_env_steps) row["avg_env_steps"] = *m.avg_env_steps;
        row["avg_replans"] = m.avg_replans;
        if (m.reflection_success_rate)
            row["reflection_success_rate"] = *m.reflection_success_rate;
        doc["summary"].push_back(row);
    }
    doc["raw"] = json::array();
    for (const auto& r : output.raw) doc["raw"].push_back(json::parse(episode_result_to_json(r)));

    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream out(fs::path(output_dir) / name, std::ios::trunc);
        if (!out) throw IoError("cannot write " + name + " in " + output_dir);
        out << body;
    };
    write("metrics.json", doc.dump(2) + "\n");

    // metrics.csv — one row per task x variant, rounded like the report.
    std::string csv =
        "task,variant,rounds,success_rate,success_stderr,avg_env_steps,avg_replans,"
        "reflection_success_rate\n";
    for (const auto& m : output.summary) {
        csv += m.task_id + "," + m.variant + "," + std::to_string(m.n_rounds) + "," +
               fixed(m.success_rate, 2) + "," + fixed(m.success_stderr, 2) + "," +
               (m.avg_env_steps ? fixed(*m.avg_env_steps, 1) : "") + "," +
               fixed(m.avg_replans, 1) + "," +
               (m.reflection_success_rate ? fixed(*m.reflection_success_rate, 2) : "") + "\n";
    }
    write("metrics.csv", csv);

    // report.md — success ± stderr, then "steps, replans".
    std::string md = "| Task | Variant | Success | Steps, Replans | Reflection |\n";
    md += "| --- | --- | --- | --- | --- |\n";
    for (const auto& m : output.summary) {
        md += "| " + m.task_id + " | " + m.variant + " | " + fixed(m.success_rate, 2) + " ± " +
              fixed(m.success_stderr, 2) + " | " +
              (m.avg_env_steps ? fixed(*m.avg_env_steps, 1) : "—") + ", " +
              fixed(m.avg_replans, 1) + " | " +
              (m.reflection_success_rate ? fixed(*m.reflection_success_rate, 2) : "—") + " |\n";
    }
    write("report.md", md);
}

}  // namespace metaplan
