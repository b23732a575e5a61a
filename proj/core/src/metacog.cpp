#include "metaplan/metacog.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "metaplan/errors.hpp"
#include "metaplan/kinematics.hpp"

namespace metaplan {

using nlohmann::json;

namespace {

std::string format3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

std::string render_meta(const MetaInput& input) {
    struct Visitor {
        std::string operator()(const ConstructionInput& c) const {
            std::string out = "stage: construction\n" + c.instruction + "\n";
            for (const Exemplar& e : c.exemplars) {
                out += "exemplar " + e.exemplar_id + ": " + e.task_summary + "\n" +
                       e.demonstration;
                if (out.back() != '\n') out += '\n';
            }
            return out;
        }
        std::string operator()(const InferenceInput& i) const {
            std::string out = "stage: inference\n" + i.attention_cues + "\n";
            if (i.retrieved.empty()) {
                out += "no retrieved skills; plan from the observations alone\n";
                return out;
            }
            out += "retrieved skills:\n";
            for (const RetrievedCluster& r : i.retrieved) {
                out += "- " + r.cluster.canonical_name + " (match " + format3(r.score) + ")\n";
                for (const Exemplar& e : r.exemplars) {
                    out += "  exemplar " + e.exemplar_id + ": " + e.task_summary + "\n";
                    std::istringstream demo(e.demonstration);
                    std::string line;
                    while (std::getline(demo, line)) out += "    " + line + "\n";
                }
            }
            return out;
        }
        std::string operator()(const ReflectionInput& r) const {
            std::string out =
                "stage: reflection (attempt " + std::to_string(r.attempt_index) + ")\n";
            out += "validation failure: " + failure_to_json(r.failure) + "\n";
            if (!r.suspected_skills.empty()) {
                out += "suspected skill clusters:";
                for (const auto& s : r.suspected_skills) out += " " + s;
                out += "\n";
            }
            out += "rejected plan:\n" + r.prior_plan;
            if (out.back() != '\n') out += '\n';
            out += "Reason about which skills were missing or misapplied and produce a "
                   "corrected joint plan.\n";
            return out;
        }
    };
    return std::visit(Visitor{}, input);
}

EpisodeOptions options_for_variant(const std::string& variant) {
    if (variant == "reflex") return {true, true, false, false};
    if (variant == "reflex_no_reflection") return {false, true, false, false};
    if (variant == "no_metacog") return {false, false, false, false};
    if (variant == "central_plan") return {false, false, true, false};
    throw SchemaError("variant", "unknown variant '" + variant + "'");
}

// -- Episode result serialization ----------------------------------------------

namespace {

json failure_as_json(const FailureFeedback& f) { return json::parse(failure_to_json(f)); }

FailureFeedback failure_from_json(const json& j) {
    FailureFeedback f;
    f.step_index = j.at("step_index").get<int>();
    f.waypoint_index = j.at("waypoint_index").get<int>();
    const std::string nature = j.at("nature").get<std::string>();
    if (nature == "collision") {
        const auto& p = j.at("position");
        f.nature = CollisionFailure{j.at("a").get<std::string>(), j.at("b").get<std::string>(),
                                    Pose{p[0].get<double>(), p[1].get<double>(),
                                         p[2].get<double>(), 0.0}};
    } else if (nature == "ik_infeasible") {
        const auto& t = j.at("target");
        f.nature = IkInfeasibleFailure{
            j.at("agent_id").get<std::string>(),
            Pose{t[0].get<double>(), t[1].get<double>(), t[2].get<double>(), t[3].get<double>()},
            j.at("reason").get<std::string>() == "joint_limit" ? IkReason::JointLimit
                                                               : IkReason::OutOfReach};
    } else if (nature == "rope_overstretch") {
        f.nature = RopeOverstretchFailure{j.at("length").get<double>(), j.at("max").get<double>()};
    } else if (nature == "grasp_error") {
        f.nature = GraspErrorFailure{j.at("agent_id").get<std::string>(),
                                     j.at("object_id").get<std::string>(),
                                     j.at("reason").get<std::string>()};
    } else {
        throw SchemaError("failure.nature", "unknown nature '" + nature + "'");
    }
    return f;
}

}  // namespace

std::string episode_result_to_json(const EpisodeResult& result) {
    json doc;
    doc["task_id"] = result.task_id;
    doc["success"] = result.success;
    doc["env_steps"] = result.env_steps;
    doc["replan_attempts"] = result.replan_attempts;
    doc["seed"] = result.seed;
    doc["transcript_path"] = result.transcript_path;
    doc["error"] = result.error;
    doc["reflections"] = json::array();
    for (const ReflectionRecord& r : result.reflections) {
        doc["reflections"].push_back({{"attempt_index", r.attempt_index},
                                      {"failure", failure_as_json(r.failure)},
                                      {"regenerated_plan_valid", r.regenerated_plan_valid},
                                      {"suspected_skills", r.suspected_skills}});
    }
    return doc.dump();
}

EpisodeResult episode_result_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError("episode_result", std::string("invalid JSON: ") + e.what());
    }
    EpisodeResult result;
    try {
        result.task_id = doc.at("task_id").get<std::string>();
        result.success = doc.at("success").get<bool>();
        result.env_steps = doc.at("env_steps").get<int>();
        result.replan_attempts = doc.at("replan_attempts").get<int>();
        result.seed = doc.at("seed").get<std::uint64_t>();
        result.transcript_path = doc.value("transcript_path", std::string());
        result.error = doc.value("error", std::string());
        for (const auto& r : doc.at("reflections")) {
            ReflectionRecord rec;
            rec.attempt_index = r.at("attempt_index").get<int>();
            rec.failure = failure_from_json(r.at("failure"));
            rec.regenerated_plan_valid = r.at("regenerated_plan_valid").get<bool>();
            for (const auto& s : r.at("suspected_skills"))
                rec.suspected_skills.push_back(s.get<std::string>());
            result.reflections.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw SchemaError("episode_result", std::string("field: ") + e.what());
    }
    return result;
}

// -- Plan inference -----------------------------------------------------------------

namespace {

std::string render_central_prompt(const TaskSpec& task,
                                  const std::map<std::string, Observation>& observations,
                                  const MetaInput& meta) {
    std::string prompt;
    for (const auto& [agent, obs] : observations) {
        auto goal_it = task.agent_goals.find(agent);
        const std::string goal = goal_it == task.agent_goals.end() ? "" : goal_it->second;
        prompt += "GOAL " + agent + "\n" + goal + "\n\n";
        prompt += "OBSERVATION " + agent + "\n" + render_observation(obs) + "\n";
    }
    prompt += "META\n" + render_meta(meta) + "\n";
    prompt += "FORMAT\n" + grammar_reminder();
    return prompt;
}

}  // namespace

JointPlan infer_plan(const TaskSpec& task, const std::map<std::string, Observation>& observations,
                     LlmBackend& backend, const MetaInput& meta) {
    std::string prompt = render_central_prompt(task, observations, meta);
    std::string last_error;
    for (int attempt = 0; attempt < 3; ++attempt) {
        const std::string response = backend.complete({{"user", prompt}});
        try {
            return parse_plan(response);
        } catch (const ParseError& e) {
            last_error = e.what();
        } catch (const UnknownVerb& e) {
            last_error = e.what();
        } catch (const DuplicateAgent& e) {
            last_error = e.what();
        }
        prompt += "\nPARSE ERROR: " + last_error + "\nRespond again with only valid PLAN lines.\n";
    }
    throw PlanSynthesisError("no parseable plan after 3 attempts: " + last_error);
}

// -- Episode loop ----------------------------------------------------------------------

namespace {

std::string scene_snapshot_text(const WorldState& world) {
    std::string out;
    for (const auto& [id, obj] : world.objects) {
        out += id + " " + to_string(obj.kind) + " at (" + format3(obj.pose.x) + "," +
               format3(obj.pose.y) + "," + format3(obj.pose.z) + "," + format3(obj.pose.yaw) +
               ")\n";
    }
    return out;
}

std::string failure_query_tokens(const FailureNature& nature) {
    struct Visitor {
        std::string operator()(const CollisionFailure& c) const {
            return "collision between " + c.a + " and " + c.b + " clearance spacing";
        }
        std::string operator()(const IkInfeasibleFailure& f) const {
            return std::string("ik infeasible ") + (f.reason == IkReason::OutOfReach
                                                        ? "out of reach spatial reasoning"
                                                        : "joint limit spatial reasoning");
        }
        std::string operator()(const RopeOverstretchFailure&) const {
            return "rope overstretch grasp distance maintenance";
        }
        std::string operator()(const GraspErrorFailure& g) const {
            return "grasp error " + g.reason;
        }
    };
    return std::visit(Visitor{}, nature);
}

}  // namespace

EpisodeResult run_episode(const TaskSpec& task, SkillLibrary& library, LlmBackend& backend,
                          const EpisodeOptions& options) {
    EpisodeResult result;
    result.task_id = task.task_id;
    result.seed = task.seed;

    try {
        WorldState world = reset(task);

        std::string query_base = task.task_id;
        for (const auto& [_, goal] : task.agent_goals) query_base += " " + goal;

        auto retrieve = [&](const std::string& query) -> std::vector<RetrievedCluster> {
            if (!options.retrieval_enabled || library.empty()) return {};
            return library.retrieve(query);
        };

        const std::string cues =
            "Reason about which retrieved modular skills apply to this task; coordinate "
            "all arms step by step and leave clearance between them.";

        std::vector<RetrievedCluster> retrieved = retrieve(query_base);
        MetaInput meta = InferenceInput{cues, retrieved};

        // Set when the previous plan was a reflection regeneration whose
        // validity is recorded once the next validation verdict is known.
        bool pending_reflection = false;
        ReflectionRecord pending;

        JointPlan successful_plan;
        bool done = false;

        while (true) {
            std::map<std::string, Observation> observations;
            for (const auto& arm : task.arms) {
                observations[arm.agent_id] = options.central_full_state
                                                 ? observe_full(world, task, arm.agent_id)
                                                 : observe(world, task, arm.agent_id);
            }

            backend.note_stage(std::holds_alternative<ReflectionInput>(meta) ? "reflection"
                                                                             : "inference");
            JointPlan plan = infer_plan(task, observations, backend, meta);
            ValidationResult vres = validate_joint_plan(world, task, plan);

            if (pending_reflection) {
                pending.regenerated_plan_valid = vres.report.ok;
                result.reflections.push_back(pending);
                pending_reflection = false;
            }

            if (!vres.report.ok) {
                if (!options.reflection_enabled ||
                    result.replan_attempts >= task.max_replans) {
                    return result;  // failure
                }
                ++result.replan_attempts;
                const FailureFeedback failure = *vres.report.failure;

                std::vector<std::string> suspected;
                for (const RetrievedCluster& r : retrieved)
                    suspected.push_back(r.cluster.cluster_id);
                retrieved =
                    retrieve(query_base + " " + failure_query_tokens(failure.nature));

                pending = ReflectionRecord{result.replan_attempts, failure, false, suspected};
                pending_reflection = true;
                meta = ReflectionInput{failure, suspected, serialize_plan(plan),
                                       result.replan_attempts};
                continue;
            }

            // Execute the validated plan step by step.
            const std::size_t steps = plan.length();
            for (std::size_t s = 0; s < steps && !done; ++s) {
                if (result.env_steps >= task.max_env_steps) break;
                std::map<std::string, Action> actions;
                std::map<std::string, std::vector<Waypoint>> step_traj;
                for (const auto& [agent, ap] : plan.plans) {
                    actions[agent] = s < ap.actions.size() ? ap.actions[s] : Action{WaitAction{}};
                    const Trajectory& traj = vres.trajectories.at(agent);
                    if (s < traj.steps.size()) step_traj[agent] = traj.steps[s];
                }
                auto [next, outcome] = apply_joint_step(world, task, actions, step_traj);
                world = std::move(next);
                ++result.env_steps;
                done = outcome.done;
            }

            if (done) {
                result.success = true;
                successful_plan = plan;
                break;
            }
            if (result.env_steps >= task.max_env_steps) return result;  // step cap

            // The plan ran out without reaching the goal; infer again from
            // the new state (this is not a replan).
            meta = InferenceInput{cues, retrieved};
        }

        if (result.success && !options.freeze_library) {
            Exemplar exemplar;
            exemplar.exemplar_id = task.task_id + "-seed" + std::to_string(task.seed);
            std::string summary = task.task_id + ":";
            for (const auto& [_, goal] : task.agent_goals) summary += " " + goal;
            exemplar.task_summary = summary;
            exemplar.scene_snapshot = scene_snapshot_text(reset(task));
            exemplar.demonstration = serialize_plan(successful_plan);
            exemplar.source_task = task.task_id;
            exemplar.outcome_success = true;
            library.add_exemplar(exemplar, {});
        }
    } catch (const std::exception& e) {
        result.success = false;
        result.error = e.what();
    }
    return result;
}

}  // namespace metaplan
