#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "metaplan/llm.hpp"
#include "metaplan/plan.hpp"
#include "metaplan/skills.hpp"
#include "metaplan/validate.hpp"
#include "metaplan/world.hpp"

namespace metaplan {

// -- Guidance input (the per-prompt META section) ------------------------------

struct ConstructionInput {
    std::vector<Exemplar> exemplars;
    std::string instruction;
};

struct InferenceInput {
    std::string attention_cues;
    std::vector<RetrievedCluster> retrieved;
};

struct ReflectionInput {
    FailureFeedback failure;
    std::vector<std::string> suspected_skills;  // cluster ids from the failed retrieval set
    std::string prior_plan;                     // serialized joint plan
    int attempt_index = 1;
};

using MetaInput = std::variant<ConstructionInput, InferenceInput, ReflectionInput>;

/// Deterministic text rendering of the META section.
std::string render_meta(const MetaInput& input);

// -- Episode records ------------------------------------------------------------

struct ReflectionRecord {
    int attempt_index = 0;
    FailureFeedback failure;
    bool regenerated_plan_valid = false;
    std::vector<std::string> suspected_skills;
    bool operator==(const ReflectionRecord&) const = default;
};

struct EpisodeResult {
    std::string task_id;
    bool success = false;
    int env_steps = 0;
    int replan_attempts = 0;
    std::vector<ReflectionRecord> reflections;
    std::string transcript_path;
    std::uint64_t seed = 0;
    std::string error;  // infrastructure annotation, empty on clean episodes

    bool operator==(const EpisodeResult&) const = default;
};

std::string episode_result_to_json(const EpisodeResult& result);
EpisodeResult episode_result_from_json(const std::string& text);

struct EpisodeOptions {
    bool reflection_enabled = true;
    bool retrieval_enabled = true;
    bool central_full_state = false;
    bool freeze_library = false;
};

/// Maps a benchmark variant name to its episode options.
EpisodeOptions options_for_variant(const std::string& variant);

// -- The loop ---------------------------------------------------------------------

/// One central prompt carrying every agent's GOAL and OBSERVATION, one META
/// section, and the grammar reminder. Re-prompts up to twice on parse
/// failures (appending the parse error), then throws PlanSynthesisError.
JointPlan infer_plan(const TaskSpec& task, const std::map<std::string, Observation>& observations,
                     LlmBackend& backend, const MetaInput& meta);

/// observe -> infer -> validate -> execute, with reflection-driven replans on
/// validation failure. Infrastructure errors surface as status=failure with
/// an error annotation, never as exceptions.
EpisodeResult run_episode(const TaskSpec& task, SkillLibrary& library, LlmBackend& backend,
                          const EpisodeOptions& options);

}  // namespace metaplan
