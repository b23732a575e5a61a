#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace metaplan {

class LlmBackend;  // llm.hpp

/// A stored record of a previously successful task: summary, scene snapshot,
/// and a one-shot demonstration plan in canonical text form.
struct Exemplar {
    std::string exemplar_id;
    std::string task_summary;
    std::string scene_snapshot;
    std::string demonstration;  // serialized joint plan
    std::string source_task;
    bool outcome_success = true;
    std::uint64_t sequence = 0;  // insertion order, newest = largest
    bool operator==(const Exemplar&) const = default;
};

struct SkillDescriptor {
    std::string skill_id;
    std::string name;  // snake_case
    std::string description;
    std::set<std::string> tokens;  // normalized from name + description
    std::vector<std::string> exemplar_ids;
    bool operator==(const SkillDescriptor&) const = default;
};

struct SkillCluster {
    std::string cluster_id;       // creation order: c000, c001, ...
    std::string canonical_name;   // lexicographically smallest member name
    std::vector<std::string> members;  // skill ids
    std::set<std::string> merged_tokens;
    bool operator==(const SkillCluster&) const = default;
};

/// Lowercase, split on underscores/whitespace/punctuation, drop stop words.
std::set<std::string> normalize_tokens(const std::string& text);

/// |a ∩ b| / |a ∪ b|; both empty -> 0.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Greedy single-link agglomeration: skills processed sorted by skill_id; a
/// skill joins the first cluster holding a member within `threshold`
/// similarity, else opens a new cluster. Deterministic by construction.
std::vector<SkillCluster> cluster_skills(std::vector<SkillDescriptor> skills, double threshold);

inline constexpr double kClusterThreshold = 0.5;
inline constexpr int kRetrievalTopK = 4;
inline constexpr int kExemplarsPerCluster = 2;

struct RetrievedCluster {
    SkillCluster cluster;
    double score = 0.0;
    std::vector<Exemplar> exemplars;  // up to kExemplarsPerCluster, newest first
};

/// Prompts the backend with the exemplar (construction stage) and parses
/// `SKILL <snake_case_name>: <description>` lines.
std::vector<SkillDescriptor> extract_skills(const Exemplar& exemplar, LlmBackend& backend);

class SkillLibrary {
  public:
    const std::map<std::string, Exemplar>& exemplars() const { return exemplars_; }
    const std::map<std::string, SkillDescriptor>& skills() const { return skills_; }
    const std::vector<SkillCluster>& clusters() const { return clusters_; }
    std::uint64_t version() const { return version_; }
    bool empty() const { return clusters_.empty(); }

    /// Stores the exemplar and merges the extracted skills into the cluster
    /// structure. No-op (version unchanged) when the exemplar_id is already
    /// present. Returns whether the library mutated.
    bool add_exemplar(const Exemplar& exemplar, std::vector<SkillDescriptor> extracted);

    /// Ranks clusters by token overlap with the query; top-k by
    /// (score desc, cluster_id asc), each with its most recent exemplars.
    std::vector<RetrievedCluster> retrieve(const std::string& query,
                                           int k = kRetrievalTopK) const;

    void save(const std::string& path) const;
    static SkillLibrary load(const std::string& path);
    static SkillLibrary from_json_text(const std::string& text);
    std::string to_json_text() const;

    bool operator==(const SkillLibrary&) const = default;

  private:
    std::map<std::string, Exemplar> exemplars_;
    std::map<std::string, SkillDescriptor> skills_;
    std::vector<SkillCluster> clusters_;
    std::uint64_t version_ = 0;
    std::uint64_t next_sequence_ = 0;
    std::uint64_t next_skill_id_ = 0;
};

}  // namespace metaplan
