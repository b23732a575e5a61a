#include "metaplan/skills.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metaplan/errors.hpp"
#include "metaplan/llm.hpp"

namespace metaplan {

using nlohmann::json;

std::set<std::string> normalize_tokens(const std::string& text) {
    static const std::set<std::string> kStopWords = {
        "a", "an", "and", "are", "as", "at", "be", "by", "for", "in", "is",
        "it", "its", "of", "on", "or", "that", "the", "this", "to", "with"};
    std::set<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty() && !kStopWords.count(word)) out.insert(word);
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : a) inter += b.count(t);
    return double(inter) / double(a.size() + b.size() - inter);
}

std::vector<SkillCluster> cluster_skills(std::vector<SkillDescriptor> skills, double threshold) {
    std::sort(skills.begin(), skills.end(),
              [](const SkillDescriptor& a, const SkillDescriptor& b) {
                  return a.skill_id < b.skill_id;
              });
    std::vector<SkillCluster> clusters;
    std::vector<std::vector<const SkillDescriptor*>> member_refs;
    for (const SkillDescriptor& skill : skills) {
        bool placed = false;
        for (std::size_t c = 0; c < clusters.size() && !placed; ++c) {
            for (const SkillDescriptor* member : member_refs[c]) {
                if (jaccard(skill.tokens, member->tokens) >= threshold) {
                    clusters[c].members.push_back(skill.skill_id);
                    clusters[c].merged_tokens.insert(skill.tokens.begin(), skill.tokens.end());
                    clusters[c].canonical_name = std::min(clusters[c].canonical_name, skill.name);
                    member_refs[c].push_back(&skill);
                    placed = true;
                    break;
                }
            }
        }
        if (!placed) {
            char id[16];
            std::snprintf(id, sizeof(id), "c%03zu", clusters.size());
            clusters.push_back(
                SkillCluster{id, skill.name, {skill.skill_id}, skill.tokens});
            member_refs.push_back({&skill});
        }
    }
    return clusters;
}

std::vector<SkillDescriptor> extract_skills(const Exemplar& exemplar, LlmBackend& backend) {
    std::string prompt =
        "TASK SUMMARY\n" + exemplar.task_summary + "\n\n" +
        "SCENE\n" + exemplar.scene_snapshot + "\n\n" +
        "DEMONSTRATION\n" + exemplar.demonstration + "\n\n" +
        "Abstract the reusable manipulation skills exercised by this demonstration.\n"
        "Respond with one line per skill:\n"
        "  SKILL <snake_case_name>: <one sentence description>\n";
    backend.note_stage("construction");
    const std::string response = backend.complete({{"user", prompt}});

    std::vector<SkillDescriptor> out;
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t pos = line.find_first_not_of(" \t");
        if (pos == std::string::npos || line.compare(pos, 6, "SKILL ") != 0) continue;
        std::size_t colon = line.find(':', pos + 6);
        if (colon == std::string::npos) continue;
        SkillDescriptor skill;
        skill.name = line.substr(pos + 6, colon - pos - 6);
        while (!skill.name.empty() && skill.name.back() == ' ') skill.name.pop_back();
        skill.description = line.substr(colon + 1);
        std::size_t d = skill.description.find_first_not_of(" \t");
        skill.description = d == std::string::npos ? "" : skill.description.substr(d);
        if (skill.name.empty()) continue;
        skill.tokens = normalize_tokens(skill.name + " " + skill.description);
        skill.exemplar_ids = {exemplar.exemplar_id};
        out.push_back(std::move(skill));
    }
    if (out.empty())
        throw ExtractionParseError("no SKILL lines in extraction response: " + response);
    return out;
}

bool SkillLibrary::add_exemplar(const Exemplar& exemplar, std::vector<SkillDescriptor> extracted) {
    if (!exemplar.outcome_success)
        throw IntegrityError("only successful exemplars may enter the library");
    if (exemplars_.count(exemplar.exemplar_id)) return false;  // idempotent

    for (const SkillDescriptor& skill : extracted) {
        for (const std::string& eid : skill.exemplar_ids) {
            if (eid != exemplar.exemplar_id && !exemplars_.count(eid))
                throw IntegrityError("skill '" + skill.name + "' references unknown exemplar " +
                                     eid);
        }
    }

    Exemplar stored = exemplar;
    stored.sequence = next_sequence_++;
    exemplars_[stored.exemplar_id] = stored;

    for (SkillDescriptor& skill : extracted) {
        char id[16];
        std::snprintf(id, sizeof(id), "s%04llu",
                      static_cast<unsigned long long>(next_skill_id_++));
        skill.skill_id = id;
        if (skill.tokens.empty())
            skill.tokens = normalize_tokens(skill.name + " " + skill.description);
        if (skill.exemplar_ids.empty()) skill.exemplar_ids = {stored.exemplar_id};
        skills_[skill.skill_id] = skill;
    }

    std::vector<SkillDescriptor> all;
    all.reserve(skills_.size());
    for (const auto& [_, s] : skills_) all.push_back(s);
    clusters_ = cluster_skills(std::move(all), kClusterThreshold);
    ++version_;
    return true;
}

std::vector<RetrievedCluster> SkillLibrary::retrieve(const std::string& query, int k) const {
    if (clusters_.empty()) throw EmptyLibrary();
    const std::set<std::string> q = normalize_tokens(query);

    std::vector<RetrievedCluster> ranked;
    for (const SkillCluster& cluster : clusters_) {
        RetrievedCluster r;
        r.cluster = cluster;
        r.score = jaccard(cluster.merged_tokens, q);
        // Exemplars linked through member skills, newest first.
        std::set<std::string> seen;
        std::vector<const Exemplar*> linked;
        for (const std::string& sid : cluster.members) {
            for (const std::string& eid : skills_.at(sid).exemplar_ids) {
                if (seen.insert(eid).second) linked.push_back(&exemplars_.at(eid));
            }
        }
        std::sort(linked.begin(), linked.end(),
                  [](const Exemplar* a, const Exemplar* b) { return a->sequence > b->sequence; });
        for (std::size_t i = 0; i < linked.size() && int(i) < kExemplarsPerCluster; ++i)
            r.exemplars.push_back(*linked[i]);
        ranked.push_back(std::move(r));
    }
    std::sort(ranked.begin(), ranked.end(), [](const RetrievedCluster& a,
                                               const RetrievedCluster& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.cluster.cluster_id < b.cluster.cluster_id;
    });
    if (int(ranked.size()) > k) ranked.resize(std::size_t(k));
    return ranked;
}

std::string SkillLibrary::to_json_text() const {
    json doc;
    doc["version"] = version_;
    doc["next_sequence"] = next_sequence_;
    doc["next_skill_id"] = next_skill_id_;
    doc["exemplars"] = json::array();
    for (const auto& [_, e] : exemplars_) {
        doc["exemplars"].push_back({{"exemplar_id", e.exemplar_id},
                                    {"task_summary", e.task_summary},
                                    {"scene_snapshot", e.scene_snapshot},
                                    {"demonstration", e.demonstration},
                                    {"source_task", e.source_task},
                                    {"outcome_success", e.outcome_success},
                                    {"sequence", e.sequence}});
    }
    doc["skills"] = json::array();
    for (const auto& [_, s] : skills_) {
        doc["skills"].push_back({{"skill_id", s.skill_id},
                                 {"name", s.name},
                                 {"description", s.description},
                                 {"tokens", s.tokens},
                                 {"exemplar_ids", s.exemplar_ids}});
    }
    doc["clusters"] = json::array();
    for (const auto& c : clusters_) {
        doc["clusters"].push_back({{"cluster_id", c.cluster_id},
                                   {"canonical_name", c.canonical_name},
                                   {"members", c.members},
                                   {"merged_tokens", c.merged_tokens}});
    }
    return doc.dump(2) + "\n";
}

SkillLibrary SkillLibrary::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError("$", std::string("invalid library JSON: ") + e.what());
    }
    SkillLibrary lib;
    try {
        lib.version_ = doc.at("version").get<std::uint64_t>();
        lib.next_sequence_ = doc.value("next_sequence", 0ULL);
        lib.next_skill_id_ = doc.value("next_skill_id", 0ULL);
        for (const auto& e : doc.at("exemplars")) {
            Exemplar ex;
            ex.exemplar_id = e.at("exemplar_id").get<std::string>();
            ex.task_summary = e.at("task_summary").get<std::string>();
            ex.scene_snapshot = e.at("scene_snapshot").get<std::string>();
            ex.demonstration = e.at("demonstration").get<std::string>();
            ex.source_task = e.at("source_task").get<std::string>();
            ex.outcome_success = e.at("outcome_success").get<bool>();
            ex.sequence = e.at("sequence").get<std::uint64_t>();
            lib.exemplars_[ex.exemplar_id] = ex;
        }
        for (const auto& s : doc.at("skills")) {
            SkillDescriptor sk;
            sk.skill_id = s.at("skill_id").get<std::string>();
            sk.name = s.at("name").get<std::string>();
            sk.description = s.at("description").get<std::string>();
            for (const auto& t : s.at("tokens")) sk.tokens.insert(t.get<std::string>());
            for (const auto& eid : s.at("exemplar_ids"))
                sk.exemplar_ids.push_back(eid.get<std::string>());
            lib.skills_[sk.skill_id] = sk;
        }
        for (const auto& c : doc.at("clusters")) {
            SkillCluster cl;
            cl.cluster_id = c.at("cluster_id").get<std::string>();
            cl.canonical_name = c.at("canonical_name").get<std::string>();
            for (const auto& m : c.at("members")) cl.members.push_back(m.get<std::string>());
            for (const auto& t : c.at("merged_tokens"))
                cl.merged_tokens.insert(t.get<std::string>());
            lib.clusters_.push_back(cl);
        }
    } catch (const json::exception& e) {
        throw SchemaError("$", std::string("library field: ") + e.what());
    }
    // Referential integrity both directions.
    for (const auto& [_, s] : lib.skills_) {
        for (const auto& eid : s.exemplar_ids) {
            if (!lib.exemplars_.count(eid))
                throw SchemaError("skills." + s.skill_id, "dangling exemplar id " + eid);
        }
    }
    for (const auto& c : lib.clusters_) {
        for (const auto& sid : c.members) {
            if (!lib.skills_.count(sid))
                throw SchemaError("clusters." + c.cluster_id, "dangling skill id " + sid);
        }
    }
    return lib;
}

void SkillLibrary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write library file: " + path);
    out << to_json_text();
    if (!out) throw IoError("short write to library file: " + path);
}

SkillLibrary SkillLibrary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open library file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

}  // namespace metaplan
