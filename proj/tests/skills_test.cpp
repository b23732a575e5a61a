#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>

#include "metaplan/errors.hpp"
#include "metaplan/llm.hpp"
#include "metaplan/skills.hpp"

using namespace metaplan;

namespace {

SkillDescriptor make_skill(const std::string& id, const std::string& name,
                           const std::string& description) {
    SkillDescriptor s;
    s.skill_id = id;
    s.name = name;
    s.description = description;
    s.tokens = normalize_tokens(name + " " + description);
    return s;
}

Exemplar make_exemplar(const std::string& id, std::uint64_t /*unused*/ = 0) {
    Exemplar e;
    e.exemplar_id = id;
    e.task_summary = "move the rope into the groove";
    e.scene_snapshot = "rope rope at (0,0,0,0)\n";
    e.demonstration = "PLAN alice: WAIT\n";
    e.source_task = "move_rope";
    return e;
}

}  // namespace

TEST_CASE("normalize_tokens lowercases, splits and drops stop words") {
    auto t = normalize_tokens("Synchronized_Dual-Arm grasping of the rope");
    CHECK(t == std::set<std::string>{"synchronized", "dual", "arm", "grasping", "rope"});
    CHECK(normalize_tokens("").empty());
    CHECK(normalize_tokens("the of and to").empty());
    CHECK(normalize_tokens("Lift2High") == std::set<std::string>{"lift2high"});
}

TEST_CASE("jaccard hand cases") {
    std::set<std::string> a = {"synchronized", "dual", "grasping"};
    std::set<std::string> b = {"synchronized", "bimanual", "lifting"};
    CHECK(jaccard(a, b) == doctest::Approx(0.2));  // 1 shared / 5 total
    CHECK(jaccard(a, a) == doctest::Approx(1.0));
    CHECK(jaccard(a, {}) == doctest::Approx(0.0));
    CHECK(jaccard({}, {}) == doctest::Approx(0.0));
}

TEST_CASE("cluster_skills groups similar descriptors and is input-order invariant") {
    std::vector<SkillDescriptor> skills = {
        make_skill("s0000", "synchronized_dual_arm_grasp", "grasp an object with both arms"),
        make_skill("s0001", "synchronized_dual_arm_lift", "lift an object with both arms"),
        make_skill("s0002", "rotate_held_object", "twist a held object about the grasp point"),
        make_skill("s0003", "place_at_target", "release an object at a target pose"),
        make_skill("s0004", "synchronized_dual_arm_place", "place an object with both arms"),
    };
    auto clusters = cluster_skills(skills, kClusterThreshold);

    // Single-link oracle: every member with company has a neighbor within the
    // threshold inside its own cluster, and ids across clusters partition input.
    std::map<std::string, const SkillDescriptor*> by_id;
    for (const auto& s : skills) by_id[s.skill_id] = &s;
    std::size_t total = 0;
    for (const auto& c : clusters) {
        total += c.members.size();
        for (const auto& m : c.members) {
            if (c.members.size() == 1) continue;
            bool linked = false;
            for (const auto& other : c.members) {
                if (other == m) continue;
                linked |= jaccard(by_id.at(m)->tokens, by_id.at(other)->tokens) >=
                          kClusterThreshold;
            }
            CHECK(linked);
        }
    }
    CHECK(total == skills.size());

    // The three dual-arm skills share most tokens, so they land together.
    auto dual = std::find_if(clusters.begin(), clusters.end(), [](const SkillCluster& c) {
        return std::find(c.members.begin(), c.members.end(), "s0000") != c.members.end();
    });
    REQUIRE(dual != clusters.end());
    CHECK(dual->members.size() == 3);
    CHECK(dual->canonical_name == "synchronized_dual_arm_grasp");
    CHECK(clusters[0].cluster_id == "c000");

    // Shuffling the input changes nothing: ids are re-sorted internally.
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto shuffled = skills;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(cluster_skills(shuffled, kClusterThreshold) == clusters);
    }
}

TEST_CASE("cluster merged_tokens is the union of member tokens") {
    std::vector<SkillDescriptor> skills = {
        make_skill("s0000", "lift_panel_high", "lift the panel high"),
        make_skill("s0001", "lift_panel_slowly", "lift the panel slowly"),
    };
    auto clusters = cluster_skills(skills, 0.5);
    REQUIRE(clusters.size() == 1);
    std::set<std::string> expected = skills[0].tokens;
    expected.insert(skills[1].tokens.begin(), skills[1].tokens.end());
    CHECK(clusters[0].merged_tokens == expected);
}

TEST_CASE("extract_skills parses SKILL lines and notes the construction stage") {
    ScriptedBackend backend(std::vector<ScriptedBackend::Rule>{{
        "",
        "These are the skills I noticed.\n"
        "SKILL synchronized_dual_arm_grasp: grasp both rope ends at the same time\n"
        "  SKILL maintain_grasp_distance: keep end effectors within the rope span\n"
        "not a skill line\n"
        "SKILL place_along_groove: lower the rope into the slot\n",
    }});
    auto skills = extract_skills(make_exemplar("e1"), backend);
    REQUIRE(skills.size() == 3);
    CHECK(skills[0].name == "synchronized_dual_arm_grasp");
    CHECK(skills[1].name == "maintain_grasp_distance");
    CHECK(skills[2].description == "lower the rope into the slot");
    CHECK(skills[0].tokens.count("grasp") == 1);
    CHECK(skills[0].exemplar_ids == std::vector<std::string>{"e1"});
}

TEST_CASE("extract_skills rejects responses without SKILL lines") {
    ScriptedBackend backend(std::vector<ScriptedBackend::Rule>{
        {"", "I could not identify any skills here."}});
    CHECK_THROWS_AS(extract_skills(make_exemplar("e1"), backend), ExtractionParseError);
}

TEST_CASE("add_exemplar assigns ids, bumps version, and is idempotent") {
    SkillLibrary lib;
    CHECK(lib.empty());
    CHECK_THROWS_AS(lib.retrieve("anything"), EmptyLibrary);

    std::vector<SkillDescriptor> extracted = {
        make_skill("", "grasp_rope_end", "grasp a rope end by its handle"),
        make_skill("", "lift_rope", "lift the rope clear of the table"),
    };
    CHECK(lib.add_exemplar(make_exemplar("e1"), extracted));
    CHECK(lib.version() == 1);
    CHECK(lib.exemplars().size() == 1);
    REQUIRE(lib.skills().size() == 2);
    CHECK(lib.skills().count("s0000") == 1);
    CHECK(lib.skills().count("s0001") == 1);

    // Same exemplar id again: no mutation, version unchanged.
    CHECK(!lib.add_exemplar(make_exemplar("e1"), extracted));
    CHECK(lib.version() == 1);
    CHECK(lib.skills().size() == 2);

    // A second exemplar continues the sequential skill ids.
    CHECK(lib.add_exemplar(make_exemplar("e2"),
                           {make_skill("", "place_rope", "place the rope in the groove")}));
    CHECK(lib.version() == 2);
    CHECK(lib.skills().count("s0002") == 1);
}

TEST_CASE("add_exemplar rejects failures and dangling exemplar references") {
    SkillLibrary lib;
    Exemplar failed = make_exemplar("bad");
    failed.outcome_success = false;
    CHECK_THROWS_AS(lib.add_exemplar(failed, {}), IntegrityError);

    auto skill = make_skill("", "grasp_rope_end", "grasp a rope end");
    skill.exemplar_ids = {"ghost"};
    CHECK_THROWS_AS(lib.add_exemplar(make_exemplar("e1"), {skill}), IntegrityError);
}

TEST_CASE("retrieve ranks clusters by overlap and caps exemplars per cluster") {
    SkillLibrary lib;
    for (int i = 0; i < 4; ++i) {
        lib.add_exemplar(
            make_exemplar("rope-e" + std::to_string(i)),
            {make_skill("", "grasp_rope_end", "grasp a rope end with one arm")});
    }
    lib.add_exemplar(make_exemplar("door-e"),
                     {make_skill("", "open_cabinet_door", "rotate the cabinet door open")});

    auto hits = lib.retrieve("grasp the rope end");
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].cluster.canonical_name == "grasp_rope_end");
    CHECK(hits[0].score > hits[1].score);
    // Newest exemplars first, capped at kExemplarsPerCluster.
    REQUIRE(int(hits[0].exemplars.size()) == kExemplarsPerCluster);
    CHECK(hits[0].exemplars[0].exemplar_id == "rope-e3");
    CHECK(hits[0].exemplars[1].exemplar_id == "rope-e2");

    // k limits the result count.
    CHECK(lib.retrieve("grasp the rope end", 1).size() == 1);

    // Zero-overlap queries still return clusters, ordered by cluster id.
    auto cold = lib.retrieve("zzz qqq");
    REQUIRE(cold.size() == 2);
    CHECK(cold[0].score == doctest::Approx(0.0));
    CHECK(cold[0].cluster.cluster_id < cold[1].cluster.cluster_id);
}

TEST_CASE("library persistence round-trips byte-identically") {
    SkillLibrary lib;
    lib.add_exemplar(make_exemplar("e1"),
                     {make_skill("", "grasp_rope_end", "grasp a rope end"),
                      make_skill("", "lift_rope", "lift the rope clear")});
    lib.add_exemplar(make_exemplar("e2"),
                     {make_skill("", "place_rope", "place the rope in the groove")});

    const std::string text = lib.to_json_text();
    SkillLibrary back = SkillLibrary::from_json_text(text);
    CHECK(back == lib);
    CHECK(back.to_json_text() == text);

    auto path = std::filesystem::temp_directory_path() / "metaplan_lib_test.json";
    lib.save(path.string());
    SkillLibrary loaded = SkillLibrary::load(path.string());
    CHECK(loaded == lib);
    std::filesystem::remove(path);
}

TEST_CASE("library load rejects malformed or inconsistent documents") {
    CHECK_THROWS_AS(SkillLibrary::from_json_text("not json"), SchemaError);
    CHECK_THROWS_AS(SkillLibrary::from_json_text("{}"), SchemaError);
    // A skill that references a missing exemplar fails the integrity check.
    CHECK_THROWS_AS(SkillLibrary::from_json_text(R"({
        "version": 1, "next_sequence": 1, "next_skill_id": 1,
        "exemplars": [],
        "skills": [{"skill_id": "s0000", "name": "x", "description": "y",
                    "tokens": ["x"], "exemplar_ids": ["ghost"]}],
        "clusters": [{"cluster_id": "c000", "canonical_name": "x",
                      "members": ["s0000"], "merged_tokens": ["x"]}]
    })"),
                    SchemaError);
}
