#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "metaplan/errors.hpp"
#include "metaplan/llm.hpp"

using namespace metaplan;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::trunc);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("prompt_hash separates fields and orders") {
    const std::uint64_t a = prompt_hash({{"user", "hello"}});
    CHECK(a == prompt_hash({{"user", "hello"}}));
    CHECK(a != prompt_hash({{"user", "hello!"}}));
    CHECK(a != prompt_hash({{"system", "hello"}}));
    // Field boundaries matter: role+content concatenations do not collide.
    CHECK(prompt_hash({{"ab", "c"}}) != prompt_hash({{"a", "bc"}}));
    CHECK(prompt_hash({{"u", "x"}, {"u", "y"}}) != prompt_hash({{"u", "xy"}}));
}

TEST_CASE("ScriptedBackend picks the longest unconsumed prefix, ties to earliest") {
    ScriptedBackend backend({
        {"GOAL", "short"},
        {"GOAL alice", "long"},
        {"", "fallback-1"},
        {"", "fallback-2"},
    });
    CHECK(backend.complete({{"user", "GOAL alice\nlift"}}) == "long");
    CHECK(backend.complete({{"user", "GOAL alice\nlift"}}) == "short");  // long consumed
    CHECK(backend.complete({{"user", "unrelated"}}) == "fallback-1");
    CHECK(backend.complete({{"user", "unrelated"}}) == "fallback-2");
    CHECK_THROWS_AS(backend.complete({{"user", "unrelated"}}), FixtureExhausted);
}

TEST_CASE("ScriptedBackend matches against the last user message") {
    ScriptedBackend backend(std::vector<ScriptedBackend::Rule>{{"B", "matched-b"}});
    CHECK(backend.complete({{"user", "A"}, {"assistant", "Z"}, {"user", "B"}}) == "matched-b");
}

TEST_CASE("ScriptedBackend::from_file validates its fixture") {
    auto good = temp_file("metaplan_fixture_good.json",
                          R"([{"match": "GOAL", "response": "PLAN a: WAIT"},
                              {"response": "anything"}])");
    auto backend = ScriptedBackend::from_file(good.string());
    CHECK(backend.complete({{"user", "GOAL x"}}) == "PLAN a: WAIT");
    std::filesystem::remove(good);

    auto bad = temp_file("metaplan_fixture_bad.json", R"({"match": "x"})");
    CHECK_THROWS_AS(ScriptedBackend::from_file(bad.string()), SchemaError);
    std::filesystem::remove(bad);
    CHECK_THROWS_AS(ScriptedBackend::from_file("/nonexistent/fixture.json"), IoError);
}

TEST_CASE("RecordingBackend writes a transcript that ReplayBackend closes over") {
    auto transcript = std::filesystem::temp_directory_path() / "metaplan_transcript.jsonl";
    {
        auto inner = std::make_unique<ScriptedBackend>(std::vector<ScriptedBackend::Rule>{
            {"first", "response one"}, {"second", "response two"}});
        RecordingBackend recorder(std::move(inner), transcript.string());
        recorder.note_stage("construction");
        CHECK(recorder.complete({{"user", "first prompt"}}) == "response one");
        recorder.note_stage("inference");
        CHECK(recorder.complete({{"user", "second prompt"}}) == "response two");
    }

    // Same prompts replay to the same responses; a changed prompt diverges.
    ReplayBackend replay = ReplayBackend::from_file(transcript.string());
    CHECK(replay.complete({{"user", "first prompt"}}) == "response one");
    CHECK(replay.complete({{"user", "second prompt"}}) == "response two");
    CHECK_THROWS_AS(replay.complete({{"user", "third prompt"}}), FixtureExhausted);

    ReplayBackend diverge = ReplayBackend::from_file(transcript.string());
    CHECK_THROWS_AS(diverge.complete({{"user", "tampered prompt"}}), ReplayDivergence);

    // Transcript records carry the stage labels and hex prompt hashes.
    std::ifstream in(transcript);
    std::string line1, line2;
    std::getline(in, line1);
    std::getline(in, line2);
    CHECK(line1.find("\"stage\":\"construction\"") != std::string::npos);
    CHECK(line2.find("\"stage\":\"inference\"") != std::string::npos);
    CHECK(line1.find("\"prompt_hash\"") != std::string::npos);
    std::filesystem::remove(transcript);
}

TEST_CASE("ReplayBackend prefers the stored prompt_hash over re-hashing the prompt") {
    // prompt text deliberately disagrees with the stored hash: the hash wins.
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(prompt_hash({{"user", "real"}})));
    auto path = temp_file("metaplan_replay_hash.jsonl",
                          std::string("{\"prompt\": \"stale text\", \"prompt_hash\": \"") + hex +
                              "\", \"response\": \"ok\"}\n");
    ReplayBackend replay = ReplayBackend::from_file(path.string());
    CHECK(replay.complete({{"user", "real"}}) == "ok");
    std::filesystem::remove(path);
}

TEST_CASE("make_backend dispatches on kind:detail") {
    auto fixture = temp_file("metaplan_factory_fixture.json", R"([{"response": "hi"}])");
    auto scripted = make_backend("scripted:" + fixture.string());
    CHECK(scripted->complete({{"user", "x"}}) == "hi");
    std::filesystem::remove(fixture);

    CHECK_THROWS_AS(make_backend("nocolon"), SchemaError);
    CHECK_THROWS_AS(make_backend("magic:spec"), SchemaError);
}

TEST_CASE("HttpBackend requires the configured key environment variable") {
    BackendConfig config;
    config.kind = "http";
    config.endpoint = "http://localhost:1";  // never reached: the key check fires first
    config.model = "m";
    config.max_retries = 0;
    config.api_key_env = "METAPLAN_TEST_KEY_THAT_IS_UNSET";
    HttpBackend backend(config);
    CHECK_THROWS_AS(backend.complete({{"user", "x"}}), NetworkError);
}
