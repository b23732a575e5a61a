#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace metaplan {

struct SchemaError : std::runtime_error {
    std::string path;
    std::string reason;
    SchemaError(std::string p, std::string r)
        : std::runtime_error("schema error at " + p + ": " + r),
          path(std::move(p)),
          reason(std::move(r)) {}
};

struct UnknownTask : std::runtime_error {
    explicit UnknownTask(const std::string& id)
        : std::runtime_error("unknown task_id: " + id) {}
};

struct UnknownAgent : std::runtime_error {
    explicit UnknownAgent(const std::string& id)
        : std::runtime_error("unknown agent: " + id) {}
};

// Signals a validator gap: an action reached execution that validation
// should have rejected. Aborts the episode, never silently recovered.
struct InvalidTransition : std::logic_error {
    using std::logic_error::logic_error;
};

struct ParseError : std::runtime_error {
    int line;
    int column;
    std::string expected;
    ParseError(int l, int c, std::string exp)
        : std::runtime_error("parse error at line " + std::to_string(l) + ", column " +
                             std::to_string(c) + ": expected " + exp),
          line(l),
          column(c),
          expected(std::move(exp)) {}
};

struct UnknownVerb : std::runtime_error {
    std::string token;
    int line;
    UnknownVerb(std::string tok, int l)
        : std::runtime_error("unknown verb '" + tok + "' at line " + std::to_string(l)),
          token(std::move(tok)),
          line(l) {}
};

struct DuplicateAgent : std::runtime_error {
    std::string agent_id;
    explicit DuplicateAgent(std::string id)
        : std::runtime_error("duplicate agent in plan: " + id), agent_id(std::move(id)) {}
};

struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NetworkError : BackendError {
    using BackendError::BackendError;
};

struct MalformedResponse : BackendError {
    using BackendError::BackendError;
};

struct FixtureExhausted : BackendError {
    using BackendError::BackendError;
};

struct ReplayDivergence : BackendError {
    std::uint64_t expected_hash;
    std::uint64_t got_hash;
    ReplayDivergence(std::uint64_t expected, std::uint64_t got)
        : BackendError("replay divergence: expected prompt hash " + std::to_string(expected) +
                       ", got " + std::to_string(got)),
          expected_hash(expected),
          got_hash(got) {}
};

struct PlanSynthesisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExtractionParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyLibrary : std::runtime_error {
    EmptyLibrary() : std::runtime_error("skill library is empty") {}
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace metaplan
