#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace metaplan {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct BackendConfig {
    std::string kind;  // http | scripted | replay
    std::string endpoint;
    std::string model;
    double temperature = 0.0;
    int max_retries = 3;
    std::string api_key_env;  // name of the env var; the key itself never lands in files
    std::string fixture_path;
    std::string transcript_path;
};

/// Content-only FNV-1a hash of a message list; used for replay divergence.
std::uint64_t prompt_hash(const std::vector<ChatMessage>& messages);

class LlmBackend {
  public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
    /// Stage label (construction/inference/reflection) for transcript
    /// records; a no-op for backends that do not record.
    virtual void note_stage(const std::string& /*stage*/) {}
};

/// Ordered (match-prefix -> response) rules with consume-once semantics: each
/// call picks the unconsumed rule with the longest prefix of the last user
/// message (ties: earliest rule). An empty match prefix matches anything.
class ScriptedBackend : public LlmBackend {
  public:
    struct Rule {
        std::string match;
        std::string response;
        bool used = false;
    };
    explicit ScriptedBackend(std::vector<Rule> rules) : rules_(std::move(rules)) {}
    static ScriptedBackend from_file(const std::string& path);
    std::string complete(const std::vector<ChatMessage>& messages) override;

  private:
    std::vector<Rule> rules_;
};

/// Replays a recorded transcript, verifying each incoming prompt hashes to
/// the recorded one before yielding the recorded response.
class ReplayBackend : public LlmBackend {
  public:
    struct Entry {
        std::uint64_t prompt_hash = 0;
        std::string response;
    };
    explicit ReplayBackend(std::vector<Entry> entries) : entries_(std::move(entries)) {}
    static ReplayBackend from_file(const std::string& path);
    std::string complete(const std::vector<ChatMessage>& messages) override;

  private:
    std::vector<Entry> entries_;
    std::size_t next_ = 0;
};

/// Decorator appending every exchange to a JSON-lines transcript file.
class RecordingBackend : public LlmBackend {
  public:
    RecordingBackend(std::unique_ptr<LlmBackend> inner, std::string transcript_path);
    std::string complete(const std::vector<ChatMessage>& messages) override;
    void note_stage(const std::string& stage) override;
    const std::string& transcript_path() const { return transcript_path_; }

  private:
    std::unique_ptr<LlmBackend> inner_;
    std::string transcript_path_;
    std::string stage_ = "inference";
};

/// Live chat-completions client with exponential-backoff retries
/// (base 1 s, factor 2). The API key is read from the environment variable
/// named in the config at call time.
class HttpBackend : public LlmBackend {
  public:
    explicit HttpBackend(BackendConfig config) : config_(std::move(config)) {}
    std::string complete(const std::vector<ChatMessage>& messages) override;

  private:
    BackendConfig config_;
};

/// `kind:detail` factory — scripted:fixture.json, replay:transcript.jsonl,
/// http:config.json.
std::unique_ptr<LlmBackend> make_backend(const std::string& spec);

}  // namespace metaplan
