#include "metaplan/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "metaplan/errors.hpp"

// httplib pulls in sockets; keep it out of the public header.
#define CPPHTTPLIB_OPENSSL_SUPPORT_DISABLED
#include <httplib.h>

namespace metaplan {

using nlohmann::json;

std::uint64_t prompt_hash(const std::vector<ChatMessage>& messages) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
        h ^= 0x1F;  // field separator
        h *= 0x100000001B3ULL;
    };
    for (const auto& m : messages) {
        mix(m.role);
        mix(m.content);
    }
    return h;
}

namespace {

const std::string& last_user_content(const std::vector<ChatMessage>& messages) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == "user") return it->content;
    }
    throw MalformedResponse("prompt contains no user message");
}

std::string read_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open ") + what + ": " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path, "fixture"));
    } catch (const json::exception& e) {
        throw SchemaError(path, std::string("invalid fixture JSON: ") + e.what());
    }
    if (!doc.is_array()) throw SchemaError(path, "fixture must be a JSON array of rules");
    std::vector<Rule> rules;
    for (const auto& r : doc) {
        if (!r.contains("response") || !r["response"].is_string())
            throw SchemaError(path, "rule missing string 'response'");
        rules.push_back(Rule{r.value("match", std::string()), r["response"].get<std::string>()});
    }
    return ScriptedBackend(std::move(rules));
}

std::string ScriptedBackend::complete(const std::vector<ChatMessage>& messages) {
    const std::string& prompt = last_user_content(messages);
    Rule* best = nullptr;
    for (Rule& rule : rules_) {
        if (rule.used) continue;
        if (prompt.compare(0, rule.match.size(), rule.match) != 0) continue;
        if (!best || rule.match.size() > best->match.size()) best = &rule;
    }
    if (!best) throw FixtureExhausted("no unconsumed fixture rule matches the prompt");
    best->used = true;
    return best->response;
}

ReplayBackend ReplayBackend::from_file(const std::string& path) {
    std::istringstream in(read_file(path, "transcript"));
    std::vector<Entry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw SchemaError(path, std::string("invalid transcript line: ") + e.what());
        }
        if (!rec.contains("response")) continue;  // terminal/result records
        Entry e;
        e.response = rec["response"].get<std::string>();
        if (rec.contains("prompt_hash")) {
            e.prompt_hash = std::stoull(rec["prompt_hash"].get<std::string>(), nullptr, 16);
        } else if (rec.contains("prompt")) {
            e.prompt_hash = prompt_hash({{"user", rec["prompt"].get<std::string>()}});
        } else {
            throw SchemaError(path, "transcript record lacks prompt and prompt_hash");
        }
        entries.push_back(std::move(e));
    }
    return ReplayBackend(std::move(entries));
}

std::string ReplayBackend::complete(const std::vector<ChatMessage>& messages) {
    if (next_ >= entries_.size())
        throw FixtureExhausted("transcript exhausted after " + std::to_string(next_) + " calls");
    const Entry& entry = entries_[next_];
    const std::uint64_t got = prompt_hash(messages);
    if (got != entry.prompt_hash) throw ReplayDivergence(entry.prompt_hash, got);
    ++next_;
    return entry.response;
}

RecordingBackend::RecordingBackend(std::unique_ptr<LlmBackend> inner, std::string transcript_path)
    : inner_(std::move(inner)), transcript_path_(std::move(transcript_path)) {
    std::ofstream out(transcript_path_, std::ios::trunc);
    if (!out) throw IoError("cannot write transcript: " + transcript_path_);
}

void RecordingBackend::note_stage(const std::string& stage) {
    stage_ = stage;
    inner_->note_stage(stage);
}

std::string RecordingBackend::complete(const std::vector<ChatMessage>& messages) {
    const std::string response = inner_->complete(messages);
    json rec;
    rec["stage"] = stage_;
    std::string prompt;
    for (const auto& m : messages) {
        if (!prompt.empty()) prompt += "\n";
        prompt += m.content;
    }
    rec["prompt"] = prompt;
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(prompt_hash(messages)));
    rec["prompt_hash"] = hex;
    rec["response"] = response;
    rec["timestamp"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    std::ofstream out(transcript_path_, std::ios::app);
    if (!out) throw IoError("cannot append to transcript: " + transcript_path_);
    out << rec.dump() << "\n";
    return response;
}

std::string HttpBackend::complete(const std::vector<ChatMessage>& messages) {
    json body;
    body["model"] = config_.model;
    body["temperature"] = config_.temperature;
    body["messages"] = json::array();
    for (const auto& m : messages)
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});

    // Split endpoint into origin + path for the client.
    std::string origin = config_.endpoint;
    std::string path = "/v1/chat/completions";
    std::size_t scheme = origin.find("://");
    std::size_t slash = origin.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash != std::string::npos) {
        path = origin.substr(slash);
        origin = origin.substr(0, slash);
    }

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key)
            throw NetworkError("environment variable " + config_.api_key_env + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::seconds(1L << (attempt - 1)));
        }
        httplib::Client client(origin);
        client.set_read_timeout(120, 0);
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "connection failed to " + origin;
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;  // retryable
        }
        if (res->status != 200)
            throw NetworkError("HTTP " + std::to_string(res->status) + ": " + res->body);
        try {
            json doc = json::parse(res->body);
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw MalformedResponse(std::string("unexpected completion body: ") + e.what());
        }
    }
    throw NetworkError("exhausted retries: " + last_error);
}

std::unique_ptr<LlmBackend> make_backend(const std::string& spec) {
    std::size_t colon = spec.find(':');
    if (colon == std::string::npos)
        throw SchemaError("backend", "expected kind:detail, got '" + spec + "'");
    const std::string kind = spec.substr(0, colon);
    const std::string detail = spec.substr(colon + 1);
    if (kind == "scripted")
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(detail));
    if (kind == "replay")
        return std::make_unique<ReplayBackend>(ReplayBackend::from_file(detail));
    if (kind == "http") {
        json doc;
        try {
            doc = json::parse(read_file(detail, "backend config"));
        } catch (const json::exception& e) {
            throw SchemaError(detail, std::string("invalid backend config: ") + e.what());
        }
        BackendConfig config;
        config.kind = "http";
        config.endpoint = doc.at("endpoint").get<std::string>();
        config.model = doc.at("model").get<std::string>();
        config.temperature = doc.value("temperature", 0.0);
        config.max_retries = doc.value("max_retries", 3);
        config.api_key_env = doc.value("api_key_env", std::string());
        return std::make_unique<HttpBackend>(std::move(config));
    }
    throw SchemaError("backend", "unknown backend kind '" + kind + "'");
}

}  // namespace metaplan
