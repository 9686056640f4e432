#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "r2kg/text.hpp"

namespace r2kg {

enum class MessageRole { system, user, assistant };

inline std::string_view to_string(MessageRole role) {
    switch (role) {
        case MessageRole::system: return "system";
        case MessageRole::user: return "user";
        default: return "assistant";
    }
}

struct ChatMessage {
    MessageRole role;
    std::string content;
};

struct CompletionRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double top_p = 0.95;
    double temperature = 0.95;
    int max_tokens = 16384;

    void validate() const {
        if (messages.empty()) throw std::invalid_argument("completion request has no messages");
        if (messages.front().role == MessageRole::assistant) {
            throw std::invalid_argument("first message must be system or user");
        }
        if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p outside (0,1]");
        if (temperature < 0.0) throw std::invalid_argument("temperature below 0");
        if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
    }
};

struct CompletionResult {
    std::string content;
    bool truncated = false;
    std::optional<std::uint64_t> prompt_tokens;
    std::optional<std::uint64_t> completion_tokens;
};

// Stable field order so scripted predicates and golden files never churn.
inline std::string serialize_request(const CompletionRequest& req) {
    nlohmann::ordered_json body;
    body["model"] = req.model_id;
    body["messages"] = nlohmann::ordered_json::array();
    for (const ChatMessage& m : req.messages) {
        nlohmann::ordered_json jm;
        jm["role"] = to_string(m.role);
        jm["content"] = m.content;
        body["messages"].push_back(std::move(jm));
    }
    body["temperature"] = req.temperature;
    body["top_p"] = req.top_p;
    body["max_tokens"] = req.max_tokens;
    return body.dump();
}

class GatewayError : public std::runtime_error {
public:
    explicit GatewayError(const std::string& what, int status = 0)
        : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_ = 0;
};

// Script misuse is a test bug, not a transport failure; it must never be
// swallowed into an Abstained(hard_failure).
class ScriptError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResult complete(const CompletionRequest& req) = 0;
};

inline constexpr const char* kApiKeyEnvVar = "R2KG_API_KEY";

struct HttpBackendConfig {
    std::string endpoint; // full URL, e.g. https://host/v1/chat/completions
    std::string api_key_env = kApiKeyEnvVar;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
    std::chrono::milliseconds max_backoff{4000};
    std::chrono::seconds timeout{120};
};

// OpenAI-style chat completion client with capped exponential backoff on
// transport errors and 429/5xx. Credentials come from the environment only.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
        auto scheme_end = config_.endpoint.find("://");
        if (scheme_end == std::string::npos) {
            throw std::invalid_argument("endpoint needs a scheme: " + config_.endpoint);
        }
        auto path_start = config_.endpoint.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            base_url_ = config_.endpoint;
            path_ = "/v1/chat/completions";
        } else {
            base_url_ = config_.endpoint.substr(0, path_start);
            path_ = config_.endpoint.substr(path_start);
        }
    }

    CompletionResult complete(const CompletionRequest& req) override {
        req.validate();
        const std::string body = serialize_request(req);

        httplib::Headers headers;
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        auto backoff = config_.initial_backoff;
        std::string last_error;
        for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
            httplib::Client client(base_url_);
            client.set_connection_timeout(config_.timeout);
            client.set_read_timeout(config_.timeout);

            auto res = client.Post(path_, headers, body, "application/json");
            if (res && res->status >= 200 && res->status < 300) {
                return parse_response(res->body);
            }
            int status = res ? res->status : 0;
            std::string body_excerpt = res ? res->body.substr(0, 200) : to_string(res.error());
            last_error = "HTTP " + std::to_string(status) + " from " + base_url_ + path_ + ": " +
                         body_excerpt;
            bool transient = !res || status == 429 || status >= 500;
            if (!transient || attempt == config_.max_attempts) {
                throw GatewayError(last_error, status);
            }
            std::this_thread::sleep_for(backoff);
            backoff = std::min(backoff * 2, config_.max_backoff);
        }
        throw GatewayError(last_error);
    }

private:
    CompletionResult parse_response(const std::string& body) const {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw GatewayError(std::string("response is not JSON: ") + e.what() + "; body: " +
                               body.substr(0, 200));
        }
        if (!j.contains("choices") || j["choices"].empty()) {
            throw GatewayError("response has no choices; body: " + body.substr(0, 200));
        }
        const auto& choice = j["choices"][0];
        CompletionResult result;
        result.content = choice.at("message").at("content").get<std::string>();
        result.truncated = choice.value("finish_reason", "") == "length";
        if (j.contains("usage")) {
            const auto& u = j["usage"];
            if (u.contains("prompt_tokens")) {
                result.prompt_tokens = u["prompt_tokens"].get<std::uint64_t>();
            }
            if (u.contains("completion_tokens")) {
                result.completion_tokens = u["completion_tokens"].get<std::uint64_t>();
            }
        }
        return result;
    }

    HttpBackendConfig config_;
    std::string base_url_;
    std::string path_;
};

// Deterministic backend for tests and bundled fixture runs: canned responses
// consumed strictly in order, each optionally guarded by a substring the
// incoming prompt must contain.
class ScriptedBackend : public Backend {
public:
    struct Entry {
        std::string expect_contains; // empty matches any prompt
        std::string response;
        bool truncated = false;
    };

    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<Entry> script) : script_(std::move(script)) {}

    void enqueue(Entry entry) { script_.push_back(std::move(entry)); }

    std::size_t cursor() const { return cursor_; }
    std::size_t remaining() const { return script_.size() - cursor_; }

    CompletionResult complete(const CompletionRequest& req) override {
        req.validate();
        std::string prompt;
        for (const ChatMessage& m : req.messages) {
            prompt += m.content;
            prompt += '\n';
        }
        if (cursor_ >= script_.size()) {
            throw ScriptError("script exhausted after " + std::to_string(script_.size()) +
                              " entries; unexpected request: " + prompt.substr(0, 160));
        }
        const Entry& entry = script_[cursor_];
        if (!entry.expect_contains.empty() &&
            prompt.find(entry.expect_contains) == std::string::npos) {
            throw ScriptError("script entry " + std::to_string(cursor_) +
                              " expected prompt containing '" + entry.expect_contains +
                              "' but got: " + prompt.substr(0, 160));
        }
        ++cursor_;
        return {entry.response, entry.truncated, std::nullopt, std::nullopt};
    }

private:
    std::vector<Entry> script_;
    std::size_t cursor_ = 0;
};

enum class AgentRole { operator_agent, supervisor_agent };

struct CallStatsSnapshot {
    std::uint64_t operator_calls = 0;
    std::uint64_t supervisor_calls = 0;
    std::uint64_t operator_prompt_tokens = 0;
    std::uint64_t operator_completion_tokens = 0;
    std::uint64_t supervisor_prompt_tokens = 0;
    std::uint64_t supervisor_completion_tokens = 0;
};

// Per-role call and token tallies. One instance can sit behind many gateways
// so a whole batch aggregates into a single ledger.
class CallCounters {
public:
    void record(AgentRole role, std::uint64_t prompt_tokens, std::uint64_t completion_tokens) {
        if (role == AgentRole::operator_agent) {
            operator_calls_.fetch_add(1, std::memory_order_relaxed);
            operator_prompt_tokens_.fetch_add(prompt_tokens, std::memory_order_relaxed);
            operator_completion_tokens_.fetch_add(completion_tokens, std::memory_order_relaxed);
        } else {
            supervisor_calls_.fetch_add(1, std::memory_order_relaxed);
            supervisor_prompt_tokens_.fetch_add(prompt_tokens, std::memory_order_relaxed);
            supervisor_completion_tokens_.fetch_add(completion_tokens, std::memory_order_relaxed);
        }
    }

    CallStatsSnapshot snapshot() const {
        CallStatsSnapshot s;
        s.operator_calls = operator_calls_.load();
        s.supervisor_calls = supervisor_calls_.load();
        s.operator_prompt_tokens = operator_prompt_tokens_.load();
        s.operator_completion_tokens = operator_completion_tokens_.load();
        s.supervisor_prompt_tokens = supervisor_prompt_tokens_.load();
        s.supervisor_completion_tokens = supervisor_completion_tokens_.load();
        return s;
    }

private:
    std::atomic<std::uint64_t> operator_calls_{0};
    std::atomic<std::uint64_t> supervisor_calls_{0};
    std::atomic<std::uint64_t> operator_prompt_tokens_{0};
    std::atomic<std::uint64_t> operator_completion_tokens_{0};
    std::atomic<std::uint64_t> supervisor_prompt_tokens_{0};
    std::atomic<std::uint64_t> supervisor_completion_tokens_{0};
};

// Thin instrumented front over a backend: counts calls and token usage per
// agent role so any run can produce a calls-per-sample report. Token figures
// are a chars/4 proxy unless the endpoint reports exact usage.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<Backend> backend,
                     std::shared_ptr<CallCounters> counters = nullptr)
        : backend_(std::move(backend)),
          counters_(counters ? std::move(counters) : std::make_shared<CallCounters>()) {}

    CompletionResult complete(AgentRole role, const CompletionRequest& req) {
        CompletionResult result = backend_->complete(req);

        std::uint64_t prompt_chars = 0;
        for (const ChatMessage& m : req.messages) prompt_chars += m.content.size();
        std::uint64_t prompt_tokens = result.prompt_tokens.value_or(prompt_chars / 4);
        std::uint64_t completion_tokens =
            result.completion_tokens.value_or(result.content.size() / 4);
        counters_->record(role, prompt_tokens, completion_tokens);
        return result;
    }

    Backend& backend() { return *backend_; }

    CallStatsSnapshot stats() const { return counters_->snapshot(); }

private:
    std::shared_ptr<Backend> backend_;
    std::shared_ptr<CallCounters> counters_;
};

} // namespace r2kg
