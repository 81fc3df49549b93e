#pragma once

#include "rate/error.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rate {

enum class Role { System, User, Assistant };

std::string_view to_string(Role r);

struct ChatMessage {
    Role role = Role::User;
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_output = 2048;
};

struct TokenUsage {
    int prompt = 0;
    int completion = 0;
};

struct ChatResponse {
    std::string content;
    std::string model_id;
    TokenUsage token_usage;
    int attempts = 1; // transport attempts spent, including retries
};

struct SearchHit {
    std::string title;
    std::string snippet;
    std::string url;
};

class GatewayError : public Error {
public:
    enum class Kind { Timeout, RateLimited, Malformed, Transport };

    GatewayError(Kind kind, std::string detail);

    Kind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }
    bool retryable() const noexcept { return kind_ != Kind::Malformed; }

private:
    Kind kind_;
    std::string detail_;
};

std::string_view to_string(GatewayError::Kind k);

/// Stable 64-bit FNV-1a digest of a message transcript, as 16 hex digits.
/// Sampling parameters are not part of the key.
std::string transcript_hash(const std::vector<ChatMessage>& messages);

class ChatGateway {
public:
    virtual ~ChatGateway() = default;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
};

class SearchGateway {
public:
    virtual ~SearchGateway() = default;
    /// At most k hits in provider order; an empty list is not an error.
    virtual std::vector<SearchHit> search(const std::string& query, int k) = 0;
};

struct RetryPolicy {
    int retries = 2;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

Sleeper real_sleeper();

/// Runs fn until it succeeds, throws a non-retryable GatewayError, or the
/// retry budget is spent. Returns the number of attempts via *attempts.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, const Sleeper& sleep, Fn&& fn, int* attempts = nullptr) {
    auto delay = policy.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        if (attempts)
            *attempts = attempt;
        try {
            return fn();
        } catch (const GatewayError& e) {
            if (!e.retryable() || attempt > policy.retries)
                throw;
        }
        sleep(delay);
        delay = std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(delay.count()) * policy.multiplier));
    }
}

/// Decorator adding bounded exponential backoff to any chat gateway.
class RetryingChatGateway final : public ChatGateway {
public:
    RetryingChatGateway(std::shared_ptr<ChatGateway> inner, RetryPolicy policy, Sleeper sleep = real_sleeper());
    ChatResponse chat(const ChatRequest& request) override;

private:
    std::shared_ptr<ChatGateway> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

class RetryingSearchGateway final : public SearchGateway {
public:
    RetryingSearchGateway(std::shared_ptr<SearchGateway> inner, RetryPolicy policy, Sleeper sleep = real_sleeper());
    std::vector<SearchHit> search(const std::string& query, int k) override;

private:
    std::shared_ptr<SearchGateway> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

// ---- scripted providers -----------------------------------------------------

/// Replays chat responses keyed by transcript_hash.
class ScriptedChatGateway final : public ChatGateway {
public:
    ScriptedChatGateway() = default;
    explicit ScriptedChatGateway(std::map<std::string, std::string> responses);

    void add(std::string hash, std::string response);
    ChatResponse chat(const ChatRequest& request) override;

    /// Every transcript seen, in call order.
    std::vector<std::vector<ChatMessage>> log() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> responses_;
    std::vector<std::vector<ChatMessage>> log_;
};

/// Replays search hits keyed by exact query text; unknown queries yield no hits.
class ScriptedSearchGateway final : public SearchGateway {
public:
    ScriptedSearchGateway() = default;
    explicit ScriptedSearchGateway(std::map<std::string, std::vector<SearchHit>> hits);

    void add(std::string query, std::vector<SearchHit> hits);
    std::vector<SearchHit> search(const std::string& query, int k) override;
    std::vector<std::string> queries() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<SearchHit>> hits_;
    std::vector<std::string> queries_;
};

struct Fixtures {
    std::map<std::string, std::string> chat;                 // transcript hash -> response
    std::map<std::string, std::vector<SearchHit>> search;    // query -> hits
};

/// Reads a JSON-lines fixture file. Each line is either
/// {"transcript_hash": "...", "response": "..."} or
/// {"query": "...", "response": [{"title","snippet","url"}, ...]}.
Fixtures load_fixtures(const std::filesystem::path& path);
Fixtures parse_fixtures(std::string_view jsonl);
std::string serialize_fixtures(const Fixtures& f);

/// Passes calls through and remembers every exchange so it can be written
/// out as a fixture file for offline replay.
class FixtureRecorder {
public:
    void record_chat(const std::vector<ChatMessage>& transcript, const std::string& response);
    void record_search(const std::string& query, const std::vector<SearchHit>& hits);
    Fixtures fixtures() const;

private:
    mutable std::mutex mu_;
    Fixtures fixtures_;
};

class RecordingChatGateway final : public ChatGateway {
public:
    RecordingChatGateway(std::shared_ptr<ChatGateway> inner, std::shared_ptr<FixtureRecorder> recorder);
    ChatResponse chat(const ChatRequest& request) override;

private:
    std::shared_ptr<ChatGateway> inner_;
    std::shared_ptr<FixtureRecorder> recorder_;
};

class RecordingSearchGateway final : public SearchGateway {
public:
    RecordingSearchGateway(std::shared_ptr<SearchGateway> inner, std::shared_ptr<FixtureRecorder> recorder);
    std::vector<SearchHit> search(const std::string& query, int k) override;

private:
    std::shared_ptr<SearchGateway> inner_;
    std::shared_ptr<FixtureRecorder> recorder_;
};

// ---- live HTTP providers ----------------------------------------------------

struct GatewayConfig {
    std::string llm_endpoint;    // full URL of a chat-completions endpoint
    std::string llm_model;
    std::string search_endpoint; // full URL of a web-search endpoint
    std::string llm_api_key;
    std::string search_api_key;
    double timeout_s = 60.0;
    int retries = 2;
    std::chrono::milliseconds initial_backoff{1000};
    int max_output = 2048;
};

/// OpenAI-style chat completion over HTTP(S). One attempt per call; wrap in
/// RetryingChatGateway for backoff.
class HttpChatGateway final : public ChatGateway {
public:
    explicit HttpChatGateway(GatewayConfig config);
    ChatResponse chat(const ChatRequest& request) override;

private:
    GatewayConfig config_;
};

/// GET {endpoint}?q=...&count=k. Understands the Bing Web Search response
/// shape (webPages.value[].name/snippet/url) and a flat
/// {"results":[{"title","snippet","url"}]} shape.
class HttpSearchGateway final : public SearchGateway {
public:
    explicit HttpSearchGateway(GatewayConfig config);
    std::vector<SearchHit> search(const std::string& query, int k) override;

private:
    GatewayConfig config_;
};

/// Maps an HTTP status to the error kind it should raise, or nullopt for 2xx.
std::optional<GatewayError::Kind> classify_http_status(int status);

/// Parses a chat-completions response body.
ChatResponse parse_chat_completion(std::string_view body);
std::vector<SearchHit> parse_search_response(std::string_view body, int k);

} // namespace rate
