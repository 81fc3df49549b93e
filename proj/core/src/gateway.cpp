#include "rate/gateway.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace rate {

using nlohmann::json;

std::string_view to_string(Role r) {
    switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string_view to_string(GatewayError::Kind k) {
    switch (k) {
    case GatewayError::Kind::Timeout: return "Timeout";
    case GatewayError::Kind::RateLimited: return "RateLimited";
    case GatewayError::Kind::Malformed: return "Malformed";
    case GatewayError::Kind::Transport: return "Transport";
    }
    return "Transport";
}

GatewayError::GatewayError(Kind kind, std::string detail)
    : Error(fmt::format("{}: {}", to_string(kind), detail)), kind_(kind), detail_(std::move(detail)) {}

std::string transcript_hash(const std::vector<ChatMessage>& messages) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](std::string_view bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& m : messages) {
        feed(to_string(m.role));
        feed("\x1f");
        feed(m.content);
        feed("\x1e");
    }
    return fmt::format("{:016x}", h);
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RetryingChatGateway::RetryingChatGateway(std::shared_ptr<ChatGateway> inner, RetryPolicy policy, Sleeper sleep)
    : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleep)) {}

ChatResponse RetryingChatGateway::chat(const ChatRequest& request) {
    int attempts = 0;
    auto resp = with_retry(policy_, sleep_, [&] { return inner_->chat(request); }, &attempts);
    resp.attempts = attempts;
    return resp;
}

RetryingSearchGateway::RetryingSearchGateway(std::shared_ptr<SearchGateway> inner, RetryPolicy policy, Sleeper sleep)
    : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleep)) {}

std::vector<SearchHit> RetryingSearchGateway::search(const std::string& query, int k) {
    return with_retry(policy_, sleep_, [&] { return inner_->search(query, k); });
}

// ---- scripted ---------------------------------------------------------------

ScriptedChatGateway::ScriptedChatGateway(std::map<std::string, std::string> responses)
    : responses_(std::move(responses)) {}

void ScriptedChatGateway::add(std::string hash, std::string response) {
    std::lock_guard lock(mu_);
    responses_[std::move(hash)] = std::move(response);
}

ChatResponse ScriptedChatGateway::chat(const ChatRequest& request) {
    if (request.messages.empty())
        throw GatewayError(GatewayError::Kind::Malformed, "empty transcript");
    const auto hash = transcript_hash(request.messages);
    std::lock_guard lock(mu_);
    log_.push_back(request.messages);
    const auto it = responses_.find(hash);
    if (it == responses_.end())
        throw GatewayError(GatewayError::Kind::Malformed, "no fixture for transcript hash " + hash);
    return {it->second, "scripted", {0, 0}, 1};
}

std::vector<std::vector<ChatMessage>> ScriptedChatGateway::log() const {
    std::lock_guard lock(mu_);
    return log_;
}

ScriptedSearchGateway::ScriptedSearchGateway(std::map<std::string, std::vector<SearchHit>> hits)
    : hits_(std::move(hits)) {}

void ScriptedSearchGateway::add(std::string query, std::vector<SearchHit> hits) {
    std::lock_guard lock(mu_);
    hits_[std::move(query)] = std::move(hits);
}

std::vector<SearchHit> ScriptedSearchGateway::search(const std::string& query, int k) {
    if (query.empty())
        throw GatewayError(GatewayError::Kind::Malformed, "empty search query");
    std::lock_guard lock(mu_);
    queries_.push_back(query);
    const auto it = hits_.find(query);
    if (it == hits_.end() || k <= 0)
        return {};
    const auto n = std::min(it->second.size(), static_cast<std::size_t>(k));
    return {it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<std::string> ScriptedSearchGateway::queries() const {
    std::lock_guard lock(mu_);
    return queries_;
}

namespace {

json hit_to_json(const SearchHit& h) {
    return {{"title", h.title}, {"snippet", h.snippet}, {"url", h.url}};
}

SearchHit hit_from_json(const json& j) {
    SearchHit h{j.value("title", ""), j.value("snippet", ""), j.value("url", "")};
    if (h.url.empty())
        throw GatewayError(GatewayError::Kind::Malformed, "search hit without url");
    return h;
}

} // namespace

Fixtures parse_fixtures(std::string_view jsonl) {
    Fixtures f;
    std::istringstream in{std::string(jsonl)};
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto j = json::parse(text);
            if (j.contains("transcript_hash")) {
                f.chat[j.at("transcript_hash").get<std::string>()] = j.at("response").get<std::string>();
            } else if (j.contains("query")) {
                std::vector<SearchHit> hits;
                for (const auto& h : j.at("response"))
                    hits.push_back(hit_from_json(h));
                f.search[j.at("query").get<std::string>()] = std::move(hits);
            } else {
                throw SchemaError(line, "<root>", "expected transcript_hash or query");
            }
        } catch (const json::exception& e) {
            throw SchemaError(line, "<root>", e.what());
        } catch (const GatewayError& e) {
            throw SchemaError(line, "response", e.detail());
        }
    }
    return f;
}

Fixtures load_fixtures(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open fixture file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_fixtures(buffer.str());
}

std::string serialize_fixtures(const Fixtures& f) {
    std::string out;
    for (const auto& [hash, response] : f.chat)
        out += json{{"transcript_hash", hash}, {"response", response}}.dump() + "\n";
    for (const auto& [query, hits] : f.search) {
        json arr = json::array();
        for (const auto& h : hits)
            arr.push_back(hit_to_json(h));
        out += json{{"query", query}, {"response", arr}}.dump() + "\n";
    }
    return out;
}

void FixtureRecorder::record_chat(const std::vector<ChatMessage>& transcript, const std::string& response) {
    std::lock_guard lock(mu_);
    fixtures_.chat[transcript_hash(transcript)] = response;
}

void FixtureRecorder::record_search(const std::string& query, const std::vector<SearchHit>& hits) {
    std::lock_guard lock(mu_);
    auto& stored = fixtures_.search[query];
    if (hits.size() > stored.size())
        stored = hits;
}

Fixtures FixtureRecorder::fixtures() const {
    std::lock_guard lock(mu_);
    return fixtures_;
}

RecordingChatGateway::RecordingChatGateway(std::shared_ptr<ChatGateway> inner, std::shared_ptr<FixtureRecorder> recorder)
    : inner_(std::move(inner)), recorder_(std::move(recorder)) {}

ChatResponse RecordingChatGateway::chat(const ChatRequest& request) {
    auto resp = inner_->chat(request);
    recorder_->record_chat(request.messages, resp.content);
    return resp;
}

RecordingSearchGateway::RecordingSearchGateway(std::shared_ptr<SearchGateway> inner,
                                               std::shared_ptr<FixtureRecorder> recorder)
    : inner_(std::move(inner)), recorder_(std::move(recorder)) {}

std::vector<SearchHit> RecordingSearchGateway::search(const std::string& query, int k) {
    auto hits = inner_->search(query, k);
    if (!hits.empty())
        recorder_->record_search(query, hits);
    return hits;
}

// ---- live HTTP --------------------------------------------------------------

std::optional<GatewayError::Kind> classify_http_status(int status) {
    if (status >= 200 && status < 300)
        return std::nullopt;
    if (status == 429)
        return GatewayError::Kind::RateLimited;
    if (status == 408 || status == 504)
        return GatewayError::Kind::Timeout;
    if (status >= 500)
        return GatewayError::Kind::Transport;
    return GatewayError::Kind::Malformed;
}

namespace {

struct SplitUrl {
    std::string origin; // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw GatewayError(GatewayError::Kind::Malformed, "endpoint is not an absolute URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos)
        return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

void configure(httplib::Client& cli, double timeout_s) {
    const auto secs = static_cast<time_t>(timeout_s);
    const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
}

[[noreturn]] void raise_transport(httplib::Error err, const std::string& what) {
    const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                          ? GatewayError::Kind::Timeout
                          : GatewayError::Kind::Transport;
    throw GatewayError(kind, what + ": " + httplib::to_string(err));
}

void check_status(int status, const std::string& body) {
    if (const auto kind = classify_http_status(status))
        throw GatewayError(*kind, fmt::format("HTTP {}: {}", status, body.substr(0, 200)));
}

} // namespace

ChatResponse parse_chat_completion(std::string_view body) {
    try {
        const auto j = json::parse(body);
        const auto& msg = j.at("choices").at(0).at("message");
        ChatResponse resp;
        const auto& content = msg.at("content");
        resp.content = content.is_null() ? std::string{} : content.get<std::string>();
        resp.model_id = j.value("model", "");
        if (const auto u = j.find("usage"); u != j.end() && u->is_object()) {
            resp.token_usage.prompt = u->value("prompt_tokens", 0);
            resp.token_usage.completion = u->value("completion_tokens", 0);
        }
        return resp;
    } catch (const json::exception& e) {
        throw GatewayError(GatewayError::Kind::Malformed, std::string("chat completion body: ") + e.what());
    }
}

std::vector<SearchHit> parse_search_response(std::string_view body, int k) {
    std::vector<SearchHit> hits;
    try {
        const auto j = json::parse(body);
        const json* items = nullptr;
        if (const auto wp = j.find("webPages"); wp != j.end())
            items = &wp->at("value");
        else if (const auto r = j.find("results"); r != j.end())
            items = &*r;
        if (!items)
            return hits;
        for (const auto& it : *items) {
            if (static_cast<int>(hits.size()) >= k)
                break;
            SearchHit h;
            h.title = it.contains("name") ? it.value("name", "") : it.value("title", "");
            h.snippet = it.value("snippet", "");
            h.url = it.value("url", "");
            if (!h.url.empty())
                hits.push_back(std::move(h));
        }
    } catch (const json::exception& e) {
        throw GatewayError(GatewayError::Kind::Malformed, std::string("search body: ") + e.what());
    }
    return hits;
}

HttpChatGateway::HttpChatGateway(GatewayConfig config) : config_(std::move(config)) {}

ChatResponse HttpChatGateway::chat(const ChatRequest& request) {
    const auto url = split_url(config_.llm_endpoint);
    httplib::Client cli(url.origin);
    configure(cli, config_.timeout_s);

    json body;
    body["model"] = config_.llm_model;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output;
    body["messages"] = json::array();
    for (const auto& m : request.messages)
        body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});

    httplib::Headers headers;
    if (!config_.llm_api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.llm_api_key);

    auto res = cli.Post(url.path, headers, body.dump(), "application/json");
    if (!res)
        raise_transport(res.error(), "chat request to " + url.origin);
    check_status(res->status, res->body);
    return parse_chat_completion(res->body);
}

HttpSearchGateway::HttpSearchGateway(GatewayConfig config) : config_(std::move(config)) {}

std::vector<SearchHit> HttpSearchGateway::search(const std::string& query, int k) {
    if (query.empty())
        throw GatewayError(GatewayError::Kind::Malformed, "empty search query");
    const auto url = split_url(config_.search_endpoint);
    httplib::Client cli(url.origin);
    configure(cli, config_.timeout_s);

    httplib::Params params{{"q", query}, {"count", std::to_string(k)}};
    httplib::Headers headers;
    if (!config_.search_api_key.empty()) {
        headers.emplace("Ocp-Apim-Subscription-Key", config_.search_api_key);
        headers.emplace("Authorization", "Bearer " + config_.search_api_key);
    }
    auto res = cli.Get(url.path, params, headers);
    if (!res)
        raise_transport(res.error(), "search request to " + url.origin);
    check_status(res->status, res->body);
    return parse_search_response(res->body, k);
}

} // namespace rate
