#pragma once

#include "rate/gateway.hpp"

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace rate::testing {

/// Which agent prompt a transcript belongs to, read from its first line.
enum class Route { Core, Evaluation, SearchPlan, SearchSummary, Comparison, Anchor, GembaDa, GembaMqm, Unknown };

std::string_view to_string(Route r);
Route route_of(const std::vector<ChatMessage>& messages);

/// Pops one canned reply per call from the queue of the matching route.
/// Running dry throws std::logic_error so a broken script cannot be mistaken
/// for a library failure.
class QueueChat final : public ChatGateway {
public:
    QueueChat& push(Route r, std::string reply);
    ChatResponse chat(const ChatRequest& request) override;

    int calls(Route r) const;
    std::size_t pending() const;
    std::vector<ChatRequest> requests() const;

private:
    mutable std::mutex mu_;
    std::map<Route, std::deque<std::string>> queues_;
    std::map<Route, int> calls_;
    std::vector<ChatRequest> requests_;
};

/// Answers every call through a function of (route, request).
class CallbackChat final : public ChatGateway {
public:
    using Fn = std::function<std::string(Route, const ChatRequest&)>;
    explicit CallbackChat(Fn fn) : fn_(std::move(fn)) {}
    ChatResponse chat(const ChatRequest& request) override;

private:
    Fn fn_;
};

/// Forwards to `inner` unless `fault(route, n)` returns an error for the n-th
/// (0-based) call on that route.
class FaultyChat final : public ChatGateway {
public:
    using Fault = std::function<std::optional<GatewayError>(Route, int)>;
    FaultyChat(ChatGateway& inner, Fault fault) : inner_(inner), fault_(std::move(fault)) {}
    ChatResponse chat(const ChatRequest& request) override;
    int injected() const { return injected_; }

private:
    ChatGateway& inner_;
    Fault fault_;
    std::map<Route, int> seen_;
    int injected_ = 0;
};

/// Search provider that counts calls and returns a fixed hit list for any query.
class CountingSearch final : public SearchGateway {
public:
    explicit CountingSearch(std::vector<SearchHit> hits = {}) : hits_(std::move(hits)) {}
    std::vector<SearchHit> search(const std::string& query, int k) override;
    int calls() const { return static_cast<int>(queries_.size()); }
    const std::vector<std::string>& queries() const { return queries_; }

private:
    std::vector<SearchHit> hits_;
    std::vector<std::string> queries_;
};

// Reply builders for each agent's JSON contract.
namespace reply {
std::string search(const std::string& request);
std::string evaluate(const std::string& instructions, std::optional<std::vector<int>> notes = std::nullopt);
std::string compare();
std::string finalize(std::optional<double> score = std::nullopt);
std::string verdict(int score, double confidence, const std::string& rationale = {},
                    const std::vector<std::string>& gaps = {});
std::string plan(const std::vector<std::string>& queries);
std::string summary(const std::string& text);
std::string winner(const std::string& w);
std::string anchors(const std::string& score1, const std::string& score4);
} // namespace reply

} // namespace rate::testing
