#include "rate/agents.hpp"

#include "rate/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace rate {

using nlohmann::json;

std::string_view to_string(Outcome o) {
    switch (o) {
    case Outcome::Win: return "Win";
    case Outcome::Tie: return "Tie";
    case Outcome::Lose: return "Lose";
    }
    return "Tie";
}

Outcome invert(Outcome o) {
    switch (o) {
    case Outcome::Win: return Outcome::Lose;
    case Outcome::Lose: return Outcome::Win;
    case Outcome::Tie: return Outcome::Tie;
    }
    return Outcome::Tie;
}

std::pair<Outcome, Outcome> BidirectionalResult::normalized() const {
    return first <= second ? std::pair{first, second} : std::pair{second, first};
}

// ---- anchors ----------------------------------------------------------------

int round_half_even(double v) {
    const double lower = std::floor(v);
    const double diff = v - lower;
    if (diff < 0.5)
        return static_cast<int>(lower);
    if (diff > 0.5)
        return static_cast<int>(lower) + 1;
    const auto l = static_cast<long long>(lower);
    return static_cast<int>(l % 2 == 0 ? l : l + 1);
}

bool AnchorSet::empty() const {
    return size() == 0;
}

std::size_t AnchorSet::size() const {
    return static_cast<std::size_t>(std::count_if(slots_.begin(), slots_.end(), [](const auto& s) { return s.has_value(); }));
}

const std::optional<Anchor>& AnchorSet::slot(int level) const {
    if (level < 0 || level >= kLevels)
        throw PreconditionError(fmt::format("anchor level {} outside 0..4", level));
    return slots_[static_cast<std::size_t>(level)];
}

std::vector<int> AnchorSet::occupied_levels() const {
    std::vector<int> out;
    for (int l = 0; l < kLevels; ++l)
        if (slots_[static_cast<std::size_t>(l)])
            out.push_back(l);
    return out;
}

void AnchorSet::put(Anchor anchor) {
    if (!(anchor.score >= 0.0 && anchor.score <= 4.0))
        throw PreconditionError(fmt::format("anchor score {} outside [0,4]", anchor.score));
    slots_[static_cast<std::size_t>(round_half_even(anchor.score))] = std::move(anchor);
}

double calibrate(double tentative, double anchor_score, const BidirectionalResult& result) {
    const bool not_higher = tentative <= anchor_score;
    double delta = 0.0;
    switch (const auto [a, b] = result.normalized(); a) {
    case Outcome::Win:
        if (b == Outcome::Win)
            delta = not_higher ? 1.0 : 0.0;
        else if (b == Outcome::Tie)
            delta = not_higher ? 0.5 : 0.0;
        else
            delta = 0.0; // Win-Lose: position bias, no signal
        break;
    case Outcome::Tie:
        delta = b == Outcome::Tie ? 0.0 : -0.5;
        break;
    case Outcome::Lose:
        delta = -1.0;
        break;
    }
    return std::clamp(tentative + delta, 0.0, 4.0);
}

std::pair<int, Anchor> select_anchor(const AnchorSet& anchors, double tentative) {
    std::optional<int> best;
    double best_distance = 0.0;
    for (int level : anchors.occupied_levels()) {
        const double d = std::fabs(anchors.slot(level)->score - tentative);
        if (!best || d < best_distance) {
            best = level;
            best_distance = d;
        }
    }
    if (!best)
        throw PreconditionError("cannot select an anchor from an empty anchor set");
    return {*best, *anchors.slot(*best)};
}

AnchorSet update_anchor_slot(AnchorSet anchors, Anchor finalized) {
    anchors.put(std::move(finalized));
    return anchors;
}

// ---- evaluation -------------------------------------------------------------

namespace {

std::string string_field(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null())
        return {};
    if (!it->is_string())
        throw ParseError(fmt::format("'{}' must be a string", key));
    return it->get<std::string>();
}

int integral_score(const json& v, int lo, int hi) {
    if (!v.is_number())
        throw ParseError("score must be a number");
    const double d = v.get<double>();
    if (d != std::floor(d))
        throw ParseError(fmt::format("score {} is not an integer", d));
    if (d < lo || d > hi)
        throw ParseError(fmt::format("score {} outside {}..{}", d, lo, hi));
    return static_cast<int>(d);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

Verdict parse_verdict(std::string_view reply) {
    const auto j = require_json_object(reply);
    Verdict v;
    const auto score = j.find("score");
    if (score == j.end())
        throw ParseError("verdict lacks 'score'");
    v.score = integral_score(*score, 0, 4);

    const auto conf = j.find("confidence");
    if (conf == j.end() || !conf->is_number())
        throw ParseError("verdict lacks a numeric 'confidence'");
    v.confidence = conf->get<double>();
    if (!(v.confidence >= 0.0 && v.confidence <= 1.0))
        throw ParseError(fmt::format("confidence {} outside [0,1]", v.confidence));

    v.rationale = string_field(j, "rationale");

    if (const auto spans = j.find("error_spans"); spans != j.end() && !spans->is_null()) {
        if (!spans->is_array())
            throw ParseError("'error_spans' must be an array");
        for (const auto& s : *spans) {
            if (s.is_string())
                v.error_spans.push_back({s.get<std::string>(), {}});
            else if (s.is_object())
                v.error_spans.push_back({string_field(s, "span"), string_field(s, "note")});
            else
                throw ParseError("error span must be an object or string");
        }
    }
    if (const auto gaps = j.find("knowledge_gaps"); gaps != j.end() && !gaps->is_null()) {
        if (!gaps->is_array())
            throw ParseError("'knowledge_gaps' must be an array");
        for (const auto& g : *gaps) {
            if (!g.is_string())
                throw ParseError("knowledge gap must be a string");
            v.knowledge_gaps.push_back(g.get<std::string>());
        }
    }
    return v;
}

Verdict EvaluationAgent::evaluate(const std::string& source, const std::string& candidate,
                                  const std::string& instructions, std::span<const KnowledgeNote> notes) const {
    if (source.empty() || candidate.empty())
        throw PreconditionError("evaluation needs a non-empty source and candidate");
    return ask_structured(rt_.chat, prompts::evaluation(source, candidate, instructions, notes), rt_.sampling,
                          parse_verdict, prompts::kJsonReminder);
}

// ---- search -----------------------------------------------------------------

KnowledgeNote SearchAgent::run(const std::string& request) const {
    if (request.empty())
        throw PreconditionError("search request must not be empty");

    auto queries = ask_structured(
        rt_.chat, prompts::search_plan(request, kMaxQueries), rt_.sampling,
        [](std::string_view reply) {
            const auto j = require_json_object(reply);
            const auto it = j.find("queries");
            if (it == j.end() || !it->is_array())
                throw ParseError("expected {\"queries\": [...]}");
            std::vector<std::string> out;
            for (const auto& q : *it) {
                if (!q.is_string())
                    throw ParseError("queries must be strings");
                auto s = q.get<std::string>();
                if (!s.empty() && std::find(out.begin(), out.end(), s) == out.end())
                    out.push_back(std::move(s));
            }
            return out;
        },
        prompts::kJsonReminder);
    if (queries.size() > static_cast<std::size_t>(kMaxQueries))
        queries.resize(kMaxQueries);
    if (queries.empty())
        queries.push_back(request);

    std::vector<SearchHit> hits;
    std::set<std::string> seen;
    for (const auto& q : queries) {
        for (auto& h : rt_.search.search(q, kTopK))
            if (seen.insert(h.url).second)
                hits.push_back(std::move(h));
    }
    if (hits.size() > static_cast<std::size_t>(kTopK))
        hits.resize(kTopK);

    KnowledgeNote note;
    note.topic = request;
    if (hits.empty()) {
        note.summary = "Nothing was found for this request.";
        return note;
    }

    std::string snippets;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        snippets += fmt::format("[{}] {} | {} | {}\n", i + 1, hits[i].title, hits[i].snippet, hits[i].url);
        note.sources.push_back(hits[i].url);
    }
    note.summary = ask_structured(
        rt_.chat, prompts::search_summary(request, snippets), rt_.sampling,
        [](std::string_view reply) {
            auto s = string_field(require_json_object(reply), "summary");
            if (s.empty())
                throw ParseError("expected a non-empty \"summary\"");
            return s;
        },
        prompts::kJsonReminder);
    return note;
}

// ---- comparison -------------------------------------------------------------

Outcome ComparisonAgent::compare_once(const std::string& source, const std::string& a, const std::string& b,
                                      std::span<const KnowledgeNote> notes) const {
    if (a.empty() || b.empty())
        throw PreconditionError("comparison needs two non-empty translations");
    return ask_structured(
        rt_.chat, prompts::comparison(source, a, b, notes), rt_.sampling,
        [](std::string_view reply) {
            const auto w = lower(string_field(require_json_object(reply), "winner"));
            if (w == "a")
                return Outcome::Win;
            if (w == "b")
                return Outcome::Lose;
            if (w == "tie")
                return Outcome::Tie;
            throw ParseError("expected {\"winner\": \"A\" | \"B\" | \"tie\"}");
        },
        prompts::kJsonReminder);
}

BidirectionalResult ComparisonAgent::compare_bidirectional(const std::string& source, const std::string& candidate,
                                                           const std::string& anchor,
                                                           std::span<const KnowledgeNote> notes) const {
    BidirectionalResult r;
    r.first = compare_once(source, candidate, anchor, notes);
    r.second = invert(compare_once(source, anchor, candidate, notes));
    return r;
}

AnchorSet ComparisonAgent::bootstrap_anchors(const std::string& source, std::span<const KnowledgeNote> notes,
                                             const AnchorSet& anchors) const {
    if (!anchors.empty())
        throw PreconditionError("anchor bootstrap is only valid while the anchor set is empty");
    auto texts = ask_structured(
        rt_.chat, prompts::anchor_bootstrap(source, notes), rt_.sampling,
        [](std::string_view reply) {
            const auto j = require_json_object(reply);
            auto poor = string_field(j, "score1_anchor");
            auto good = string_field(j, "score4_anchor");
            if (poor.empty() || good.empty())
                throw ParseError("expected non-empty score1_anchor and score4_anchor");
            return std::pair{std::move(poor), std::move(good)};
        },
        prompts::kJsonReminder);
    AnchorSet out;
    out.put({std::move(texts.first), 1.0});
    out.put({std::move(texts.second), 4.0});
    return out;
}

} // namespace rate
