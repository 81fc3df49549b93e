#include "rate/orchestrator.hpp"

#include "rate/prompts.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace rate {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string outcome_pair(const BidirectionalResult& r) {
    return fmt::format("{}-{}", to_string(r.first), to_string(r.second));
}

std::string levels(const AnchorSet& anchors) {
    std::string out = "[";
    for (int l : anchors.occupied_levels())
        out += (out.size() > 1 ? "," : "") + std::to_string(l);
    return out + "]";
}

std::string describe(const AgentAction& a) {
    return std::visit(overloaded{
                          [](const SearchAction& s) { return fmt::format("search \"{}\"", s.request); },
                          [](const EvaluateAction& e) { return fmt::format("evaluate \"{}\"", e.instructions); },
                          [](const CompareAction& c) {
                              return c.anchor_level ? fmt::format("compare against level {}", *c.anchor_level)
                                                    : std::string("compare");
                          },
                          [](const FinalizeAction& f) {
                              return f.score ? fmt::format("finalize {}", *f.score) : std::string("finalize");
                          },
                      },
                      a);
}

/// Text shown to the Core Agent each round.
std::string render_state(const OrchestratorState& state, const SegmentMemory& memory, const SegmentRecord& segment,
                         const CandidateTranslation& candidate, int max_rounds) {
    std::string s = fmt::format("Round {} of {}.\n\nSource:\n{}\n\nTranslation under evaluation:\n{}\n\n", state.round,
                                max_rounds, segment.source, candidate.text);
    s += "Memory (knowledge notes):\n" + prompts::render_notes(memory.notes) + "\n";
    if (state.tentative)
        s += fmt::format("Tentative score: {} (confidence {})\n", state.tentative->score, state.tentative->confidence);
    else
        s += "Tentative score: none\n";
    if (const auto& v = state.last_verdict) {
        s += fmt::format("Latest evaluation: score {}, confidence {}. Rationale: {}\n", v->score, v->confidence,
                         v->rationale.empty() ? "(none)" : v->rationale);
        for (const auto& e : v->error_spans)
            s += fmt::format("  error span: \"{}\" {}\n", e.span, e.note);
        for (const auto& g : v->knowledge_gaps)
            s += fmt::format("  knowledge gap: {}\n", g);
    }
    s += memory.anchors.empty() ? std::string("Anchor pool: empty (cold start)\n")
                                : fmt::format("Anchor pool: levels {}\n", levels(memory.anchors));
    s += "History:\n";
    if (state.action_log.empty())
        s += "  (none)\n";
    for (const auto& r : state.action_log)
        s += fmt::format("  round {}: {} -> {}\n", r.round, describe(r.action), r.result);
    return s;
}

std::string failure_kind(const std::exception& e) {
    if (const auto* g = dynamic_cast<const GatewayError*>(&e))
        return fmt::format("gateway:{}", to_string(g->kind()));
    if (dynamic_cast<const ParseError*>(&e))
        return "parse";
    if (dynamic_cast<const PreconditionError*>(&e))
        return "precondition";
    return "error";
}

} // namespace

std::string_view action_name(const AgentAction& a) {
    return std::visit(overloaded{
                          [](const SearchAction&) { return std::string_view("search"); },
                          [](const EvaluateAction&) { return std::string_view("evaluate"); },
                          [](const CompareAction&) { return std::string_view("compare"); },
                          [](const FinalizeAction&) { return std::string_view("finalize"); },
                      },
                      a);
}

json to_json(const AgentAction& a) {
    json j;
    j["type"] = action_name(a);
    std::visit(overloaded{
                   [&](const SearchAction& s) { j["request"] = s.request; },
                   [&](const EvaluateAction& e) {
                       j["instructions"] = e.instructions;
                       j["notes"] = e.note_refs ? json(*e.note_refs) : json(nullptr);
                   },
                   [&](const CompareAction& c) {
                       j["anchor_level"] = c.anchor_level ? json(*c.anchor_level) : json(nullptr);
                   },
                   [&](const FinalizeAction& f) {
                       j["score"] = f.score ? json(*f.score) : json(nullptr);
                       j["forced"] = f.forced;
                   },
               },
               a);
    return j;
}

std::optional<std::size_t> SegmentMemory::find_note(const std::string& topic) const {
    for (std::size_t i = 0; i < notes.size(); ++i)
        if (notes[i].topic == topic)
            return i;
    return std::nullopt;
}

std::string OrchestratorState::digest(const SegmentMemory& memory) const {
    const auto tent = tentative ? fmt::format("{}@{}", tentative->score, tentative->confidence) : std::string("none");
    return fmt::format("round={} tentative={} memory={} anchors={}", round, tent, memory.notes.size(),
                       levels(memory.anchors));
}

json to_json(const Trajectory& t) {
    auto failure = [](const FailureRecord& f) {
        return json{{"attempt", f.attempt}, {"round", f.round}, {"kind", f.kind}, {"detail", f.detail}};
    };
    json j;
    j["segment_id"] = t.segment_id;
    j["system_id"] = t.system_id;
    j["final_score"] = t.final_score ? json(*t.final_score) : json(nullptr);
    j["failed"] = !t.final_score.has_value();
    j["reinitiations"] = t.reinitiations();
    j["rounds"] = json::array();
    for (const auto& r : t.rounds)
        j["rounds"].push_back(
            {{"attempt", r.attempt}, {"round", r.round}, {"state", r.state}, {"action", to_json(r.action)}, {"result", r.result}});
    j["aborted_attempts"] = json::array();
    for (const auto& f : t.aborted_attempts)
        j["aborted_attempts"].push_back(failure(f));
    j["failure"] = t.failure ? failure(*t.failure) : json(nullptr);
    return j;
}

Orchestrator::Orchestrator(AgentRuntime rt, OrchestratorConfig config) : rt_(rt), config_(config) {
    if (config_.max_rounds < 1)
        throw PreconditionError("max_rounds must be at least 1");
    if (config_.reinit_budget < 0)
        throw PreconditionError("re-initiation budget must be non-negative");
}

AgentAction Orchestrator::decide_next_action(const OrchestratorState& state, const SegmentMemory& memory,
                                             const SegmentRecord& segment,
                                             const CandidateTranslation& candidate) const {
    if (state.round >= config_.max_rounds)
        throw PreconditionError("the round limit forces finalize; the Core Agent is not consulted");

    const prompts::CoreMenu menu{!config_.no_search, !config_.no_compare};
    std::vector<ChatMessage> messages{
        {Role::System, prompts::core_system(menu)},
        {Role::User, render_state(state, memory, segment, candidate, config_.max_rounds)},
    };

    auto parse = [&](std::string_view reply) -> AgentAction {
        const auto j = require_json_object(reply);
        const auto kind = j.value("action", std::string{});
        if (kind == "search") {
            if (!menu.search)
                throw ParseError("the search action is not available");
            SearchAction a{j.value("request", std::string{})};
            if (a.request.empty())
                throw ParseError("search needs a non-empty \"request\"");
            return a;
        }
        if (kind == "evaluate") {
            EvaluateAction a;
            a.instructions = j.value("instructions", std::string{});
            if (const auto n = j.find("notes"); n != j.end() && !n->is_null()) {
                if (!n->is_array())
                    throw ParseError("\"notes\" must be an array of memory indices");
                std::vector<std::size_t> refs;
                for (const auto& idx : *n) {
                    if (!idx.is_number_unsigned() || idx.get<std::size_t>() >= memory.notes.size())
                        throw ParseError(fmt::format("note index {} does not exist in memory", idx.dump()));
                    refs.push_back(idx.get<std::size_t>());
                }
                a.note_refs = std::move(refs);
            }
            return a;
        }
        if (kind == "compare") {
            if (!menu.compare)
                throw ParseError("the compare action is not available");
            if (state.round == 1)
                throw ParseError("compare is not available in round 1");
            if (!state.tentative)
                throw ParseError("compare needs a tentative score; evaluate first");
            return CompareAction{};
        }
        if (kind == "finalize") {
            if (!state.tentative)
                throw ParseError("finalize needs a tentative score; evaluate first");
            FinalizeAction a;
            if (const auto s = j.find("score"); s != j.end() && !s->is_null()) {
                if (!s->is_number() || s->get<double>() < 0.0 || s->get<double>() > 4.0)
                    throw ParseError("finalize score must be a number in [0,4]");
                a.score = s->get<double>();
            }
            return a;
        }
        throw ParseError(fmt::format("unknown action \"{}\"", kind));
    };
    return ask_structured(rt_.chat, std::move(messages), config_.sampling, parse, prompts::kJsonReminder);
}

struct Orchestrator::AttemptOutcome {
    std::optional<double> score;
    std::optional<FailureRecord> failure;
    bool retryable = true;
};

Orchestrator::AttemptOutcome Orchestrator::run_attempt(int attempt, const SegmentRecord& segment,
                                                       const CandidateTranslation& candidate, SegmentMemory& memory,
                                                       Trajectory& trajectory) const {
    const EvaluationAgent evaluator(rt_);
    const SearchAgent searcher(rt_);
    const ComparisonAgent comparer(rt_);

    OrchestratorState state;
    for (int round = 1; round <= config_.max_rounds; ++round) {
        state.round = round;
        const auto digest = state.digest(memory);
        try {
            AgentAction action = round == config_.max_rounds
                                     ? AgentAction{FinalizeAction{std::nullopt, true}}
                                     : decide_next_action(state, memory, segment, candidate);
            std::string result;
            std::optional<double> final_score;

            std::visit(overloaded{
                           [&](SearchAction& a) {
                               if (const auto hit = memory.find_note(a.request)) {
                                   result = fmt::format("already in memory as note [{}]", *hit);
                                   return;
                               }
                               memory.notes.push_back(searcher.run(a.request));
                               const auto& note = memory.notes.back();
                               result = fmt::format("note [{}] ({} sources): {}", memory.notes.size() - 1,
                                                    note.sources.size(), note.summary);
                           },
                           [&](EvaluateAction& a) {
                               std::vector<KnowledgeNote> notes;
                               if (a.note_refs) {
                                   for (auto i : *a.note_refs)
                                       notes.push_back(memory.notes.at(i));
                               } else {
                                   notes = memory.notes;
                               }
                               auto v = evaluator.evaluate(segment.source, candidate.text, a.instructions, notes);
                               state.tentative = Tentative{static_cast<double>(v.score), v.confidence};
                               result = fmt::format("score {} confidence {} gaps {}", v.score, v.confidence,
                                                    v.knowledge_gaps.size());
                               state.last_verdict = std::move(v);
                           },
                           [&](CompareAction& a) {
                               std::string boot;
                               if (memory.anchors.empty()) {
                                   memory.anchors = comparer.bootstrap_anchors(segment.source, memory.notes, memory.anchors);
                                   for (auto& s : memory.staged)
                                       memory.anchors = update_anchor_slot(std::move(memory.anchors), std::move(s));
                                   memory.staged.clear();
                                   boot = fmt::format("bootstrapped anchors {}; ", levels(memory.anchors));
                               }
                               const auto [level, anchor] = select_anchor(memory.anchors, state.tentative->score);
                               a.anchor_level = level;
                               const auto r =
                                   comparer.compare_bidirectional(segment.source, candidate.text, anchor.text, memory.notes);
                               const double before = state.tentative->score;
                               state.tentative->score = calibrate(before, anchor.score, r);
                               result = fmt::format("{}anchor level {} (score {}): {} -> {} => {}", boot, level,
                                                    anchor.score, outcome_pair(r), before, state.tentative->score);
                           },
                           [&](FinalizeAction& a) {
                               if (!state.tentative) {
                                   // only reachable through the round limit
                                   throw PreconditionError("round limit reached without a tentative score");
                               }
                               final_score = a.score.value_or(state.tentative->score);
                               if (a.forced)
                                   a.score = final_score;
                               result = fmt::format("final score {}", *final_score);
                           },
                       },
                       action);

            const RoundRecord record{attempt, round, digest, action, std::move(result)};
            state.action_log.push_back(record);
            trajectory.rounds.push_back(record);

            if (final_score) {
                Anchor finalized{candidate.text, *final_score};
                if (memory.anchors.empty())
                    memory.staged.push_back(std::move(finalized));
                else
                    memory.anchors = update_anchor_slot(std::move(memory.anchors), std::move(finalized));
                return {final_score, std::nullopt, true};
            }
        } catch (const Error& e) {
            const bool at_limit = round == config_.max_rounds && !state.tentative;
            return {std::nullopt, FailureRecord{attempt, round, failure_kind(e), e.what()}, !at_limit};
        }
    }
    return {std::nullopt, FailureRecord{attempt, config_.max_rounds, "error", "loop ended without finalize"}, false};
}

CandidateResult Orchestrator::run_candidate(const SegmentRecord& segment, const CandidateTranslation& candidate,
                                            SegmentMemory& memory) const {
    CandidateResult out;
    out.trajectory.segment_id = segment.id;
    out.trajectory.system_id = candidate.system_id;

    const int attempts = 1 + config_.reinit_budget;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto outcome = run_attempt(attempt, segment, candidate, memory, out.trajectory);
        if (outcome.score) {
            out.score = outcome.score;
            out.trajectory.final_score = outcome.score;
            return out;
        }
        if (!outcome.retryable || attempt == attempts) {
            out.trajectory.failure = std::move(outcome.failure);
            return out;
        }
        out.trajectory.aborted_attempts.push_back(std::move(*outcome.failure));
    }
    return out;
}

SegmentResult Orchestrator::evaluate_segment(const SegmentRecord& segment) const {
    SegmentMemory memory;
    SegmentResult out;
    for (const auto& c : segment.candidates) {
        auto r = run_candidate(segment, c, memory);
        out.scores.push_back(r.score);
        out.trajectories.push_back(std::move(r.trajectory));
    }
    return out;
}

JsonlSink::JsonlSink(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_)
        throw Error("cannot open " + path.string() + " for writing");
}

void JsonlSink::append(const json& record) {
    append_line(record.dump());
}

void JsonlSink::append_line(std::string_view line) {
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
    if (!out_)
        throw Error("write failed");
}

} // namespace rate
