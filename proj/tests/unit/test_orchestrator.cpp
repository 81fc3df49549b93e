#include "scenarios.hpp"
#include "test_gateways.hpp"

#include "rate/orchestrator.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace rate;
using namespace rate::testing;

namespace {

std::vector<std::string> actions(const Trajectory& t) {
    std::vector<std::string> out;
    for (const auto& r : t.rounds)
        out.emplace_back(action_name(r.action));
    return out;
}

SegmentRecord single(const std::string& id, const std::string& source, int candidates = 1) {
    SegmentRecord seg;
    seg.id = id;
    seg.source = source;
    for (int i = 0; i < candidates; ++i)
        seg.candidates.push_back({"sys" + std::to_string(i + 1), "candidate " + std::to_string(i + 1), {}, {}});
    return seg;
}

struct Rig {
    QueueChat chat;
    ScriptedSearchGateway search;
    OrchestratorConfig config;
    Orchestrator make() { return Orchestrator({chat, search, {}}, config); }
};

} // namespace

TEST_CASE("published trajectories, end to end") {
    Rig r;
    script_pun_trajectories(r.chat);
    script_pun_search(r.search);
    const auto seg = pun_segment();
    const auto res = r.make().evaluate_segment(seg);
    CHECK(r.chat.pending() == 0);
    REQUIRE(res.scores.size() == 3);
    CHECK(res.scores[0] == 0.0);
    CHECK(res.scores[1] == 4.0);
    CHECK(res.scores[2] == 2.0);
    CHECK(actions(res.trajectories[0]) == std::vector<std::string>{"search", "evaluate", "finalize"});
    CHECK(actions(res.trajectories[1]) == std::vector<std::string>{"evaluate", "finalize"});
    CHECK(actions(res.trajectories[2]) == std::vector<std::string>{"evaluate", "evaluate", "compare", "finalize"});
    CHECK(r.chat.calls(Route::SearchPlan) == 1);
    CHECK(r.search.queries().size() == 2);

    const auto& cmp = std::get<CompareAction>(res.trajectories[2].rounds[2].action);
    CHECK(cmp.anchor_level == 1);
    CHECK(res.trajectories[2].rounds[2].result.find("bootstrapped") != std::string::npos);
}

TEST_CASE("the second candidate sees the note in its evaluation prompt") {
    Rig r;
    script_pun_trajectories(r.chat);
    script_pun_search(r.search);
    r.make().evaluate_segment(pun_segment());
    int evaluations = 0;
    for (const auto& req : r.chat.requests())
        if (route_of(req.messages) == Route::Evaluation && ++evaluations == 2)
            CHECK(req.messages[1].content.find("homophonic pun") != std::string::npos);
    CHECK(evaluations == 4);
}

TEST_CASE("perpetual low confidence forces finalize at the round limit") {
    Rig r;
    for (int i = 0; i < 9; ++i)
        r.chat.push(Route::Core, reply::evaluate("try again")).push(Route::Evaluation, reply::verdict(2, 0.1));
    auto seg = single("s", "src");
    SegmentMemory memory;
    const auto res = r.make().run_candidate(seg, seg.candidates[0], memory);
    REQUIRE(res.score.has_value());
    CHECK(*res.score == 2.0);
    REQUIRE(res.trajectory.rounds.size() == 10);
    const auto& last = res.trajectory.rounds.back();
    CHECK(last.round == 10);
    CHECK(std::get<FinalizeAction>(last.action).forced);
    CHECK(r.chat.calls(Route::Core) == 9);
}

TEST_CASE("a smaller round limit is honoured") {
    Rig r;
    r.config.max_rounds = 3;
    for (int i = 0; i < 2; ++i)
        r.chat.push(Route::Core, reply::evaluate("again")).push(Route::Evaluation, reply::verdict(3, 0.2));
    auto seg = single("s", "src");
    SegmentMemory memory;
    const auto res = r.make().run_candidate(seg, seg.candidates[0], memory);
    CHECK(res.trajectory.rounds.size() == 3);
    CHECK(*res.score == 3.0);
}

TEST_CASE("round limit without a tentative score is a failure, not a guess") {
    Rig r;
    r.config.max_rounds = 2;
    r.chat.push(Route::Core, reply::search("x")).push(Route::SearchPlan, reply::plan({"x"}));
    auto seg = single("s", "src");
    SegmentMemory memory;
    const auto res = r.make().run_candidate(seg, seg.candidates[0], memory);
    CHECK_FALSE(res.score.has_value());
    REQUIRE(res.trajectory.failure.has_value());
    CHECK(res.trajectory.reinitiations() == 0);
    CHECK(res.trajectory.failure->kind == "precondition");
}

TEST_CASE("illegal decisions are reprompted") {
    Rig r;
    r.chat.push(Route::Core, reply::compare())  // compare at round 1
        .push(Route::Core, reply::evaluate("score"))
        .push(Route::Evaluation, reply::verdict(3, 0.9))
        .push(Route::Core, reply::finalize(3.5));
    auto seg = single("s", "src");
    SegmentMemory memory;
    const auto res = r.make().run_candidate(seg, seg.candidates[0], memory);
    CHECK(*res.score == 3.5);
    CHECK(actions(res.trajectory) == std::vector<std::string>{"evaluate", "finalize"});
    const auto reqs = r.chat.requests();
    CHECK(reqs[1].messages.back().content.find("round 1") != std::string::npos);

    OrchestratorState state;
    SegmentMemory empty;
    for (const auto& bad : {reply::finalize(), reply::compare(), reply::evaluate("x", std::vector<int>{0}),
                            reply::search(""), std::string(R"({"action":"dance"})"), std::string("no json")}) {
        QueueChat q;
        q.push(Route::Core, bad).push(Route::Core, bad);
        ScriptedSearchGateway s;
        CHECK_THROWS_AS(Orchestrator({q, s, {}}, {}).decide_next_action(state, empty, seg, seg.candidates[0]), ParseError);
    }
    state.round = 10;
    QueueChat q;
    ScriptedSearchGateway s;
    CHECK_THROWS_AS(Orchestrator({q, s, {}}, {}).decide_next_action(state, empty, seg, seg.candidates[0]),
                    PreconditionError);
}

TEST_CASE("ablation removes actions from the menu") {
    auto seg = single("s", "src");
    SegmentMemory memory;
    OrchestratorState state;
    state.round = 2;
    state.tentative = Tentative{2, 0.5};
    for (const auto& [no_search, no_compare, bad] :
         {std::tuple{true, false, reply::search("x")}, std::tuple{false, true, reply::compare()}}) {
        QueueChat q;
        q.push(Route::Core, bad).push(Route::Core, bad);
        ScriptedSearchGateway s;
        OrchestratorConfig cfg;
        cfg.no_search = no_search;
        cfg.no_compare = no_compare;
        CHECK_THROWS_AS(Orchestrator({q, s, {}}, cfg).decide_next_action(state, memory, seg, seg.candidates[0]),
                        ParseError);
        const auto sys = q.requests().at(0).messages.at(0).content;
        CHECK(sys.find(no_search ? "\"search\"" : "\"compare\"") == std::string::npos);
    }
}

TEST_CASE("duplicate search requests are answered from memory") {
    Rig r;
    r.chat.push(Route::Core, reply::search("slang"))
        .push(Route::SearchPlan, reply::plan({"q"}))
        .push(Route::Core, reply::search("slang"))
        .push(Route::Core, reply::evaluate("go"))
        .push(Route::Evaluation, reply::verdict(1, 0.9))
        .push(Route::Core, reply::finalize());
    auto seg = single("s", "src");
    SegmentMemory memory;
    const auto res = r.make().run_candidate(seg, seg.candidates[0], memory);
    CHECK(*res.score == 1.0);
    CHECK(r.chat.calls(Route::SearchPlan) == 1);
    CHECK(memory.notes.size() == 1);
    CHECK(res.trajectory.rounds[1].result.find("already in memory") != std::string::npos);
}

TEST_CASE("re-initiation after a gateway failure at round 3") {
    QueueChat inner;
    inner.push(Route::Core, reply::search("slang"))
        .push(Route::SearchPlan, reply::plan({"q"}))
        .push(Route::Core, reply::evaluate("go"))
        .push(Route::Evaluation, reply::verdict(2, 0.4))
        .push(Route::Core, reply::evaluate("again"))
        // the failed round-3 evaluation never reaches the queue
        .push(Route::Core, reply::evaluate("fresh start"))
        .push(Route::Evaluation, reply::verdict(3, 0.9))
        .push(Route::Core, reply::finalize());
    FaultyChat chat(inner, [](Route r, int n) -> std::optional<GatewayError> {
        if (r == Route::Evaluation && n == 1)
            return GatewayError(GatewayError::Kind::Timeout, "injected");
        return std::nullopt;
    });
    ScriptedSearchGateway search;
    auto seg = single("s", "src");
    SegmentMemory memory;
    const auto res = Orchestrator({chat, search, {}}, {}).run_candidate(seg, seg.candidates[0], memory);
    CHECK(*res.score == 3.0);
    CHECK(res.trajectory.reinitiations() == 1);
    CHECK(res.trajectory.aborted_attempts[0].round == 3);
    CHECK(res.trajectory.aborted_attempts[0].kind == "gateway:Timeout");
    const auto& second = res.trajectory.rounds.at(2);
    CHECK(second.attempt == 2);
    CHECK(second.round == 1);
    CHECK(second.state.find("memory=1") != std::string::npos);
    CHECK(memory.notes.size() == 1);
    CHECK(inner.pending() == 0);
}

TEST_CASE("persistent failure ends after three attempts") {
    QueueChat inner;
    FaultyChat chat(inner, [](Route, int) -> std::optional<GatewayError> {
        return GatewayError(GatewayError::Kind::Transport, "down");
    });
    ScriptedSearchGateway search;
    auto seg = single("s", "src");
    SegmentMemory memory;
    const auto res = Orchestrator({chat, search, {}}, {}).run_candidate(seg, seg.candidates[0], memory);
    CHECK_FALSE(res.score.has_value());
    CHECK(res.trajectory.reinitiations() == 2);
    REQUIRE(res.trajectory.failure.has_value());
    CHECK(res.trajectory.failure->attempt == 3);
    CHECK(chat.injected() == 3);
}

TEST_CASE("a finalize that cannot be parsed takes the same path") {
    QueueChat chat;
    chat.push(Route::Core, reply::evaluate("go"))
        .push(Route::Evaluation, reply::verdict(2, 0.9))
        .push(Route::Core, R"({"action":"finalize","score":9})")
        .push(Route::Core, R"({"action":"finalize","score":9})")
        .push(Route::Core, reply::evaluate("go"))
        .push(Route::Evaluation, reply::verdict(2, 0.9))
        .push(Route::Core, reply::finalize());
    ScriptedSearchGateway search;
    auto seg = single("s", "src");
    SegmentMemory memory;
    const auto res = Orchestrator({chat, search, {}}, {}).run_candidate(seg, seg.candidates[0], memory);
    CHECK(*res.score == 2.0);
    CHECK(res.trajectory.reinitiations() == 1);
    CHECK(res.trajectory.aborted_attempts[0].kind == "parse");
}

TEST_CASE("segments are isolated even with identical sources") {
    CountingSearch search(simulated_hits());
    CallbackChat chat(simulated_judge());
    const Orchestrator orch({chat, search, {}}, {});
    orch.evaluate_segment(single("a", "same source", 2));
    orch.evaluate_segment(single("b", "same source", 2));
    CHECK(search.calls() == 2);
}

TEST_CASE("trajectory json") {
    Rig r;
    script_pun_trajectories(r.chat);
    script_pun_search(r.search);
    const auto res = r.make().evaluate_segment(pun_segment());
    const auto j = to_json(res.trajectories[2]);
    CHECK(j["segment_id"] == "sns-0001");
    CHECK(j["system_id"] == "sys3");
    CHECK(j["final_score"] == 2.0);
    CHECK(j["failed"] == false);
    CHECK(j["reinitiations"] == 0);
    CHECK(j["rounds"].size() == 4);
    CHECK(j["rounds"][2]["action"]["type"] == "compare");
    CHECK(j["rounds"][2]["action"]["anchor_level"] == 1);
    CHECK(j["failure"].is_null());
}
