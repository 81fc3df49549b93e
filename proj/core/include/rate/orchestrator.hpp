#pragma once

#include "rate/agents.hpp"
#include "rate/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rate {

struct SearchAction {
    std::string request;
};

struct EvaluateAction {
    std::string instructions;
    std::optional<std::vector<std::size_t>> note_refs; // nullopt: inject all of memory
};

struct CompareAction {
    std::optional<int> anchor_level; // filled in when the comparison runs
};

struct FinalizeAction {
    std::optional<double> score; // nullopt: use the tentative score
    bool forced = false;         // issued by the round limit, not the Core Agent
};

using AgentAction = std::variant<SearchAction, EvaluateAction, CompareAction, FinalizeAction>;

std::string_view action_name(const AgentAction& a);
nlohmann::json to_json(const AgentAction& a);

struct OrchestratorConfig {
    int max_rounds = 10;
    int reinit_budget = 2;
    bool no_search = false;
    bool no_compare = false;
    SamplingOptions sampling;
};

/// Knowledge and anchors shared by every candidate of one source segment.
struct SegmentMemory {
    std::vector<KnowledgeNote> notes; // append-only
    AnchorSet anchors;
    std::vector<Anchor> staged; // finalized while the anchor set was still cold

    std::optional<std::size_t> find_note(const std::string& topic) const;
};

struct Tentative {
    double score = 0.0;
    double confidence = 0.0;
};

struct RoundRecord {
    int attempt = 1;
    int round = 0;
    std::string state;
    AgentAction action;
    std::string result;
};

struct FailureRecord {
    int attempt = 0;
    int round = 0;
    std::string kind;
    std::string detail;
};

/// Per-candidate loop state; reset on every (re-)initiation.
struct OrchestratorState {
    int round = 1;
    std::optional<Tentative> tentative;
    std::optional<Verdict> last_verdict;
    std::vector<RoundRecord> action_log;

    std::string digest(const SegmentMemory& memory) const;
};

struct Trajectory {
    std::string segment_id;
    std::string system_id;
    std::vector<RoundRecord> rounds;
    std::optional<double> final_score;
    std::vector<FailureRecord> aborted_attempts; // attempts that ended in re-initiation
    std::optional<FailureRecord> failure;        // set when no score was produced

    int reinitiations() const { return static_cast<int>(aborted_attempts.size()); }
};

nlohmann::json to_json(const Trajectory& t);

struct CandidateResult {
    std::optional<double> score;
    Trajectory trajectory;
};

struct SegmentResult {
    std::vector<std::optional<double>> scores; // candidate order
    std::vector<Trajectory> trajectories;
};

/// The Core Agent: a reflective observe-orient-decide-act loop over the three
/// sub-agents. Stateless apart from the gateways; one instance may evaluate
/// distinct segments concurrently.
class Orchestrator {
public:
    Orchestrator(AgentRuntime rt, OrchestratorConfig config);

    const OrchestratorConfig& config() const { return config_; }

    /// Asks the Core Agent LLM for the next action. Illegal or unparseable
    /// decisions get one reprompt, then raise ParseError.
    AgentAction decide_next_action(const OrchestratorState& state, const SegmentMemory& memory,
                                   const SegmentRecord& segment, const CandidateTranslation& candidate) const;

    /// Runs the loop for one candidate, re-initiating from round 1 on
    /// sub-agent failure up to reinit_budget times.
    CandidateResult run_candidate(const SegmentRecord& segment, const CandidateTranslation& candidate,
                                  SegmentMemory& memory) const;

    /// Candidates in dataset order over one fresh SegmentMemory.
    SegmentResult evaluate_segment(const SegmentRecord& segment) const;

private:
    struct AttemptOutcome;
    AttemptOutcome run_attempt(int attempt, const SegmentRecord& segment, const CandidateTranslation& candidate,
                               SegmentMemory& memory, Trajectory& trajectory) const;

    AgentRuntime rt_;
    OrchestratorConfig config_;
};

/// Thread-safe JSON-lines appender.
class JsonlSink {
public:
    explicit JsonlSink(const std::filesystem::path& path);
    void append(const nlohmann::json& record);
    void append_line(std::string_view line);

private:
    std::mutex mu_;
    std::ofstream out_;
};

} // namespace rate
