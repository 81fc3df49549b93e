#pragma once

#include "rate/gateway.hpp"
#include "rate/structured.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rate {

struct ErrorSpan {
    std::string span;
    std::string note;
};

/// Pointwise judgement returned by the Evaluation Agent.
struct Verdict {
    int score = 0;            // 0..4
    double confidence = 0.0;  // 0..1
    std::string rationale;
    std::vector<ErrorSpan> error_spans;
    std::vector<std::string> knowledge_gaps;
};

/// Background knowledge summarised by the Search Agent.
struct KnowledgeNote {
    std::string topic; // the Core Agent's request text
    std::string summary;
    std::vector<std::string> sources;
};

/// Candidate relative to anchor.
enum class Outcome { Win, Tie, Lose };

std::string_view to_string(Outcome o);
Outcome invert(Outcome o);

/// Unordered pair of outcomes from the two presentation orders.
struct BidirectionalResult {
    Outcome first = Outcome::Tie;  // candidate shown first
    Outcome second = Outcome::Tie; // anchor shown first, already candidate-relative

    /// Canonical ordering (Win < Tie < Lose) so {Win,Lose} == {Lose,Win}.
    std::pair<Outcome, Outcome> normalized() const;
    friend bool operator==(const BidirectionalResult& a, const BidirectionalResult& b) {
        return a.normalized() == b.normalized();
    }
};

struct Anchor {
    std::string text;
    double score = 0.0;
};

/// Score-level anchor slots 0..4; a stored score rounds (half to even) to its level.
class AnchorSet {
public:
    static constexpr int kLevels = 5;

    bool empty() const;
    std::size_t size() const;
    const std::optional<Anchor>& slot(int level) const;
    std::vector<int> occupied_levels() const;

    /// Stores `anchor` in the slot its score rounds to.
    void put(Anchor anchor);

private:
    std::array<std::optional<Anchor>, kLevels> slots_;
};

int round_half_even(double v);

/// Adjusts a tentative score after a bidirectional comparison against an
/// anchor. Upgrades only apply when the tentative score does not already
/// exceed the anchor; downgrades always apply; the result stays in [0,4].
double calibrate(double tentative, double anchor_score, const BidirectionalResult& result);

/// Occupied slot whose score is closest to `tentative`; ties go to the lower level.
std::pair<int, Anchor> select_anchor(const AnchorSet& anchors, double tentative);

/// Replaces the slot at round_half_even(finalized.score).
AnchorSet update_anchor_slot(AnchorSet anchors, Anchor finalized);

struct AgentRuntime {
    ChatGateway& chat;
    SearchGateway& search;
    SamplingOptions sampling;
};

class EvaluationAgent {
public:
    explicit EvaluationAgent(AgentRuntime rt) : rt_(rt) {}

    Verdict evaluate(const std::string& source, const std::string& candidate, const std::string& instructions,
                     std::span<const KnowledgeNote> notes) const;

private:
    AgentRuntime rt_;
};

Verdict parse_verdict(std::string_view reply);

class SearchAgent {
public:
    static constexpr int kMaxQueries = 3;
    static constexpr int kTopK = 5;

    explicit SearchAgent(AgentRuntime rt) : rt_(rt) {}

    KnowledgeNote run(const std::string& request) const;

private:
    AgentRuntime rt_;
};

class ComparisonAgent {
public:
    explicit ComparisonAgent(AgentRuntime rt) : rt_(rt) {}

    /// Outcome for `a` relative to `b`.
    Outcome compare_once(const std::string& source, const std::string& a, const std::string& b,
                         std::span<const KnowledgeNote> notes) const;

    BidirectionalResult compare_bidirectional(const std::string& source, const std::string& candidate,
                                              const std::string& anchor, std::span<const KnowledgeNote> notes) const;

    /// Cold start: synthesises a literal Score-1 anchor and a knowledge-aware
    /// Score-4 anchor. `anchors` must be empty.
    AnchorSet bootstrap_anchors(const std::string& source, std::span<const KnowledgeNote> notes,
                                const AnchorSet& anchors) const;

private:
    AgentRuntime rt_;
};

} // namespace rate
