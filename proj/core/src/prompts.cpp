#include "rate/prompts.hpp"

#include "rate/agents.hpp"

#include <fmt/format.h>

namespace rate::prompts {

namespace {

constexpr std::string_view kSqmScale = R"(Quality scale (0-4):
  0  Severe knowledge failure or nonsense: the knowledge in the source is misunderstood or omitted.
  1  Partial severe error: parts of the source knowledge are misunderstood or omitted.
  2  Comprehensible but biased or literal: the meaning deviates or relies on literal translation, yet remains understandable.
  3  Accurate but unfluent: fully correct understanding (including slang and idioms) with disfluencies or register errors.
  4  Excellent and culturally adaptive: fully correct, fluent and authentic.)";

std::vector<ChatMessage> two_turn(std::string system, std::string user) {
    return {{Role::System, std::move(system)}, {Role::User, std::move(user)}};
}

} // namespace

std::string render_notes(std::span<const KnowledgeNote> notes) {
    if (notes.empty())
        return "(none)";
    std::string out;
    for (std::size_t i = 0; i < notes.size(); ++i) {
        out += fmt::format("[{}] {}: {}", i, notes[i].topic, notes[i].summary);
        if (!notes[i].sources.empty()) {
            out += " (sources:";
            for (const auto& s : notes[i].sources)
                out += " " + s;
            out += ")";
        }
        out += "\n";
    }
    return out;
}

std::vector<ChatMessage> evaluation(std::string_view source, std::string_view candidate,
                                    std::string_view instructions, std::span<const KnowledgeNote> notes) {
    auto system = fmt::format(R"({} (prompt {})
You assess the quality of one machine translation of a high-context source sentence (slang, idioms,
puns, allusions, classical poetry). Judge whether the translation carries the figurative meaning,
not only the literal surface form. Use the context notes when they are relevant; do not invent
background knowledge that is not in the notes.

{}

If understanding the source depends on knowledge you are unsure about (slang, memes, cultural
references), list it under "knowledge_gaps" so it can be looked up.

End your reply with one JSON object:
{{"score": <integer 0-4>, "confidence": <number 0-1>, "rationale": "<text>",
  "error_spans": [{{"span": "<text>", "note": "<text>"}}], "knowledge_gaps": ["<text>"]}})",
                              kEvaluationTag, kPromptVersion, kSqmScale);

    auto user = fmt::format("Source:\n{}\n\nTranslation:\n{}\n\nInstructions from the coordinator:\n{}\n\nContext notes:\n{}",
                            source, candidate, instructions.empty() ? "(none)" : instructions, render_notes(notes));
    return two_turn(std::move(system), std::move(user));
}

std::vector<ChatMessage> search_plan(std::string_view request, int max_queries) {
    auto system = fmt::format(R"({} (prompt {})
You resolve knowledge requests for a translation evaluator by querying a web search engine.
Rewrite the request into between 1 and {} concise search queries that are likely to surface
an explanation (meaning, origin, usage) of the term in question.

End your reply with one JSON object: {{"queries": ["<query>", ...]}})",
                              kSearchPlanTag, kPromptVersion, max_queries);
    return two_turn(std::move(system), fmt::format("Request:\n{}", request));
}

std::vector<ChatMessage> search_summary(std::string_view request, std::string_view numbered_snippets) {
    auto system = fmt::format(R"({} (prompt {})
Summarize the search results below into a short note that answers the request, keeping only the
information relevant to understanding and translating the source text, with a brief explanation.

End your reply with one JSON object: {{"summary": "<text>"}})",
                              kSearchSummaryTag, kPromptVersion);
    return two_turn(std::move(system), fmt::format("Request:\n{}\n\nSearch results:\n{}", request, numbered_snippets));
}

std::vector<ChatMessage> comparison(std::string_view source, std::string_view a, std::string_view b,
                                    std::span<const KnowledgeNote> notes) {
    auto system = fmt::format(R"({} (prompt {})
Compare two translations of the same source sentence and decide which one conveys the source
better, giving priority to the figurative and cultural meaning over literal wording. Answer "tie"
when they are of equivalent quality.

End your reply with one JSON object: {{"winner": "A" | "B" | "tie"}})",
                              kComparisonTag, kPromptVersion);
    auto user = fmt::format("Source:\n{}\n\nTranslation A:\n{}\n\nTranslation B:\n{}\n\nContext notes:\n{}", source, a,
                            b, render_notes(notes));
    return two_turn(std::move(system), std::move(user));
}

std::vector<ChatMessage> anchor_bootstrap(std::string_view source, std::span<const KnowledgeNote> notes) {
    auto system = fmt::format(R"({} (prompt {})
Produce two reference translations of the source sentence to serve as calibration anchors:
  - "score1_anchor": a poor, literal word-for-word translation that misses the intended meaning.
  - "score4_anchor": a high-quality, context-aware translation based on the background knowledge.

{}

End your reply with one JSON object: {{"score1_anchor": "<text>", "score4_anchor": "<text>"}})",
                              kAnchorTag, kPromptVersion, kSqmScale);
    return two_turn(std::move(system),
                    fmt::format("Source:\n{}\n\nBackground knowledge:\n{}", source, render_notes(notes)));
}

std::string core_system(const CoreMenu& menu) {
    std::string actions;
    if (menu.search)
        actions += R"(  - {"action": "search", "request": "<what background knowledge is needed>"}
      Ask the Search Agent to look up slang, memes, cultural references or allusions. Knowledge
      already in memory must not be requested again.
)";
    actions += R"(  - {"action": "evaluate", "instructions": "<guidance>", "notes": [<memory indices>]}
      Ask the Evaluation Agent for a score with confidence, rationale, error spans and knowledge gaps.
      The listed memory notes are injected as context (omit "notes" to inject all of memory).
)";
    if (menu.compare)
        actions += R"(  - {"action": "compare"}
      Ask the Comparison Agent to calibrate the current tentative score by a bidirectional pairwise
      comparison against the closest-scoring anchor translation. Requires a tentative score and is
      not available in round 1.
)";
    actions += R"(  - {"action": "finalize", "score": <number 0-4>}
      Stop and output the final score. Requires a tentative score.
)";

    return fmt::format(R"({} (prompt {})
You coordinate the evaluation of one machine translation of a high-context source sentence.
Work in a reflective loop: observe the current state (your understanding of the source, the
knowledge accumulated in memory, the tentative score and its confidence), orient, decide on the
single next action, and act. Stop only when you have sufficient evidence for a final score; at
the round limit you must finalize immediately.

{}

Available actions:
{}
End your reply with exactly one JSON object describing the chosen action.)",
                       kCoreTag, kPromptVersion, kSqmScale, actions);
}

std::vector<ChatMessage> gemba_da(std::string_view source_lang, std::string_view target_lang,
                                  std::string_view source, std::string_view candidate) {
    auto user = fmt::format(
        "{} (prompt {})\n"
        "Score the following translation from {} to {} on a continuous scale from 0 to 100, where a score of zero "
        "means \"no meaning preserved\" and score of one hundred means \"perfect meaning and grammar\".\n\n"
        "{} source: \"{}\"\n{} translation: \"{}\"\n\n"
        "Output the score as a JSON object: {{\"score\": <integer 0-100>}}",
        kGembaDaTag, kPromptVersion, source_lang, target_lang, source_lang, source, target_lang, candidate);
    return {{Role::User, std::move(user)}};
}

std::vector<ChatMessage> gemba_mqm(std::string_view source_lang, std::string_view target_lang,
                                   std::string_view source, std::string_view candidate) {
    auto system = fmt::format("{} (prompt {})\nYou are an annotator for the quality of machine translation. Your task "
                              "is to identify errors and assess the quality of the translation.",
                              kGembaMqmTag, kPromptVersion);
    auto user = fmt::format(
        "{} source:\n```{}```\n{} translation:\n```{}```\n\n"
        "Based on the source segment and machine translation surrounded with triple backticks, identify error types "
        "in the translation and classify them. The categories of errors are: accuracy (addition, mistranslation, "
        "omission, untranslated text), fluency (character encoding, grammar, inconsistency, punctuation, register, "
        "spelling), style (awkward), terminology (inappropriate for context, inconsistent use), non-translation, "
        "other, or no-error.\n"
        "Each error is classified as one of three categories: critical, major, and minor. Critical errors inhibit "
        "comprehension of the text. Major errors disrupt the flow, but what the text is trying to say is still "
        "understandable. Minor errors are technically errors, but do not disrupt the flow or hinder comprehension.\n\n"
        "Answer in this format:\nCritical:\n<category> - \"<span>\" or no-error\nMajor:\n...\nMinor:\n...",
        source_lang, source, target_lang, candidate);
    return two_turn(std::move(system), std::move(user));
}

} // namespace rate::prompts
