#pragma once

#include "rate/gateway.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rate {

struct KnowledgeNote;

/// Prompt assets. Bumping kPromptVersion invalidates recorded fixtures, since
/// the fixture key is a hash over the rendered transcript.
namespace prompts {

inline constexpr std::string_view kPromptVersion = "v1";

// First line of each agent's system prompt; scripted test harnesses route on it.
inline constexpr std::string_view kCoreTag = "# RATE Core Agent";
inline constexpr std::string_view kEvaluationTag = "# RATE Evaluation Agent";
inline constexpr std::string_view kSearchPlanTag = "# RATE Search Agent (query planning)";
inline constexpr std::string_view kSearchSummaryTag = "# RATE Search Agent (summarization)";
inline constexpr std::string_view kComparisonTag = "# RATE Comparison Agent";
inline constexpr std::string_view kAnchorTag = "# RATE Comparison Agent (anchor bootstrap)";
inline constexpr std::string_view kGembaDaTag = "# GEMBA-DA";
inline constexpr std::string_view kGembaMqmTag = "# GEMBA-MQM";

std::string render_notes(std::span<const KnowledgeNote> notes);

std::vector<ChatMessage> evaluation(std::string_view source, std::string_view candidate,
                                    std::string_view instructions, std::span<const KnowledgeNote> notes);
std::vector<ChatMessage> search_plan(std::string_view request, int max_queries);
std::vector<ChatMessage> search_summary(std::string_view request, std::string_view numbered_snippets);
std::vector<ChatMessage> comparison(std::string_view source, std::string_view a, std::string_view b,
                                    std::span<const KnowledgeNote> notes);
std::vector<ChatMessage> anchor_bootstrap(std::string_view source, std::span<const KnowledgeNote> notes);

struct CoreMenu {
    bool search = true;
    bool compare = true;
};

std::string core_system(const CoreMenu& menu);

std::vector<ChatMessage> gemba_da(std::string_view source_lang, std::string_view target_lang,
                                  std::string_view source, std::string_view candidate);
std::vector<ChatMessage> gemba_mqm(std::string_view source_lang, std::string_view target_lang,
                                   std::string_view source, std::string_view candidate);

inline constexpr std::string_view kJsonReminder =
    "Your previous reply could not be used. Reply again and end with exactly one JSON object in the requested format.";

} // namespace prompts
} // namespace rate
