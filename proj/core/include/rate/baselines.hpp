#pragma once

#include "rate/agents.hpp"
#include "rate/dataset.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rate::baselines {

enum class Severity { Critical, Major, Minor };

std::string_view to_string(Severity s);

struct MqmError {
    Severity severity = Severity::Minor;
    std::string category; // e.g. "accuracy/mistranslation"
    std::string span;     // may be empty (omissions)

    friend bool operator==(const MqmError&, const MqmError&) = default;
};

struct MqmWeights {
    double critical = 25.0;
    double major = 5.0;
    double minor = 1.0;
    double floor = -25.0;
};

/// Parses the severity-headed listing GEMBA-MQM asks for:
///   Critical:\n no-error\n Major:\n accuracy/mistranslation - "X"\n ...
/// "non-translation" errors count as critical regardless of heading.
std::vector<MqmError> parse_mqm_spans(std::string_view llm_output);

/// Inverse of parse_mqm_spans for well-formed error lists.
std::string render_mqm_spans(std::span<const MqmError> errors);

/// -(weighted error count), floored.
double mqm_score(std::span<const MqmError> errors, const MqmWeights& weights = {});

struct DaScore {
    int value = 0; // 0..100
};

DaScore parse_da_score(std::string_view reply);

/// Language names for a direction, as used in GEMBA prompts.
std::pair<std::string_view, std::string_view> language_pair(Direction d);

class GembaDa {
public:
    explicit GembaDa(ChatGateway& chat, SamplingOptions sampling = {}) : chat_(chat), sampling_(sampling) {}
    DaScore score(Direction direction, const std::string& source, const std::string& candidate) const;

private:
    ChatGateway& chat_;
    SamplingOptions sampling_;
};

class GembaMqm {
public:
    explicit GembaMqm(ChatGateway& chat, SamplingOptions sampling = {}, MqmWeights weights = {})
        : chat_(chat), sampling_(sampling), weights_(weights) {}
    double score(Direction direction, const std::string& source, const std::string& candidate) const;

private:
    ChatGateway& chat_;
    SamplingOptions sampling_;
    MqmWeights weights_;
};

} // namespace rate::baselines
