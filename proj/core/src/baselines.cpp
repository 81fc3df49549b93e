#include "rate/baselines.hpp"

#include "rate/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

namespace rate::baselines {

std::string_view to_string(Severity s) {
    switch (s) {
    case Severity::Critical: return "Critical";
    case Severity::Major: return "Major";
    case Severity::Minor: return "Minor";
    }
    return "Minor";
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::vector<MqmError> parse_mqm_spans(std::string_view llm_output) {
    std::vector<MqmError> errors;
    std::optional<Severity> current;
    std::istringstream in{std::string(llm_output)};
    std::string raw;
    while (std::getline(in, raw)) {
        auto line = trim(raw);
        if (line.empty())
            continue;
        const auto low = lower(line);
        if (low.find("no-error") != std::string::npos || low.find("no error") != std::string::npos)
            continue;

        // A heading is a bare word followed by ':' with nothing after it.
        if (line.back() == ':' && line.find(" - ") == std::string_view::npos) {
            const auto head = low.substr(0, low.size() - 1);
            if (head == "critical")
                current = Severity::Critical;
            else if (head == "major")
                current = Severity::Major;
            else if (head == "minor")
                current = Severity::Minor;
            else
                throw ParseError(fmt::format("unknown MQM severity in line: {}", line));
            continue;
        }
        if (!current)
            throw ParseError(fmt::format("MQM error listed before any severity heading: {}", line));

        if (line.starts_with("- ") || line.starts_with("* "))
            line = trim(line.substr(2));

        MqmError e;
        e.severity = *current;
        const auto sep = line.find(" - ");
        if (sep == std::string_view::npos) {
            e.category = std::string(line);
        } else {
            e.category = std::string(trim(line.substr(0, sep)));
            auto span = trim(line.substr(sep + 3));
            if (span.size() >= 2 && span.front() == '"' && span.back() == '"')
                span = span.substr(1, span.size() - 2);
            e.span = std::string(span);
        }
        if (lower(e.category).find("non-translation") != std::string::npos)
            e.severity = Severity::Critical;
        errors.push_back(std::move(e));
    }
    return errors;
}

std::string render_mqm_spans(std::span<const MqmError> errors) {
    std::string out;
    for (Severity s : {Severity::Critical, Severity::Major, Severity::Minor}) {
        out += fmt::format("{}:\n", to_string(s));
        bool any = false;
        for (const auto& e : errors) {
            if (e.severity != s)
                continue;
            out += fmt::format("{} - \"{}\"\n", e.category, e.span);
            any = true;
        }
        if (!any)
            out += "no-error\n";
    }
    return out;
}

double mqm_score(std::span<const MqmError> errors, const MqmWeights& weights) {
    double penalty = 0.0;
    for (const auto& e : errors) {
        switch (e.severity) {
        case Severity::Critical: penalty += weights.critical; break;
        case Severity::Major: penalty += weights.major; break;
        case Severity::Minor: penalty += weights.minor; break;
        }
    }
    return std::max(0.0 - penalty, weights.floor);
}

DaScore parse_da_score(std::string_view reply) {
    const auto j = require_json_object(reply);
    const auto it = j.find("score");
    if (it == j.end() || !it->is_number())
        throw ParseError("expected {\"score\": <0-100>}");
    const double v = it->get<double>();
    if (v != std::floor(v) || v < 0.0 || v > 100.0)
        throw ParseError(fmt::format("DA score {} is not an integer in 0..100", v));
    return {static_cast<int>(v)};
}

std::pair<std::string_view, std::string_view> language_pair(Direction d) {
    return d == Direction::ZhEn ? std::pair{std::string_view("Chinese"), std::string_view("English")}
                                : std::pair{std::string_view("English"), std::string_view("Chinese")};
}

DaScore GembaDa::score(Direction direction, const std::string& source, const std::string& candidate) const {
    if (source.empty() || candidate.empty())
        throw PreconditionError("GEMBA-DA needs a non-empty source and candidate");
    const auto [src, tgt] = language_pair(direction);
    return ask_structured(chat_, prompts::gemba_da(src, tgt, source, candidate), sampling_, parse_da_score,
                          prompts::kJsonReminder);
}

double GembaMqm::score(Direction direction, const std::string& source, const std::string& candidate) const {
    if (source.empty() || candidate.empty())
        throw PreconditionError("GEMBA-MQM needs a non-empty source and candidate");
    const auto [src, tgt] = language_pair(direction);
    const auto errors = ask_structured(chat_, prompts::gemba_mqm(src, tgt, source, candidate), sampling_,
                                       parse_mqm_spans,
                                       "Answer again using only the Critical:/Major:/Minor: listing format.");
    return mqm_score(errors, weights_);
}

} // namespace rate::baselines
