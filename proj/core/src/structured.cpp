#include "rate/structured.hpp"

namespace rate {

namespace {

// Index one past the brace that closes the object opened at `open`, or npos.
std::size_t matching_close(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == '{')
            ++depth;
        else if (c == '}' && --depth == 0)
            return i + 1;
    }
    return std::string_view::npos;
}

} // namespace

std::optional<nlohmann::json> extract_last_json_object(std::string_view text) {
    std::optional<nlohmann::json> last;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string_view::npos) {
        const auto end = matching_close(text, pos);
        if (end != std::string_view::npos) {
            auto parsed = nlohmann::json::parse(text.substr(pos, end - pos), nullptr, false);
            if (!parsed.is_discarded() && parsed.is_object()) {
                last = std::move(parsed);
                pos = end;
                continue;
            }
        }
        ++pos;
    }
    return last;
}

nlohmann::json require_json_object(std::string_view text) {
    auto j = extract_last_json_object(text);
    if (!j)
        throw ParseError("reply contains no JSON object");
    return std::move(*j);
}

} // namespace rate
