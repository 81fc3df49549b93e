#pragma once

#include "rate/error.hpp"
#include "rate/gateway.hpp"

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace rate {

/// The last well-formed top-level JSON object embedded in free text. Fenced
/// code blocks and surrounding prose are tolerated.
std::optional<nlohmann::json> extract_last_json_object(std::string_view text);

struct SamplingOptions {
    double temperature = 0.0;
    int max_output = 2048;
};

/// Sends `messages`, parses the reply with `parse`. If parsing throws
/// ParseError the reply is echoed back with `reminder` appended as a user
/// turn and the model gets exactly one more try; a second failure propagates.
template <typename Parse>
auto ask_structured(ChatGateway& gateway, std::vector<ChatMessage> messages, const SamplingOptions& sampling,
                    Parse&& parse, std::string_view reminder) {
    ChatRequest request{messages, sampling.temperature, sampling.max_output};
    auto reply = gateway.chat(request);
    try {
        return parse(reply.content);
    } catch (const ParseError& first) {
        request.messages.push_back({Role::Assistant, reply.content});
        request.messages.push_back({Role::User, std::string(reminder) + "\n(Previous reply rejected: " + first.what() + ")"});
        reply = gateway.chat(request);
        return parse(reply.content);
    }
}

/// Convenience: the last JSON object in `text`, or ParseError.
nlohmann::json require_json_object(std::string_view text);

} // namespace rate
