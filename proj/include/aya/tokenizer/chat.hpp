#pragma once

#include "aya/tokenizer/bpe.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aya::tokenizer {

enum class Role { user, chatbot };

const char* to_string(Role role);
Role parse_role(std::string_view name);

struct ChatTurn {
    Role role = Role::user;
    std::string content;

    friend bool operator==(const ChatTurn&, const ChatTurn&) = default;
};

struct RenderedChat {
    std::vector<TokenId> ids;
    // Index of the first completion content token; equals ids.size() when
    // there is no completion. The completion's END_OF_TURN is the last id.
    std::size_t completion_begin = 0;
    bool has_completion = false;
    // Debug form: the decoded stream with special tokens as their literals.
    std::string text;
};

// BOS, then START_OF_TURN role content END_OF_TURN per turn. Prompt turns must
// alternate starting with user and end with a user turn. With a completion it
// is wrapped as a chatbot turn; without one the stream ends with the
// generation header START_OF_TURN CHATBOT.
RenderedChat render_chat(std::span<const ChatTurn> prompt_turns, const std::optional<std::string>& completion,
                         const TokenizerModel& model);

struct ParsedChat {
    std::vector<ChatTurn> turns;
    // True when the stream ends with an open START_OF_TURN CHATBOT header.
    bool generation_prompt = false;

    friend bool operator==(const ParsedChat&, const ParsedChat&) = default;
};

// Inverse of render_chat. Errors (InputError codes): missing_bos,
// dangling_turn, unknown_role, misplaced_token.
ParsedChat parse_chat(std::span<const TokenId> ids, const TokenizerModel& model);

// Per-token loss mask: 1 on completion content and its END_OF_TURN.
std::vector<std::uint8_t> completion_mask(const RenderedChat& chat);

} // namespace aya::tokenizer
