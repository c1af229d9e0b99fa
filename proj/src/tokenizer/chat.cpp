#include "aya/tokenizer/chat.hpp"

#include "aya/common/error.hpp"

namespace aya::tokenizer {

namespace {

TokenId role_token(Role role) { return id_of(role == Role::user ? Special::user : Special::chatbot); }

void check_content(const std::string& content)
{
    for (std::string_view lit : special_literals()) {
        if (content.find(lit) != std::string::npos) {
            throw InputError("special_token_in_content",
                             "turn content contains the reserved literal " + std::string(lit));
        }
    }
}

void append_turn(RenderedChat& out, Role role, const std::string& content, const TokenizerModel& model)
{
    check_content(content);
    out.ids.push_back(id_of(Special::start_of_turn));
    out.ids.push_back(role_token(role));
    const auto body = model.encode(content);
    out.ids.insert(out.ids.end(), body.begin(), body.end());
    out.ids.push_back(id_of(Special::end_of_turn));
}

} // namespace

const char* to_string(Role role) { return role == Role::user ? "user" : "chatbot"; }

Role parse_role(std::string_view name)
{
    if (name == "user") {
        return Role::user;
    }
    if (name == "chatbot" || name == "assistant") {
        return Role::chatbot;
    }
    throw InputError("unknown_role", "unknown chat role '" + std::string(name) + "'");
}

RenderedChat render_chat(std::span<const ChatTurn> prompt_turns, const std::optional<std::string>& completion,
                         const TokenizerModel& model)
{
    if (prompt_turns.empty()) {
        throw InputError("empty_prompt", "a chat needs at least one user turn");
    }
    for (std::size_t i = 0; i < prompt_turns.size(); ++i) {
        const Role expected = i % 2 == 0 ? Role::user : Role::chatbot;
        if (prompt_turns[i].role != expected) {
            throw InputError("role_order", "turn " + std::to_string(i) + " should be " + to_string(expected));
        }
    }
    if (prompt_turns.back().role != Role::user) {
        throw InputError("role_order", "the prompt must end with a user turn");
    }

    RenderedChat out;
    out.ids.push_back(id_of(Special::bos));
    for (const ChatTurn& turn : prompt_turns) {
        append_turn(out, turn.role, turn.content, model);
    }
    if (completion) {
        // Content starts after the START_OF_TURN CHATBOT header.
        out.completion_begin = out.ids.size() + 2;
        out.has_completion = true;
        append_turn(out, Role::chatbot, *completion, model);
    } else {
        out.ids.push_back(id_of(Special::start_of_turn));
        out.ids.push_back(id_of(Special::chatbot));
        out.completion_begin = out.ids.size();
    }
    out.text = model.decode(out.ids);
    return out;
}

ParsedChat parse_chat(std::span<const TokenId> ids, const TokenizerModel& model)
{
    if (ids.empty() || ids[0] != id_of(Special::bos)) {
        throw InputError("missing_bos", "chat stream must start with BOS");
    }
    ParsedChat parsed;
    std::size_t i = 1;
    while (i < ids.size()) {
        if (ids[i] != id_of(Special::start_of_turn)) {
            throw InputError("misplaced_token", "expected START_OF_TURN at position " + std::to_string(i));
        }
        if (i + 1 >= ids.size()) {
            throw InputError("dangling_turn", "stream ends inside a turn header");
        }
        const TokenId role = ids[i + 1];
        if (role != id_of(Special::user) && role != id_of(Special::chatbot)) {
            throw InputError("unknown_role", "token " + std::to_string(role) + " is not a role token");
        }
        const Role r = role == id_of(Special::user) ? Role::user : Role::chatbot;
        std::size_t j = i + 2;
        if (j == ids.size() && r == Role::chatbot) {
            parsed.generation_prompt = true;
            break;
        }
        std::vector<TokenId> body;
        while (j < ids.size() && ids[j] != id_of(Special::end_of_turn)) {
            if (model.is_special(ids[j])) {
                throw InputError("misplaced_token", "special token " + std::to_string(ids[j]) +
                                                        " inside turn content at position " + std::to_string(j));
            }
            body.push_back(ids[j]);
            ++j;
        }
        if (j == ids.size()) {
            throw InputError("dangling_turn", "turn starting at position " + std::to_string(i) +
                                                  " has no END_OF_TURN");
        }
        parsed.turns.push_back({r, model.decode(body)});
        i = j + 1;
    }
    return parsed;
}

std::vector<std::uint8_t> completion_mask(const RenderedChat& chat)
{
    std::vector<std::uint8_t> mask(chat.ids.size(), 0);
    if (chat.has_completion) {
        for (std::size_t i = chat.completion_begin; i < chat.ids.size(); ++i) {
            mask[i] = 1;
        }
    }
    return mask;
}

} // namespace aya::tokenizer
