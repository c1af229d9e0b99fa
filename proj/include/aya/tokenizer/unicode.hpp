#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace aya::tokenizer {

// Throws InputError "invalid_utf8" naming the byte offset of the first
// ill-formed sequence.
void require_utf8(std::string_view text);
bool is_valid_utf8(std::string_view text);
// Replaces every ill-formed sequence with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

// Unicode NFC. Input must be valid UTF-8.
std::string normalize(std::string_view text);

// Splits normalized text into pieces whose concatenation is the input:
//   - every decimal digit (any script) is a piece on its own;
//   - a run of letters and combining marks, optionally led by one space;
//   - a run of other non-space symbols, optionally led by one space;
//   - a run of whitespace (a trailing ASCII space is lent to the next word).
std::vector<std::string> pretokenize(std::string_view text);

} // namespace aya::tokenizer
