#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace aya::datapipe {

struct LanguageInfo {
    std::string_view code;
    std::string_view name;
    std::string_view script;
    std::string_view family;
    std::string_view subgrouping;
};

// The 23 supported languages, ordered by code. Japanese is listed as "jp";
// "ja" is accepted as an alias everywhere a code is looked up.
std::span<const LanguageInfo> language_registry();

// Canonical registry code for `code` (after alias resolution), if supported.
std::optional<std::string> canonical_language(std::string_view code);
const LanguageInfo* find_language(std::string_view code);

} // namespace aya::datapipe
