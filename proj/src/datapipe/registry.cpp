#include "aya/datapipe/registry.hpp"

#include <array>

namespace aya::datapipe {

namespace {

constexpr std::array<LanguageInfo, 23> languages{{
    {"ar", "Arabic", "Arabic", "Afro-Asiatic", "Semitic"},
    {"cs", "Czech", "Latin", "Indo-European", "Balto-Slavic"},
    {"de", "German", "Latin", "Indo-European", "Germanic"},
    {"el", "Greek", "Greek", "Indo-European", "Graeco-Phrygian"},
    {"en", "English", "Latin", "Indo-European", "Germanic"},
    {"es", "Spanish", "Latin", "Indo-European", "Italic"},
    {"fa", "Persian", "Arabic", "Indo-European", "Iranian"},
    {"fr", "French", "Latin", "Indo-European", "Italic"},
    {"he", "Hebrew", "Hebrew", "Afro-Asiatic", "Semitic"},
    {"hi", "Hindi", "Devanagari", "Indo-European", "Indo-Aryan"},
    {"id", "Indonesian", "Latin", "Austronesian", "Malayo-Polynesian"},
    {"it", "Italian", "Latin", "Indo-European", "Italic"},
    {"jp", "Japanese", "Japanese", "Japonic", "Japanesic"},
    {"ko", "Korean", "Hangul", "Koreanic", "Korean"},
    {"nl", "Dutch", "Latin", "Indo-European", "Germanic"},
    {"pl", "Polish", "Latin", "Indo-European", "Balto-Slavic"},
    {"pt", "Portuguese", "Latin", "Indo-European", "Italic"},
    {"ro", "Romanian", "Latin", "Indo-European", "Italic"},
    {"ru", "Russian", "Cyrillic", "Indo-European", "Balto-Slavic"},
    {"tr", "Turkish", "Latin", "Turkic", "Common Turkic"},
    {"uk", "Ukrainian", "Cyrillic", "Indo-European", "Balto-Slavic"},
    {"vi", "Vietnamese", "Latin", "Austroasiatic", "Vietic"},
    {"zh", "Chinese", "Han & Hant", "Sino-Tibetan", "Sinitic"},
}};

} // namespace

std::span<const LanguageInfo> language_registry() { return languages; }

const LanguageInfo* find_language(std::string_view code)
{
    if (code == "ja") {
        code = "jp";
    }
    for (const LanguageInfo& info : languages) {
        if (info.code == code) {
            return &info;
        }
    }
    return nullptr;
}

std::optional<std::string> canonical_language(std::string_view code)
{
    const LanguageInfo* info = find_language(code);
    if (!info) {
        return std::nullopt;
    }
    return std::string(info->code);
}

} // namespace aya::datapipe
