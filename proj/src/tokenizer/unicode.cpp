#include "aya/tokenizer/unicode.hpp"

#include "aya/common/error.hpp"

#include <unicode/bytestream.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <cstdint>

namespace aya::tokenizer {

namespace {

// Returns the offset of the first ill-formed sequence or npos.
std::size_t first_invalid(std::string_view text)
{
    const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto length = static_cast<std::int32_t>(text.size());
    std::int32_t i = 0;
    while (i < length) {
        const std::int32_t start = i;
        UChar32 c;
        U8_NEXT(s, i, length, c);
        if (c < 0) {
            return static_cast<std::size_t>(start);
        }
    }
    return std::string_view::npos;
}

enum class CharClass { digit, letter, space, other };

CharClass classify(UChar32 c)
{
    if (u_charType(c) == U_DECIMAL_DIGIT_NUMBER) {
        return CharClass::digit;
    }
    if ((U_GET_GC_MASK(c) & (U_GC_L_MASK | U_GC_M_MASK)) != 0) {
        return CharClass::letter;
    }
    if (u_isUWhiteSpace(c)) {
        return CharClass::space;
    }
    return CharClass::other;
}

struct CodePoint {
    std::size_t begin;
    std::size_t end;
    CharClass cls;
    bool ascii_space;
};

} // namespace

bool is_valid_utf8(std::string_view text) { return first_invalid(text) == std::string_view::npos; }

std::string sanitize_utf8(std::string_view bytes)
{
    std::string out;
    out.reserve(bytes.size());
    const auto* s = reinterpret_cast<const std::uint8_t*>(bytes.data());
    const auto length = static_cast<std::int32_t>(bytes.size());
    for (std::int32_t i = 0; i < length;) {
        const std::int32_t start = i;
        UChar32 c;
        U8_NEXT(s, i, length, c);
        if (c < 0) {
            out += "\xef\xbf\xbd";
        } else {
            out.append(bytes.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
        }
    }
    return out;
}

void require_utf8(std::string_view text)
{
    const std::size_t bad = first_invalid(text);
    if (bad != std::string_view::npos) {
        throw InputError("invalid_utf8", "invalid UTF-8 at byte " + std::to_string(bad));
    }
}

std::string normalize(std::string_view text)
{
    require_utf8(text);
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) {
        throw InternalError("icu_unavailable", u_errorName(status));
    }
    std::string out;
    out.reserve(text.size());
    icu::StringByteSink<std::string> sink(&out);
    nfc->normalizeUTF8(0, icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())), sink, nullptr,
                       status);
    if (U_FAILURE(status)) {
        throw InternalError("icu_failure", u_errorName(status));
    }
    return out;
}

std::vector<std::string> pretokenize(std::string_view text)
{
    require_utf8(text);
    std::vector<CodePoint> cps;
    const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto length = static_cast<std::int32_t>(text.size());
    for (std::int32_t i = 0; i < length;) {
        const std::int32_t start = i;
        UChar32 c;
        U8_NEXT(s, i, length, c);
        cps.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(i), classify(c), c == U' '});
    }

    std::vector<std::string> pieces;
    auto emit = [&](std::size_t from, std::size_t to) {
        if (to > from) {
            pieces.emplace_back(text.substr(cps[from].begin, cps[to - 1].end - cps[from].begin));
        }
    };
    std::size_t i = 0;
    while (i < cps.size()) {
        const CharClass cls = cps[i].cls;
        if (cls == CharClass::digit) {
            emit(i, i + 1);
            ++i;
            continue;
        }
        if (cls == CharClass::space) {
            std::size_t j = i;
            while (j < cps.size() && cps[j].cls == CharClass::space) {
                ++j;
            }
            // Lend a final ASCII space to a following word or symbol run.
            const bool lend = j < cps.size() && cps[j].cls != CharClass::digit && cps[j - 1].ascii_space;
            if (lend) {
                emit(i, j - 1);
                i = j - 1;
            } else {
                emit(i, j);
                i = j;
                continue;
            }
        }
        std::size_t j = i;
        if (cps[j].cls == CharClass::space) {
            ++j;
        }
        const CharClass run = cps[j].cls;
        while (j < cps.size() && cps[j].cls == run) {
            ++j;
        }
        emit(i, j);
        i = j;
    }
    return pieces;
}

} // namespace aya::tokenizer
