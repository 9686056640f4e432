#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

namespace r2kg::text {

inline std::string trim(std::string_view s) {
    const char* ws = " \t\r\n\f\v";
    auto begin = s.find_first_not_of(ws);
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(ws);
    return std::string(s.substr(begin, end - begin + 1));
}

namespace detail {
inline const icu::Normalizer2* nfc_instance() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* inst = icu::Normalizer2::getNFCInstance(status);
    return U_SUCCESS(status) ? inst : nullptr;
}
} // namespace detail

// Canonical composition. Invalid UTF-8 passes through unchanged.
inline std::string nfc(const std::string& s) {
    static const icu::Normalizer2* norm = detail::nfc_instance();
    if (norm == nullptr || s.empty()) return s;
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(s);
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString out = norm->normalize(u, status);
    if (U_FAILURE(status)) return s;
    std::string result;
    out.toUTF8String(result);
    return result;
}

inline std::string fold_case(const std::string& s) {
    if (s.empty()) return s;
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(s);
    u.foldCase();
    std::string result;
    u.toUTF8String(result);
    return result;
}

// Entity and relation surface forms: NFC + trim, case kept.
inline std::string normalize_surface(std::string_view s) {
    return nfc(trim(s));
}

// Answer labels: NFC + trim + case fold.
inline std::string normalize_label(std::string_view s) {
    return fold_case(nfc(trim(s)));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(s.substr(start));
            break;
        }
        parts.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines = split(s, '\n');
    for (auto& line : lines) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
    }
    return lines;
}

template <typename Range>
std::string join(const Range& items, std::string_view sep) {
    std::string out;
    bool first = true;
    for (const auto& item : items) {
        if (!first) out += sep;
        out += item;
        first = false;
    }
    return out;
}

} // namespace r2kg::text
