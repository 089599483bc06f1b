#pragma once

// UTF-8 code point helpers and answer/term normalization shared by the
// reranker and the reward engine.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace searchgym {

namespace utf8 {

/// Byte length of the code point starting at `pos`. Invalid or truncated
/// sequences count as a single byte so callers always make progress.
inline std::size_t sequence_length(std::string_view s, std::size_t pos) noexcept {
    const auto lead = static_cast<unsigned char>(s[pos]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead <= 0xF4) {
        len = 4;
    } else if (lead >= 0xE0) {
        len = lead <= 0xEF ? 3 : 1;
    } else if (lead >= 0xC2) {
        len = 2;
    }
    if (len == 1 || pos + len > s.size()) return 1;
    for (std::size_t i = 1; i < len; ++i) {
        if ((static_cast<unsigned char>(s[pos + i]) & 0xC0) != 0x80) return 1;
    }
    return len;
}

inline std::size_t code_points(std::string_view s) noexcept {
    std::size_t count = 0;
    for (std::size_t pos = 0; pos < s.size(); pos += sequence_length(s, pos)) ++count;
    return count;
}

/// First `n` code points of `s`.
inline std::string_view prefix(std::string_view s, std::size_t n) noexcept {
    std::size_t pos = 0;
    for (std::size_t taken = 0; taken < n && pos < s.size(); ++taken) pos += sequence_length(s, pos);
    return s.substr(0, pos);
}

/// Strict well-formedness check (rejects overlongs and surrogates).
inline bool is_valid(std::string_view s) noexcept {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            ++i;
            continue;
        }
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += len;
    }
    return true;
}

}  // namespace utf8

inline bool is_ascii_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline char ascii_lower(char c) noexcept {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline bool is_ascii_punct(char c) noexcept {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
}

inline std::string_view trim_ascii(std::string_view s) noexcept {
    while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_whitespace(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_ascii_space(s[i])) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_ascii_space(s[i])) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

/// Exact-match normalization: lowercase, drop ASCII punctuation, drop the
/// articles a/an/the, collapse whitespace.
inline std::string normalize_answer(std::string_view text) {
    std::string stripped;
    stripped.reserve(text.size());
    for (char c : text) {
        if (!is_ascii_punct(c)) stripped.push_back(ascii_lower(c));
    }
    std::string out;
    out.reserve(stripped.size());
    for (std::string_view word : split_whitespace(stripped)) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out.append(word);
    }
    return out;
}

/// Unique normalized terms in first-occurrence order.
inline std::vector<std::string> normalized_terms(std::string_view text) {
    const std::string norm = normalize_answer(text);
    std::vector<std::string> terms;
    std::unordered_set<std::string_view> seen;
    for (std::string_view w : split_whitespace(norm)) {
        if (seen.insert(w).second) terms.emplace_back(w);
    }
    return terms;
}

}  // namespace searchgym
