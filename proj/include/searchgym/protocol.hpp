#pragma once

// The JSON-in-XML agent dialect:
//   <tool>{"name": "...", "args": {...}}</tool>
//   <result>...</result>
//   <answer>...</answer>
// The grammar is flat. Anything that does not fit it becomes a plain_text
// segment plus a ParseError; parsing itself never fails.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace searchgym {

struct ToolCall {
    std::string name;
    nlohmann::json args = nlohmann::json::object();

    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

enum class SegmentKind { plain_text, tool_call, tool_result, answer };

/// Half-open byte range into the parsed input.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const Span&, const Span&) = default;
};

struct TaggedSegment {
    SegmentKind kind = SegmentKind::plain_text;
    std::variant<std::string, ToolCall> payload;
    Span span;
    bool malformed = false;

    const std::string& text() const { return std::get<std::string>(payload); }
    const ToolCall& call() const { return std::get<ToolCall>(payload); }
};

enum class ParseErrorKind { unclosed_tag, nested_tag, bad_json, non_object_args, empty_name, unknown };

inline std::string_view to_string(ParseErrorKind k) noexcept {
    switch (k) {
        case ParseErrorKind::unclosed_tag: return "unclosed_tag";
        case ParseErrorKind::nested_tag: return "nested_tag";
        case ParseErrorKind::bad_json: return "bad_json";
        case ParseErrorKind::non_object_args: return "non_object_args";
        case ParseErrorKind::empty_name: return "empty_name";
        case ParseErrorKind::unknown: return "unknown";
    }
    return "unknown";
}

struct ParseError {
    ParseErrorKind kind = ParseErrorKind::unknown;
    Span span;
    std::string detail;
};

struct ParsedMessage {
    std::vector<TaggedSegment> segments;
    std::vector<ParseError> errors;
};

// ---------------------------------------------------------------------------
// Escaping for <result>/<answer> bodies.

inline std::string escape_body(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '&') {
            out += "&amp;";
        } else if (c == '<') {
            out += "&lt;";
        } else {
            out.push_back(c);
        }
    }
    return out;
}

inline std::string unescape_body(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        if (s.compare(i, 4, "&lt;") == 0) {
            out.push_back('<');
            i += 4;
        } else if (s.compare(i, 5, "&amp;") == 0) {
            out.push_back('&');
            i += 5;
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

namespace detail {

enum class Tag : std::size_t { tool = 0, result = 1, answer = 2 };

struct TagSpelling {
    std::string_view open;
    std::string_view close;
};

inline constexpr std::array<TagSpelling, 3> kTags{{
    {"<tool>", "</tool>"},
    {"<result>", "</result>"},
    {"<answer>", "</answer>"},
}};

struct TagToken {
    std::size_t pos;
    std::size_t len;
    Tag tag;
    bool closing;

    std::size_t end() const noexcept { return pos + len; }
};

inline std::vector<TagToken> scan_tags(std::string_view text) {
    std::vector<TagToken> tokens;
    for (std::size_t pos = text.find('<'); pos != std::string_view::npos; pos = text.find('<', pos + 1)) {
        for (std::size_t t = 0; t < kTags.size(); ++t) {
            const auto& spelling = kTags[t];
            if (text.compare(pos, spelling.open.size(), spelling.open) == 0) {
                tokens.push_back({pos, spelling.open.size(), static_cast<Tag>(t), false});
                break;
            }
            if (text.compare(pos, spelling.close.size(), spelling.close) == 0) {
                tokens.push_back({pos, spelling.close.size(), static_cast<Tag>(t), true});
                break;
            }
        }
    }
    return tokens;
}

inline std::string compact_json(const nlohmann::json& j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

/// Validates the body of a <tool> tag.
inline std::variant<ToolCall, ParseError> parse_tool_body(std::string_view body, Span span) {
    auto parsed = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
    if (parsed.is_discarded()) return ParseError{ParseErrorKind::bad_json, span, "tool body is not a single JSON value"};
    if (!parsed.is_object()) return ParseError{ParseErrorKind::bad_json, span, "tool body must be a JSON object"};
    auto name = parsed.find("name");
    if (name == parsed.end()) return ParseError{ParseErrorKind::empty_name, span, "tool call has no name"};
    if (!name->is_string()) return ParseError{ParseErrorKind::bad_json, span, "tool name must be a string"};
    if (name->get_ref<const std::string&>().empty()) {
        return ParseError{ParseErrorKind::empty_name, span, "tool name is empty"};
    }
    auto args = parsed.find("args");
    if (args == parsed.end() || !args->is_object()) {
        return ParseError{ParseErrorKind::non_object_args, span, "tool args must be a JSON object"};
    }
    if (parsed.size() != 2) return ParseError{ParseErrorKind::unknown, span, "tool call has unexpected keys"};
    return ToolCall{name->get<std::string>(), std::move(*args)};
}

}  // namespace detail

/// Total over arbitrary input: every byte lands in exactly one segment, in order.
inline ParsedMessage parse_assistant_message(std::string_view text) {
    using detail::Tag;
    using detail::TagToken;

    ParsedMessage out;
    const auto tokens = detail::scan_tags(text);

    // Positions (token indices) of each closing tag, ascending.
    std::array<std::vector<std::size_t>, 3> closers;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].closing) closers[static_cast<std::size_t>(tokens[i].tag)].push_back(i);
    }

    std::size_t cursor = 0;
    auto emit_plain = [&](std::size_t end) {
        if (end > cursor) {
            out.segments.push_back(
                {SegmentKind::plain_text, std::string(text.substr(cursor, end - cursor)), {cursor, end}, false});
        }
        cursor = end;
    };
    auto emit_malformed = [&](std::size_t end, ParseErrorKind kind, std::string detail) {
        const Span span{cursor, end};
        out.segments.push_back({SegmentKind::plain_text, std::string(text.substr(cursor, end - cursor)), span, true});
        out.errors.push_back({kind, span, std::move(detail)});
        cursor = end;
    };

    std::size_t ti = 0;
    while (ti < tokens.size()) {
        const TagToken& tok = tokens[ti];
        if (tok.pos < cursor) {
            ++ti;
            continue;
        }
        emit_plain(tok.pos);
        if (tok.closing) {
            emit_malformed(tok.end(), ParseErrorKind::unknown, "closing tag without an opening tag");
            ++ti;
            continue;
        }
        if (ti + 1 == tokens.size()) {
            emit_malformed(text.size(), ParseErrorKind::unclosed_tag, "tag is never closed");
            ti = tokens.size();
            break;
        }
        const TagToken& next = tokens[ti + 1];
        if (next.closing && next.tag == tok.tag) {
            const Span span{tok.pos, next.end()};
            const std::string_view body = text.substr(tok.end(), next.pos - tok.end());
            if (tok.tag == Tag::tool) {
                auto call = detail::parse_tool_body(body, span);
                if (auto* err = std::get_if<ParseError>(&call)) {
                    out.segments.push_back({SegmentKind::plain_text, std::string(text.substr(span.begin, span.size())),
                                            span, true});
                    out.errors.push_back(std::move(*err));
                } else {
                    out.segments.push_back({SegmentKind::tool_call, std::move(std::get<ToolCall>(call)), span, false});
                }
            } else {
                const auto kind = tok.tag == Tag::result ? SegmentKind::tool_result : SegmentKind::answer;
                out.segments.push_back({kind, unescape_body(body), span, false});
            }
            cursor = next.end();
            ti += 2;
            continue;
        }
        if (!next.closing) {
            // Another tag opens before this one closes.
            const auto& own = closers[static_cast<std::size_t>(tok.tag)];
            auto it = std::upper_bound(own.begin(), own.end(), ti + 1);
            if (it != own.end()) {
                emit_malformed(tokens[*it].end(), ParseErrorKind::nested_tag, "tags may not nest");
                ti = *it + 1;
                continue;
            }
        }
        emit_malformed(next.pos, ParseErrorKind::unclosed_tag, "tag is never closed");
        ++ti;
    }
    emit_plain(text.size());
    return out;
}

/// Canonical form: name first, then args with keys sorted. A '<' inside a
/// JSON string is written as a unicode escape so the body never closes the
/// tag early.
inline std::string render_tool_call(const ToolCall& call) {
    std::string body = "{\"name\":" + detail::compact_json(call.name) + ",\"args\":" + detail::compact_json(call.args) + "}";
    std::string out = "<tool>";
    out.reserve(body.size() + 16);
    for (char c : body) {
        if (c == '<') {
            out += "\\u003c";
        } else {
            out.push_back(c);
        }
    }
    out += "</tool>";
    return out;
}

inline std::string render_result(std::string_view content) { return "<result>" + escape_body(content) + "</result>"; }

inline std::string render_answer(std::string_view content) { return "<answer>" + escape_body(content) + "</answer>"; }

inline std::optional<std::string> extract_answer(const std::vector<TaggedSegment>& segments) {
    for (const auto& s : segments) {
        if (s.kind == SegmentKind::answer) return s.text();
    }
    return std::nullopt;
}

struct XmlReport {
    bool well_formed = false;
    bool open_tags_balanced = false;
    std::size_t answer_count = 0;

    friend bool operator==(const XmlReport&, const XmlReport&) = default;
};

inline XmlReport xml_report(std::string_view text) {
    const auto parsed = parse_assistant_message(text);
    std::array<long, 3> depth{};
    for (const auto& tok : detail::scan_tags(text)) depth[static_cast<std::size_t>(tok.tag)] += tok.closing ? -1 : 1;
    XmlReport report;
    report.well_formed = parsed.errors.empty();
    report.open_tags_balanced = std::all_of(depth.begin(), depth.end(), [](long d) { return d == 0; });
    report.answer_count = static_cast<std::size_t>(std::count_if(
        parsed.segments.begin(), parsed.segments.end(), [](const TaggedSegment& s) { return s.kind == SegmentKind::answer; }));
    return report;
}

}  // namespace searchgym
