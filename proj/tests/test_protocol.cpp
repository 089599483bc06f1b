#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "searchgym/protocol.hpp"

using namespace searchgym;

namespace {

void expect_coverage(std::string_view input, const ParsedMessage& parsed) {
    std::string rebuilt;
    std::size_t expected_begin = 0;
    for (const auto& seg : parsed.segments) {
        ASSERT_EQ(seg.span.begin, expected_begin);
        ASSERT_GT(seg.span.end, seg.span.begin);
        rebuilt.append(input.substr(seg.span.begin, seg.span.size()));
        expected_begin = seg.span.end;
    }
    ASSERT_EQ(rebuilt, input);
    for (const auto& e : parsed.errors) ASSERT_LE(e.span.end, input.size());
}

nlohmann::json random_json_value(std::mt19937_64& rng, int depth);

std::string random_string(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces{"a", "b", " ", "<", ">", "&", "&lt;", "\"", "\\", "\n",
                                                 "</tool>", "<answer>", "\xC3\xA9", "\xE6\x97\xA5", "{", "}"};
    std::string s;
    for (std::size_t i = 0, n = rng() % 8; i < n; ++i) s += pieces[rng() % pieces.size()];
    return s;
}

nlohmann::json random_json_object(std::mt19937_64& rng, int depth) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t i = 0, n = rng() % 4; i < n; ++i) obj[random_string(rng)] = random_json_value(rng, depth + 1);
    return obj;
}

nlohmann::json random_json_value(std::mt19937_64& rng, int depth) {
    switch (depth > 3 ? rng() % 5 : rng() % 7) {
        case 0: return nullptr;
        case 1: return rng() % 2 == 0;
        case 2: return static_cast<std::int64_t>(rng() % 2000) - 1000;
        case 3: return std::ldexp(static_cast<double>(rng() % 100000), -static_cast<int>(rng() % 20));
        case 4: return random_string(rng);
        case 5: {
            nlohmann::json arr = nlohmann::json::array();
            for (std::size_t i = 0, n = rng() % 4; i < n; ++i) arr.push_back(random_json_value(rng, depth + 1));
            return arr;
        }
        default: return random_json_object(rng, depth);
    }
}

ToolCall random_call(std::mt19937_64& rng) {
    std::string name = random_string(rng);
    if (name.empty()) name = "t";
    return {name, random_json_object(rng, 0)};
}

}  // namespace

TEST(ParseAssistantMessage, SingleToolCall) {
    const std::string msg = R"(<tool>{"name":"websearch","args":{"query":"fox"}}</tool>)";
    const auto parsed = parse_assistant_message(msg);
    ASSERT_EQ(parsed.segments.size(), 1u);
    EXPECT_TRUE(parsed.errors.empty());
    EXPECT_EQ(parsed.segments[0].kind, SegmentKind::tool_call);
    EXPECT_EQ(parsed.segments[0].call().name, "websearch");
    EXPECT_EQ(parsed.segments[0].call().args, (nlohmann::json{{"query", "fox"}}));
}

TEST(ParseAssistantMessage, PlainProse) {
    const auto parsed = parse_assistant_message("Just thinking out loud, no tags here.");
    ASSERT_EQ(parsed.segments.size(), 1u);
    EXPECT_EQ(parsed.segments[0].kind, SegmentKind::plain_text);
    EXPECT_FALSE(parsed.segments[0].malformed);
    EXPECT_TRUE(parsed.errors.empty());
    EXPECT_TRUE(parse_assistant_message("").segments.empty());
}

TEST(ParseAssistantMessage, BadJsonBecomesPlainTextAndError) {
    const std::string msg = R"(<tool>{"name":"x","args":}</tool>)";
    const auto parsed = parse_assistant_message(msg);
    ASSERT_EQ(parsed.segments.size(), 1u);
    EXPECT_EQ(parsed.segments[0].kind, SegmentKind::plain_text);
    EXPECT_TRUE(parsed.segments[0].malformed);
    EXPECT_EQ(parsed.segments[0].text(), msg);
    ASSERT_EQ(parsed.errors.size(), 1u);
    EXPECT_EQ(parsed.errors[0].kind, ParseErrorKind::bad_json);
    EXPECT_EQ(parsed.errors[0].span, (Span{0, msg.size()}));
}

TEST(ParseAssistantMessage, ErrorKinds) {
    struct Case {
        std::string input;
        ParseErrorKind kind;
    };
    const std::vector<Case> cases{
        {R"(<tool>{"name":"x","args":{}} trailing</tool>)", ParseErrorKind::bad_json},
        {R"(<tool>[1,2]</tool>)", ParseErrorKind::bad_json},
        {R"(<tool>{"name":"x","args":[1]}</tool>)", ParseErrorKind::non_object_args},
        {R"(<tool>{"name":"x"}</tool>)", ParseErrorKind::non_object_args},
        {R"(<tool>{"name":"","args":{}}</tool>)", ParseErrorKind::empty_name},
        {R"(<tool>{"args":{}}</tool>)", ParseErrorKind::empty_name},
        {R"(<tool>{"name":"x","args":{},"id":1}</tool>)", ParseErrorKind::unknown},
        {R"(<tool>{"name":"x","args":{}})", ParseErrorKind::unclosed_tag},
        {R"(<tool><answer>x</answer></tool>)", ParseErrorKind::nested_tag},
        {R"(stray </answer> tag)", ParseErrorKind::unknown},
    };
    for (const auto& c : cases) {
        const auto parsed = parse_assistant_message(c.input);
        ASSERT_FALSE(parsed.errors.empty()) << c.input;
        EXPECT_EQ(parsed.errors[0].kind, c.kind) << c.input << " got " << to_string(parsed.errors[0].kind);
        expect_coverage(c.input, parsed);
    }
}

TEST(ParseAssistantMessage, NestedRegionSwallowedUpToOwnClose) {
    const std::string msg = "a<tool>x<result>r</result>y</tool>b<answer>ok</answer>";
    const auto parsed = parse_assistant_message(msg);
    expect_coverage(msg, parsed);
    ASSERT_EQ(parsed.errors.size(), 1u);
    EXPECT_EQ(parsed.errors[0].kind, ParseErrorKind::nested_tag);
    EXPECT_EQ(extract_answer(parsed.segments), "ok");
}

TEST(ParseAssistantMessage, UnclosedBeforeAnotherTagResumesThere) {
    const std::string msg = "<tool>{oops <answer>fine</answer>";
    const auto parsed = parse_assistant_message(msg);
    expect_coverage(msg, parsed);
    ASSERT_EQ(parsed.errors.size(), 1u);
    EXPECT_EQ(parsed.errors[0].kind, ParseErrorKind::unclosed_tag);
    EXPECT_EQ(extract_answer(parsed.segments), "fine");
}

TEST(ParseAssistantMessage, MixedMessagePreservesWhitespace) {
    const std::string msg = "  Let me search.\n<tool>{\"name\":\"websearch\",\"args\":{\"query\":\"a\"}}</tool>\n"
                            "<tool>{\"name\":\"scrape\",\"args\":{\"doc_id\":\"d1\"}}</tool>  ";
    const auto parsed = parse_assistant_message(msg);
    expect_coverage(msg, parsed);
    ASSERT_EQ(parsed.segments.size(), 5u);
    EXPECT_EQ(parsed.segments[0].text(), "  Let me search.\n");
    EXPECT_EQ(parsed.segments[1].call().name, "websearch");
    EXPECT_EQ(parsed.segments[2].text(), "\n");
    EXPECT_EQ(parsed.segments[3].call().name, "scrape");
    EXPECT_EQ(parsed.segments[4].text(), "  ");
}

TEST(RenderToolCall, CanonicalForm) {
    EXPECT_EQ(render_tool_call({"scrape", {{"doc_id", "d7"}}}), R"(<tool>{"name":"scrape","args":{"doc_id":"d7"}}</tool>)");
    EXPECT_EQ(render_tool_call({"t", nlohmann::json::object()}), R"(<tool>{"name":"t","args":{}}</tool>)");
    EXPECT_EQ(render_tool_call({"s", {{"z", 1}, {"a", 2}}}), R"(<tool>{"name":"s","args":{"a":2,"z":1}}</tool>)");
}

TEST(RenderToolCall, RoundTripOnGeneratedCalls) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 2000; ++i) {
        const ToolCall call = random_call(rng);
        const std::string rendered = render_tool_call(call);
        const auto parsed = parse_assistant_message(rendered);
        ASSERT_TRUE(parsed.errors.empty()) << rendered;
        ASSERT_EQ(parsed.segments.size(), 1u) << rendered;
        ASSERT_EQ(parsed.segments[0].call(), call) << rendered;
    }
}

TEST(RenderBodies, WrapAndEscape) {
    EXPECT_EQ(render_answer("Paris"), "<answer>Paris</answer>");
    EXPECT_EQ(render_result(""), "<result></result>");
    EXPECT_EQ(render_result("a</result>b&c"), "<result>a&lt;/result>b&amp;c</result>");
}

TEST(RenderBodies, EscapingRoundTrip) {
    const std::string tricky = "before </result> <answer>x</answer> &lt; literal & done";
    const auto parsed = parse_assistant_message(render_result(tricky));
    ASSERT_EQ(parsed.segments.size(), 1u);
    EXPECT_EQ(parsed.segments[0].kind, SegmentKind::tool_result);
    EXPECT_EQ(parsed.segments[0].text(), tricky);

    std::mt19937_64 rng(19);
    for (int i = 0; i < 2000; ++i) {
        std::string s;
        for (std::size_t k = 0, n = rng() % 64; k < n; ++k) s.push_back(static_cast<char>(rng() % 256));
        for (const auto& rendered : {render_result(s), render_answer(s)}) {
            const auto p = parse_assistant_message(rendered);
            ASSERT_TRUE(p.errors.empty());
            ASSERT_EQ(p.segments.size(), 1u);
            ASSERT_EQ(p.segments[0].text(), s);
        }
    }
}

TEST(ExtractAnswer, FirstAnswerWins) {
    EXPECT_EQ(extract_answer(parse_assistant_message("<answer>42</answer>").segments), "42");
    EXPECT_FALSE(extract_answer(parse_assistant_message("no answer").segments));
    EXPECT_EQ(extract_answer(parse_assistant_message("<answer>first</answer> <answer>second</answer>").segments), "first");
}

TEST(XmlReport, Cases) {
    EXPECT_EQ(xml_report("Done. <answer>Rudi Dekkers</answer>"), (XmlReport{true, true, 1}));
    const auto unclosed = xml_report(R"(<tool>{"name":"x","args":{}})");
    EXPECT_FALSE(unclosed.well_formed);
    EXPECT_FALSE(unclosed.open_tags_balanced);
    EXPECT_EQ(xml_report("<answer>a</answer><answer>b</answer>"), (XmlReport{true, true, 2}));
    EXPECT_EQ(xml_report("no tags"), (XmlReport{true, true, 0}));
}

TEST(ParseAssistantMessage, CoverageOnRandomTagSoup) {
    std::mt19937_64 rng(23);
    const std::vector<std::string> pieces{"<tool>", "</tool>", "<result>", "</result>", "<answer>", "</answer>",
                                          "{\"name\":\"w\",\"args\":{}}", "{", "}", "<", ">", "x", " ", "\xC3\xA9",
                                          "\"", "<tool", "/tool>"};
    for (int i = 0; i < 20000; ++i) {
        std::string s;
        for (std::size_t k = 0, n = rng() % 24; k < n; ++k) s += pieces[rng() % pieces.size()];
        const auto parsed = parse_assistant_message(s);
        expect_coverage(s, parsed);
        std::size_t malformed = 0;
        for (const auto& seg : parsed.segments) malformed += seg.malformed ? 1 : 0;
        ASSERT_EQ(malformed, parsed.errors.size()) << s;
    }
}

TEST(ParseAssistantMessage, AdversarialMegabyteInputsStayFast) {
    const std::size_t mib = 1 << 20;
    std::vector<std::string> inputs;
    std::string opens;
    while (opens.size() < mib) opens += "<tool>";
    inputs.push_back(opens);
    std::string nested = "<tool>";
    while (nested.size() < mib - 8) nested += "<answer>";
    inputs.push_back(nested + "</tool>");
    std::string deep = "<tool>";
    while (deep.size() < mib) deep += "[";
    inputs.push_back(deep + "</tool>");
    std::string closes;
    while (closes.size() < mib) closes += "</result>";
    inputs.push_back(closes);
    for (const auto& input : inputs) {
        const auto start = std::chrono::steady_clock::now();
        const auto parsed = parse_assistant_message(input);
        const auto elapsed = std::chrono::steady_clock::now() - start;
        expect_coverage(input, parsed);
        EXPECT_LT(elapsed, std::chrono::seconds(1));
    }
}
