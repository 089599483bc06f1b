#pragma once

// Episode runner: alternate policy turns and tool executions under a turn
// cap and a context budget, plus the scripted, random and remote policies.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchgym/corpus.hpp"
#include "searchgym/embedding.hpp"
#include "searchgym/errors.hpp"
#include "searchgym/protocol.hpp"
#include "searchgym/remote.hpp"
#include "searchgym/text.hpp"
#include "searchgym/tools.hpp"

namespace searchgym {

// --- token budgets ----------------------------------------------------------

enum class TokenCounter { chars_div_4, whitespace_words };

inline std::size_t count_tokens(std::string_view text, TokenCounter counter) {
    if (counter == TokenCounter::chars_div_4) return (utf8::code_points(text) + 3) / 4;
    std::size_t words = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = is_ascii_space(c);
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

inline constexpr std::size_t kShortContextBudget = 8192;
inline constexpr std::size_t kLongContextBudget = 40960;

inline std::size_t default_budget_for_stage(int stage) { return stage == 3 ? kLongContextBudget : kShortContextBudget; }

struct EpisodeConfig {
    std::size_t max_turns = 16;
    std::size_t context_budget_tokens = kShortContextBudget;
    int stage = 1;
    TokenCounter token_counter = TokenCounter::chars_div_4;
    // Lets stage 3 run below the long-context preset.
    bool budget_overridden = false;

    void validate() const {
        if (max_turns < 1) throw InvalidConfigError("max_turns must be at least 1");
        if (context_budget_tokens < 256) throw InvalidConfigError("context budget must be at least 256 tokens");
        if (stage < 1 || stage > 3) throw InvalidConfigError("stage must be 1, 2 or 3");
        if (stage == 3 && context_budget_tokens < kLongContextBudget && !budget_overridden) {
            throw InvalidConfigError("stage 3 requires the 40960-token budget unless overridden");
        }
    }
};

// --- episode record -----------------------------------------------------------

enum class EventKind { policy, result, result_error };

inline std::string_view to_string(EventKind k) noexcept {
    switch (k) {
        case EventKind::policy: return "policy";
        case EventKind::result: return "result";
        case EventKind::result_error: return "result_error";
    }
    return "policy";
}

struct TranscriptEvent {
    int turn = 0;
    EventKind kind = EventKind::policy;
    std::string payload;

    friend bool operator==(const TranscriptEvent&, const TranscriptEvent&) = default;
};

enum class Termination { answered, max_turns, budget_exceeded, policy_error };

inline constexpr std::array<Termination, 4> kTerminations{Termination::answered, Termination::max_turns,
                                                          Termination::budget_exceeded, Termination::policy_error};

inline std::string_view to_string(Termination t) noexcept {
    switch (t) {
        case Termination::answered: return "answered";
        case Termination::max_turns: return "max_turns";
        case Termination::budget_exceeded: return "budget_exceeded";
        case Termination::policy_error: return "policy_error";
    }
    return "policy_error";
}

inline std::optional<Termination> termination_from_string(std::string_view s) {
    for (auto t : kTerminations) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

struct Episode {
    std::string sample_id;
    std::vector<TranscriptEvent> events;
    std::size_t tool_calls_total = 0;
    std::size_t tool_calls_failed = 0;
    std::optional<std::string> final_answer;
    Termination termination = Termination::policy_error;

    std::vector<std::string_view> policy_messages() const {
        std::vector<std::string_view> out;
        for (const auto& e : events) {
            if (e.kind == EventKind::policy) out.push_back(e.payload);
        }
        return out;
    }

    friend bool operator==(const Episode&, const Episode&) = default;
};

inline constexpr std::string_view kMalformedCallNotice = "ERROR: malformed tool call";

// --- transcript ---------------------------------------------------------------

inline std::string transcript_header(const QaSample& sample) { return "Question: " + escape_body(sample.question) + "\n"; }

inline void append_event(std::string& transcript, const TranscriptEvent& e) {
    if (e.kind == EventKind::policy) {
        transcript += e.payload;
    } else {
        transcript += render_result(e.payload);
    }
    transcript += '\n';
}

inline std::string render_transcript(const QaSample& sample, const std::vector<TranscriptEvent>& events) {
    std::string out = transcript_header(sample);
    for (const auto& e : events) append_event(out, e);
    return out;
}

// --- policies -----------------------------------------------------------------

/// A policy maps the rendered transcript to its next message. It must be
/// deterministic given the transcript and its own seed.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string next_message(std::string_view transcript) = 0;
};

// --- runner -------------------------------------------------------------------

/// Runs one episode. Policy exceptions end the episode with policy_error and
/// are never rethrown.
inline Episode run_episode(Policy& policy, const ToolRegistry& tools, const QaSample& sample,
                           const EpisodeConfig& config) {
    config.validate();
    Episode ep;
    ep.sample_id = sample.sample_id;
    std::string transcript = transcript_header(sample);
    auto push = [&](TranscriptEvent e) {
        append_event(transcript, e);
        ep.events.push_back(std::move(e));
    };

    for (std::size_t turn = 1;; ++turn) {
        if (count_tokens(transcript, config.token_counter) > config.context_budget_tokens) {
            ep.termination = Termination::budget_exceeded;
            break;
        }
        std::string message;
        try {
            message = policy.next_message(transcript);
        } catch (const std::exception&) {
            ep.termination = Termination::policy_error;
            break;
        }
        const int t = static_cast<int>(turn);
        const auto parsed = parse_assistant_message(message);
        push({t, EventKind::policy, std::move(message)});

        std::optional<std::string> answer;
        for (const auto& seg : parsed.segments) {
            if (seg.kind == SegmentKind::answer) {
                answer = seg.text();
                break;
            }
            if (seg.kind == SegmentKind::tool_call) {
                const ToolOutcome outcome = tools.call(seg.call().name, seg.call().args);
                ++ep.tool_calls_total;
                if (!outcome.ok) ++ep.tool_calls_failed;
                push({t, outcome.ok ? EventKind::result : EventKind::result_error, outcome.content});
            } else if (seg.malformed) {
                ++ep.tool_calls_total;
                ++ep.tool_calls_failed;
                push({t, EventKind::result_error, std::string(kMalformedCallNotice)});
            }
        }
        if (answer) {
            ep.final_answer = std::move(answer);
            ep.termination = Termination::answered;
            break;
        }
        if (turn >= config.max_turns) {
            ep.termination = Termination::max_turns;
            break;
        }
    }
    return ep;
}

// --- scripted oracle ------------------------------------------------------------

/// Searches each supporting document by title, scrapes it, then answers with
/// the gold answer. One tool call per turn.
class OraclePolicy : public Policy {
public:
    OraclePolicy(const QaSample& sample, const std::vector<Document>& corpus) : answer_(sample.gold_answer) {
        std::unordered_map<std::string_view, const Document*> by_id;
        for (const auto& d : corpus) by_id.emplace(d.doc_id, &d);
        for (const auto& id : sample.supporting_doc_ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw DanglingReferenceError(id);
            hops_.push_back({id, it->second->title.empty() ? it->second->text : it->second->title});
        }
    }

    std::string next_message(std::string_view transcript) override {
        // Steps taken so far = tool tags this policy has already written;
        // result bodies and the question are escaped, so they contain none.
        std::size_t step = 0;
        for (auto pos = transcript.find("<tool>"); pos != std::string_view::npos; pos = transcript.find("<tool>", pos + 1)) {
            ++step;
        }
        if (step >= 2 * hops_.size()) return render_answer(answer_);
        const Hop& hop = hops_[step / 2];
        if (step % 2 == 0) return render_tool_call({std::string(kWebsearchTool), {{"query", hop.title}}});
        return render_tool_call({std::string(kScrapeTool), {{"doc_id", found_in_last_result(transcript, hop.doc_id)}}});
    }

private:
    struct Hop {
        std::string doc_id;
        std::string title;
    };

    // Prefers the id as listed in the latest search result; falls back to the
    // known id when the search missed it.
    static std::string found_in_last_result(std::string_view transcript, const std::string& doc_id) {
        const auto open = transcript.rfind("<result>");
        if (open != std::string_view::npos) {
            const auto close = transcript.find("</result>", open);
            const auto body = unescape_body(transcript.substr(open + 8, close - open - 8));
            auto parsed = nlohmann::json::parse(body, nullptr, false);
            if (parsed.is_object() && parsed.contains("results") && parsed["results"].is_array()) {
                for (const auto& r : parsed["results"]) {
                    if (r.is_object() && r.value("doc_id", std::string{}) == doc_id) return r["doc_id"].get<std::string>();
                }
            }
        }
        return doc_id;
    }

    std::string answer_;
    std::vector<Hop> hops_;
};

// --- random baseline --------------------------------------------------------------

/// Syntactically valid noise. Answers with probability 0.1 per turn.
class RandomPolicy : public Policy {
public:
    static constexpr double kAnswerProbability = 0.1;

    RandomPolicy(std::uint64_t seed, std::vector<std::string> tool_names)
        : seed_(seed), tool_names_(std::move(tool_names)) {
        if (tool_names_.empty()) tool_names_ = {std::string(kWebsearchTool), std::string(kScrapeTool)};
    }

    std::string next_message(std::string_view transcript) override {
        std::mt19937_64 rng(seed_ ^ fnv1a64(transcript));
        auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
        auto pick = [&](std::size_t n) { return static_cast<std::size_t>(unit() * static_cast<double>(n)); };
        auto words = [&](std::size_t n) {
            std::string s;
            for (std::size_t i = 0; i < n; ++i) {
                if (i) s += ' ';
                s += kVocabulary[pick(kVocabulary.size())];
            }
            return s;
        };

        if (unit() < kAnswerProbability) return render_answer(words(1 + pick(2)));
        const std::string& tool = tool_names_[pick(tool_names_.size())];
        nlohmann::json args = nlohmann::json::object();
        if (tool == kScrapeTool) {
            args["doc_id"] = "d" + std::to_string(pick(10000));
        } else {
            args["query"] = words(1 + pick(4));
        }
        return render_tool_call({tool, std::move(args)});
    }

private:
    static constexpr std::array<std::string_view, 32> kVocabulary{
        "river",  "stone", "city",   "king",   "music", "ocean",  "pebble", "garden",
        "winter", "north", "bridge", "island", "light", "forest", "silver", "engine",
        "castle", "storm", "valley", "harbor", "field", "tower",  "desert", "market",
        "mirror", "cloud", "temple", "signal", "glass", "letter", "summer", "canyon"};

    std::uint64_t seed_;
    std::vector<std::string> tool_names_;
};

// --- remote adapter -----------------------------------------------------------------

/// POST {endpoint}/generate {"transcript","stop"} -> {"text"}. A stop sequence
/// cut off by the server is re-appended so the message parses.
class RemotePolicy : public Policy {
public:
    explicit RemotePolicy(std::string endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(30))
        : endpoint_(std::move(endpoint)), timeout_(timeout) {
        if (!is_well_formed_endpoint(endpoint_)) throw InvalidConfigError("malformed endpoint: " + endpoint_);
    }

    std::string next_message(std::string_view transcript) override {
        nlohmann::json body;
        body["transcript"] = std::string(transcript);
        body["stop"] = {"</tool>", "</answer>"};
        const auto reply = post_json_ok(endpoint_, "/generate", body, timeout_);
        auto it = reply.find("text");
        if (it == reply.end() || !it->is_string()) throw PolicyError("generate reply lacks \"text\"");
        return restore_stop_sequence(it->get<std::string>());
    }

    static std::string restore_stop_sequence(std::string text) {
        auto dangling = [&](std::string_view open, std::string_view close) -> std::optional<std::size_t> {
            const auto o = text.rfind(open);
            if (o == std::string::npos) return std::nullopt;
            const auto c = text.find(close, o);
            if (c != std::string::npos) return std::nullopt;
            return o;
        };
        const auto tool = dangling("<tool>", "</tool>");
        const auto answer = dangling("<answer>", "</answer>");
        if (tool && (!answer || *tool > *answer)) {
            text += "</tool>";
        } else if (answer) {
            text += "</answer>";
        }
        return text;
    }

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
};

// --- trace files ------------------------------------------------------------------
// One JSON object per line: {"turn": int, "kind": str, "payload": str}.
// Each episode is framed by "episode_start" (payload = sample_id, turn 0)
// and "episode_end" (payload = termination cause, turn = last turn).

inline void write_trace(std::ostream& out, const Episode& ep) {
    auto line = [&](int turn, std::string_view kind, std::string_view payload) {
        nlohmann::ordered_json obj;
        obj["turn"] = turn;
        obj["kind"] = kind;
        obj["payload"] = payload;
        out << obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    };
    line(0, "episode_start", ep.sample_id);
    int last_turn = 0;
    for (const auto& e : ep.events) {
        line(e.turn, to_string(e.kind), e.payload);
        last_turn = e.turn;
    }
    line(last_turn, "episode_end", to_string(ep.termination));
}

/// Rebuilds episodes from a trace. Tool statistics and the final answer are
/// recomputed from the events.
inline std::vector<Episode> read_trace(std::istream& in) {
    std::vector<Episode> episodes;
    std::optional<Episode> open;
    detail::for_each_jsonl(in, [&](const nlohmann::json& obj, std::size_t line) {
        const auto& turn = detail::require_key(obj, "turn", line);
        if (!turn.is_number_integer()) throw FormatError(line, "turn must be an integer");
        const std::string kind = detail::require_string(obj, "kind", line);
        std::string payload = detail::require_string(obj, "payload", line);
        if (kind == "episode_start") {
            if (open) throw FormatError(line, "episode_start inside an open episode");
            open.emplace();
            open->sample_id = std::move(payload);
            return;
        }
        if (!open) throw FormatError(line, "event outside an episode");
        if (kind == "episode_end") {
            auto cause = termination_from_string(payload);
            if (!cause) throw FormatError(line, "unknown termination cause \"" + payload + "\"");
            open->termination = *cause;
            if (*cause == Termination::answered) {
                const auto messages = open->policy_messages();
                if (messages.empty()) throw FormatError(line, "answered episode without policy turns");
                open->final_answer = extract_answer(parse_assistant_message(messages.back()).segments);
                if (!open->final_answer) throw FormatError(line, "answered episode without an answer");
            }
            episodes.push_back(std::move(*open));
            open.reset();
            return;
        }
        EventKind ek;
        if (kind == "policy") {
            ek = EventKind::policy;
        } else if (kind == "result") {
            ek = EventKind::result;
        } else if (kind == "result_error") {
            ek = EventKind::result_error;
        } else {
            throw FormatError(line, "unknown event kind \"" + kind + "\"");
        }
        if (ek != EventKind::policy) {
            ++open->tool_calls_total;
            if (ek == EventKind::result_error) ++open->tool_calls_failed;
        }
        open->events.push_back({turn.get<int>(), ek, std::move(payload)});
    });
    if (open) throw FormatError(0, "trace ends inside an episode");
    return episodes;
}

}  // namespace searchgym
