#pragma once

// Terminal, stage-weighted verifiable rewards over completed episodes.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchgym/corpus.hpp"
#include "searchgym/episode.hpp"
#include "searchgym/errors.hpp"
#include "searchgym/protocol.hpp"
#include "searchgym/text.hpp"

namespace searchgym {

struct RewardBreakdown {
    double correctness = 0.0;
    double tool_execution = 0.0;
    double format_adherence = 0.0;
    double xml_compliance = 0.0;
    double step_penalty = 0.0;
    double total = 0.0;

    friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

struct StageWeights {
    int stage = 1;
    double w_correct = 0.4;
    double w_tool = 0.2;
    double w_format = 0.2;
    double w_xml = 0.2;
    double penalty_lambda = 0.05;

    /// Stage 1 rewards tool mechanics; stages 2 and 3 keep only correctness
    /// and XML structure.
    static StageWeights defaults(int stage) {
        if (stage == 1) return {1, 0.4, 0.2, 0.2, 0.2, 0.05};
        if (stage == 2 || stage == 3) return {stage, 0.9, 0.0, 0.0, 0.1, 0.05};
        throw InvalidWeightsError("stage must be 1, 2 or 3");
    }

    void validate() const {
        if (stage < 1 || stage > 3) throw InvalidWeightsError("stage must be 1, 2 or 3");
        for (double w : {w_correct, w_tool, w_format, w_xml, penalty_lambda}) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidWeightsError("weights must be finite and non-negative");
        }
        if (std::abs(w_correct + w_tool + w_format + w_xml - 1.0) > 1e-9) {
            throw InvalidWeightsError("component weights must sum to 1");
        }
        if (stage >= 2 && (w_tool != 0.0 || w_format != 0.0)) {
            throw InvalidWeightsError("stages 2 and 3 carry no tool or format weight");
        }
    }
};

inline StageWeights parse_stage_weights(const nlohmann::json& obj) {
    if (!obj.is_object()) throw InvalidWeightsError("weights file must hold a JSON object");
    auto number = [&](const char* key) {
        auto it = obj.find(key);
        if (it == obj.end() || !it->is_number()) throw InvalidWeightsError(std::string("missing numeric \"") + key + "\"");
        return it->get<double>();
    };
    auto stage = obj.find("stage");
    if (stage == obj.end() || !stage->is_number_integer()) throw InvalidWeightsError("missing integer \"stage\"");
    StageWeights w{stage->get<int>(), number("w_correct"), number("w_tool"), number("w_format"), number("w_xml"),
                   number("penalty_lambda")};
    w.validate();
    return w;
}

inline StageWeights load_stage_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    auto obj = nlohmann::json::parse(in, nullptr, false);
    if (obj.is_discarded()) throw InvalidWeightsError("weights file is not valid JSON");
    return parse_stage_weights(obj);
}

inline double correctness(const std::optional<std::string>& final_answer, const std::string& gold,
                          const std::vector<std::string>& aliases) {
    if (!final_answer) return 0.0;
    const std::string answer = normalize_answer(*final_answer);
    if (answer == normalize_answer(gold)) return 1.0;
    for (const auto& alias : aliases) {
        if (answer == normalize_answer(alias)) return 1.0;
    }
    return 0.0;
}

inline double tool_execution_score(const Episode& ep) {
    if (ep.tool_calls_total == 0) return 0.0;
    return static_cast<double>(ep.tool_calls_total - ep.tool_calls_failed) / static_cast<double>(ep.tool_calls_total);
}

inline double format_adherence_score(const Episode& ep) {
    const auto messages = ep.policy_messages();
    if (messages.empty()) return 1.0;
    std::size_t clean = 0;
    for (auto m : messages) clean += parse_assistant_message(m).errors.empty() ? 1 : 0;
    return static_cast<double>(clean) / static_cast<double>(messages.size());
}

inline double xml_compliance_score(std::string_view final_turn_text) {
    const XmlReport r = xml_report(final_turn_text);
    if (!r.well_formed) return 0.0;
    return (r.open_tags_balanced && r.answer_count == 1) ? 1.0 : 0.5;
}

/// One search plus one scrape per hop is free; every extra call costs lambda.
inline double step_penalty(const Episode& ep, const QaSample& sample, double penalty_lambda) {
    const std::size_t budget = 2 * static_cast<std::size_t>(std::max(sample.hop_count, 0));
    const std::size_t extra = ep.tool_calls_total > budget ? ep.tool_calls_total - budget : 0;
    return penalty_lambda * static_cast<double>(extra);
}

/// Weighted components are combined from explicit component scores so that
/// callers can perturb individual inputs.
inline RewardBreakdown combine_reward(double correct, double tool, double format, double xml, double penalty,
                                      const StageWeights& w) {
    RewardBreakdown r{correct, tool, format, xml, penalty, 0.0};
    const double weighted = w.w_correct * correct + w.w_tool * tool + w.w_format * format + w.w_xml * xml;
    // Bounded to [0, 1]: penalties never go negative and rounding in the
    // weighted sum never exceeds 1.
    r.total = std::clamp(weighted - penalty, 0.0, 1.0);
    return r;
}

inline RewardBreakdown stage_reward(const Episode& ep, const QaSample& sample, const StageWeights& weights) {
    weights.validate();
    const auto messages = ep.policy_messages();
    const std::string_view last = messages.empty() ? std::string_view{} : messages.back();
    return combine_reward(correctness(ep.final_answer, sample.gold_answer, sample.answer_aliases),
                          tool_execution_score(ep), format_adherence_score(ep), xml_compliance_score(last),
                          step_penalty(ep, sample, weights.penalty_lambda), weights);
}

inline nlohmann::ordered_json to_json(const RewardBreakdown& r) {
    nlohmann::ordered_json j;
    j["correctness"] = r.correctness;
    j["tool_execution"] = r.tool_execution;
    j["format_adherence"] = r.format_adherence;
    j["xml_compliance"] = r.xml_compliance;
    j["step_penalty"] = r.step_penalty;
    j["total"] = r.total;
    return j;
}

}  // namespace searchgym
