#pragma once

// Batch evaluation: one episode per sample, reward scoring, aggregate reports.

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchgym/corpus.hpp"
#include "searchgym/episode.hpp"
#include "searchgym/rewards.hpp"

namespace searchgym {

struct EvalReport {
    std::size_t n_samples = 0;
    double accuracy = 0.0;
    double mean_total_reward = 0.0;
    double mean_tool_calls = 0.0;
    std::map<int, double> per_hop_accuracy;
    std::map<Termination, std::size_t> termination_histogram;
};

struct ScoredEpisode {
    const QaSample* sample = nullptr;
    Episode episode;
    RewardBreakdown reward;
};

/// Aggregates in input order so results do not depend on scheduling.
inline EvalReport summarize(const std::vector<ScoredEpisode>& scored) {
    EvalReport report;
    report.n_samples = scored.size();
    for (auto t : kTerminations) report.termination_histogram[t] = 0;
    if (scored.empty()) return report;
    std::size_t correct = 0;
    double reward_sum = 0.0;
    double calls_sum = 0.0;
    std::map<int, std::pair<std::size_t, std::size_t>> per_hop;  // hop -> (correct, n)
    for (const auto& s : scored) {
        const bool ok = s.episode.termination == Termination::answered && s.reward.correctness == 1.0;
        correct += ok ? 1 : 0;
        reward_sum += s.reward.total;
        calls_sum += static_cast<double>(s.episode.tool_calls_total);
        auto& hop = per_hop[s.sample->hop_count];
        hop.first += ok ? 1 : 0;
        ++hop.second;
        ++report.termination_histogram[s.episode.termination];
    }
    const auto n = static_cast<double>(scored.size());
    report.accuracy = static_cast<double>(correct) / n;
    report.mean_total_reward = reward_sum / n;
    report.mean_tool_calls = calls_sum / n;
    for (const auto& [hop, counts] : per_hop) {
        report.per_hop_accuracy[hop] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    return report;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["n_samples"] = r.n_samples;
    j["accuracy"] = r.accuracy;
    j["mean_total_reward"] = r.mean_total_reward;
    j["mean_tool_calls"] = r.mean_tool_calls;
    j["per_hop_accuracy"] = nlohmann::ordered_json::object();
    for (const auto& [hop, acc] : r.per_hop_accuracy) j["per_hop_accuracy"][std::to_string(hop)] = acc;
    j["termination_histogram"] = nlohmann::ordered_json::object();
    for (const auto& [cause, count] : r.termination_histogram) j["termination_histogram"][std::string(to_string(cause))] = count;
    return j;
}

using PolicyFactory = std::function<std::unique_ptr<Policy>(const QaSample&)>;

/// Runs every sample, up to `parallel` at a time. Output order follows input.
inline std::vector<ScoredEpisode> run_batch(const std::vector<QaSample>& samples, const PolicyFactory& make_policy,
                                            const ToolRegistry& tools, const EpisodeConfig& config,
                                            const StageWeights& weights, std::size_t parallel = 1) {
    config.validate();
    weights.validate();
    std::vector<ScoredEpisode> out(samples.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < samples.size(); i = next++) {
            try {
                auto policy = make_policy(samples[i]);
                Episode ep = run_episode(*policy, tools, samples[i], config);
                RewardBreakdown reward = stage_reward(ep, samples[i], weights);
                out[i] = ScoredEpisode{&samples[i], std::move(ep), reward};
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = samples.size();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(parallel, samples.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

/// Aggregate means for offline scoring; null when there are no rows.
inline nlohmann::ordered_json aggregate_rewards(const std::vector<ScoredEpisode>& scored) {
    nlohmann::ordered_json j;
    j["n_samples"] = scored.size();
    const char* keys[] = {"accuracy",           "mean_total_reward",  "mean_correctness", "mean_tool_execution",
                          "mean_format_adherence", "mean_xml_compliance", "mean_step_penalty"};
    if (scored.empty()) {
        for (const char* k : keys) j[k] = nullptr;
        return j;
    }
    const EvalReport report = summarize(scored);
    double c = 0, t = 0, f = 0, x = 0, p = 0;
    for (const auto& s : scored) {
        c += s.reward.correctness;
        t += s.reward.tool_execution;
        f += s.reward.format_adherence;
        x += s.reward.xml_compliance;
        p += s.reward.step_penalty;
    }
    const auto n = static_cast<double>(scored.size());
    j["accuracy"] = report.accuracy;
    j["mean_total_reward"] = report.mean_total_reward;
    j["mean_correctness"] = c / n;
    j["mean_tool_execution"] = t / n;
    j["mean_format_adherence"] = f / n;
    j["mean_xml_compliance"] = x / n;
    j["mean_step_penalty"] = p / n;
    return j;
}

/// Re-scores traced episodes against the dataset. Throws FormatError when a
/// traced sample_id is not in the dataset.
inline std::vector<ScoredEpisode> score_trace(std::vector<Episode> episodes, const std::vector<QaSample>& dataset,
                                              const StageWeights& weights) {
    weights.validate();
    std::unordered_map<std::string_view, const QaSample*> by_id;
    for (const auto& s : dataset) by_id.emplace(s.sample_id, &s);
    std::vector<ScoredEpisode> out;
    out.reserve(episodes.size());
    for (auto& ep : episodes) {
        auto it = by_id.find(ep.sample_id);
        if (it == by_id.end()) throw FormatError(0, "trace sample " + ep.sample_id + " is not in the dataset");
        RewardBreakdown reward = stage_reward(ep, *it->second, weights);
        out.push_back({it->second, std::move(ep), reward});
    }
    return out;
}

}  // namespace searchgym
