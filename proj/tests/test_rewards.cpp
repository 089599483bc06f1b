#include <gtest/gtest.h>

#include <random>

#include "searchgym/rewards.hpp"
#include "test_support.hpp"

using namespace searchgym;

namespace {

QaSample two_hop() {
    QaSample s;
    s.sample_id = "q";
    s.question = "Who?";
    s.gold_answer = "Rudi Dekkers";
    s.answer_aliases = {"R. Dekkers"};
    s.hop_count = 2;
    s.supporting_doc_ids = {"a", "b"};
    return s;
}

// Builds an episode with `calls` tool calls (one per turn, the first `failed`
// of them failing) and a final answer turn.
Episode episode_with(std::size_t calls, std::size_t failed, std::optional<std::string> answer) {
    Episode ep;
    ep.sample_id = "q";
    int turn = 0;
    for (std::size_t i = 0; i < calls; ++i) {
        ++turn;
        ep.events.push_back({turn, EventKind::policy, render_tool_call({"websearch", {{"query", "x"}}})});
        ep.events.push_back({turn, i < failed ? EventKind::result_error : EventKind::result, "r"});
    }
    ep.tool_calls_total = calls;
    ep.tool_calls_failed = failed;
    if (answer) {
        ep.events.push_back({turn + 1, EventKind::policy, render_answer(*answer)});
        ep.final_answer = answer;
        ep.termination = Termination::answered;
    } else {
        ep.termination = Termination::max_turns;
    }
    return ep;
}

}  // namespace

TEST(Correctness, NormalizedExactMatch) {
    EXPECT_EQ(normalize_answer("The Eiffel Tower!"), "eiffel tower");
    EXPECT_EQ(correctness(std::string("Rudi Dekkers"), "Rudi Dekkers", {}), 1.0);
    EXPECT_EQ(correctness(std::string("  rudi   DEKKERS. "), "Rudi Dekkers", {}), 1.0);
    EXPECT_EQ(correctness(std::nullopt, "Rudi Dekkers", {}), 0.0);
    EXPECT_EQ(correctness(std::string("r dekkers"), "Rudi Dekkers", {"R. Dekkers"}), 1.0);
    EXPECT_EQ(correctness(std::string("Rudi"), "Rudi Dekkers", {"R. Dekkers"}), 0.0);
    EXPECT_EQ(correctness(std::string(""), "", {}), 1.0);
}

TEST(ToolExecution, Fractions) {
    EXPECT_EQ(tool_execution_score(episode_with(4, 0, "x")), 1.0);
    EXPECT_EQ(tool_execution_score(episode_with(0, 0, "x")), 0.0);
    EXPECT_DOUBLE_EQ(tool_execution_score(episode_with(3, 1, "x")), 2.0 / 3.0);
}

TEST(FormatAdherence, FractionOfCleanTurns) {
    Episode ep;
    EXPECT_EQ(format_adherence_score(ep), 1.0);
    ep.events = {{1, EventKind::policy, R"(<tool>{"name":"a","args":}</tool>)"},
                 {1, EventKind::result_error, std::string(kMalformedCallNotice)},
                 {2, EventKind::policy, "<answer>x</answer>"}};
    EXPECT_EQ(format_adherence_score(ep), 0.5);
    EXPECT_EQ(format_adherence_score(episode_with(3, 3, "y")), 1.0);
}

TEST(XmlCompliance, Cases) {
    EXPECT_EQ(xml_compliance_score("<answer>x</answer>"), 1.0);
    EXPECT_EQ(xml_compliance_score("thinking <answer>x</answer>"), 1.0);
    EXPECT_EQ(xml_compliance_score("<answer>x</answer><answer>y</answer>"), 0.5);
    EXPECT_EQ(xml_compliance_score("no tags at all"), 0.5);
    EXPECT_EQ(xml_compliance_score("<answer>x"), 0.0);
    EXPECT_EQ(xml_compliance_score(""), 0.5);
}

TEST(StepPenalty, Budget) {
    const auto s = two_hop();
    EXPECT_EQ(step_penalty(episode_with(4, 0, "x"), s, 0.05), 0.0);
    EXPECT_DOUBLE_EQ(step_penalty(episode_with(6, 0, "x"), s, 0.05), 0.10);
    EXPECT_EQ(step_penalty(episode_with(30, 0, "x"), s, 0.0), 0.0);
}

TEST(StageReward, Stage1PerfectEpisode) {
    const auto r = stage_reward(episode_with(4, 0, "Rudi Dekkers"), two_hop(), StageWeights::defaults(1));
    EXPECT_EQ(r.correctness, 1.0);
    EXPECT_EQ(r.tool_execution, 1.0);
    EXPECT_EQ(r.format_adherence, 1.0);
    EXPECT_EQ(r.xml_compliance, 1.0);
    EXPECT_EQ(r.step_penalty, 0.0);
    EXPECT_NEAR(r.total, 1.0, 1e-12);
    EXPECT_LE(r.total, 1.0);
}

TEST(StageReward, Stage2IgnoresToolFailures) {
    const auto r = stage_reward(episode_with(3, 3, "Rudi Dekkers"), two_hop(), StageWeights::defaults(2));
    EXPECT_EQ(r.tool_execution, 0.0);
    EXPECT_NEAR(r.total, 1.0, 1e-12);
}

TEST(StageReward, Stage2WrongAnswerIsXmlOnly) {
    for (int stage : {2, 3}) {
        const auto r = stage_reward(episode_with(2, 0, "someone else"), two_hop(), StageWeights::defaults(stage));
        EXPECT_EQ(r.correctness, 0.0);
        EXPECT_DOUBLE_EQ(r.total, 0.1 * r.xml_compliance);
    }
}

TEST(StageReward, PenaltyClampsAtZero) {
    const auto r = stage_reward(episode_with(60, 60, std::nullopt), two_hop(), StageWeights::defaults(1));
    EXPECT_GT(r.step_penalty, 1.0);
    EXPECT_EQ(r.total, 0.0);
}

TEST(CombineReward, BoundedAndMonotone) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int stage : {1, 2, 3}) {
        const auto w = StageWeights::defaults(stage);
        for (int i = 0; i < 2000; ++i) {
            const double t = u(rng), f = u(rng), x = u(rng), p = u(rng) * 2;
            const auto lo = combine_reward(0.0, t, f, x, p, w);
            const auto hi = combine_reward(1.0, t, f, x, p, w);
            EXPECT_GE(lo.total, 0.0);
            EXPECT_LE(hi.total, 1.0);
            EXPECT_GE(hi.total, lo.total);
            if (stage > 1) {
                EXPECT_EQ(combine_reward(1.0, u(rng), u(rng), x, p, w).total, hi.total);
            }
        }
    }
}

TEST(StageWeights, Validation) {
    for (int stage : {1, 2, 3}) EXPECT_NO_THROW(StageWeights::defaults(stage).validate());
    EXPECT_THROW(StageWeights::defaults(4), InvalidWeightsError);
    StageWeights w;
    w.w_correct = 0.5;
    EXPECT_THROW(w.validate(), InvalidWeightsError);
    w = StageWeights::defaults(2);
    w.w_tool = 0.05;
    w.w_correct = 0.85;
    EXPECT_THROW(w.validate(), InvalidWeightsError);
    w = StageWeights::defaults(1);
    w.penalty_lambda = -0.1;
    EXPECT_THROW(w.validate(), InvalidWeightsError);
    w = StageWeights::defaults(1);
    w.w_xml = std::nan("");
    EXPECT_THROW(w.validate(), InvalidWeightsError);
    EXPECT_THROW(stage_reward(Episode{}, two_hop(), w), InvalidWeightsError);
}

TEST(StageWeights, FileParsing) {
    searchgym::testing::TempDir dir;
    const auto good = dir.write(
        "w.json", R"({"stage":2,"w_correct":0.8,"w_tool":0,"w_format":0,"w_xml":0.2,"penalty_lambda":0.01})");
    const auto w = load_stage_weights(good);
    EXPECT_EQ(w.stage, 2);
    EXPECT_EQ(w.w_correct, 0.8);
    EXPECT_EQ(w.penalty_lambda, 0.01);
    EXPECT_THROW(load_stage_weights(dir.write("bad.json", "{not json")), InvalidWeightsError);
    EXPECT_THROW(load_stage_weights(dir.write("missing.json", R"({"stage":1})")), InvalidWeightsError);
    EXPECT_THROW(load_stage_weights(dir / "absent.json"), IoError);
}

TEST(RewardBreakdown, JsonKeys) {
    const auto j = to_json(combine_reward(1, 1, 1, 1, 0, StageWeights::defaults(2)));
    EXPECT_EQ(j.dump(),
              R"({"correctness":1.0,"tool_execution":1.0,"format_adherence":1.0,"xml_compliance":1.0,"step_penalty":0.0,"total":1.0})");
}
