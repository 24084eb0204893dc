#include <gtest/gtest.h>

#include "ctrlgen/ctrlgen.hpp"

using namespace ctrlgen;

namespace {

struct BaselineFixture : ::testing::Test {
    Universe u = build_universe(4, 2, 1);
    std::vector<PromptSpec> prompts = make_prompts(u, 30, 0.3, 6);
    ModelParams p = [&] {
        ModelShape s;
        s.context_window = 24;
        s.d_model = 8;
        s.d_hidden = 8;
        s.n_blocks = 1;
        return init_model(u.vocab, s, 5);
    }();
    RewardPanel panel{u.vocab};
    SamplerConfig cfg = [] {
        SamplerConfig c;
        c.max_len = 6;
        c.temperature = 1.5;
        c.seed = 3;
        return c;
    }();
};

}  // namespace

TEST_F(BaselineFixture, PromptingIsDeterministicAndConditionsOnRendering) {
    for (PromptFormat f : kPromptFormats) {
        const TokenSeq a = prompt_generate(p, prompts[0].tokens, kControlGrid[1], f, cfg);
        EXPECT_EQ(a, prompt_generate(p, prompts[0].tokens, kControlGrid[1], f, cfg));
        EXPECT_EQ(a, sample(p, prompts[0].tokens, encode_control(p.vocab, kControlGrid[1], f), cfg));
    }
    EXPECT_THROW(prompt_generate(p, prompts[0].tokens, ControlPair::raw(0.5, 0.5), PromptFormat::numeric_harmless, cfg),
                 DomainError);
}

TEST_F(BaselineFixture, RerankWithOneCandidateIsPrompting) {
    for (const auto& x : prompts) {
        EXPECT_EQ(rerank(p, x, kControlGrid[3], 1, PromptFormat::numeric_harmless, cfg, panel),
                  prompt_generate(p, x.tokens, kControlGrid[3], PromptFormat::numeric_harmless, cfg));
    }
}

TEST(Rerank, SpecExamplePicksNearest) {
    const std::vector<ScorePair> scores{{0.9, 0.9}, {0.2, 0.9}, {0.5, 0.5}};
    RerankAudit audit;
    const TokenSeq y = rerank_with([](int i) { return TokenSeq{TokenId{static_cast<std::uint32_t>(i)}}; },
                                   [&](const TokenSeq& s) { return scores[s[0].value]; }, kControlGrid[3], 3, &audit);
    EXPECT_EQ(y, TokenSeq{TokenId{0}});
    EXPECT_NEAR(target_distance(scores[0], kControlGrid[3]), 0.141, 1e-3);
    EXPECT_NEAR(target_distance(scores[1], kControlGrid[3]), 0.806, 1e-3);
    EXPECT_NEAR(target_distance(scores[2], kControlGrid[3]), 0.707, 1e-3);
}

TEST(Rerank, ExactMatchAlwaysWinsAndTiesGoToLowestIndex) {
    const std::vector<ScorePair> exact{{0.7, 0.7}, {0.2, 1.0}, {0.2, 1.0}};
    RerankAudit audit;
    rerank_with([](int i) { return TokenSeq{TokenId{static_cast<std::uint32_t>(i)}}; },
                [&](const TokenSeq& s) { return exact[s[0].value]; }, kControlGrid[1], 3, &audit);
    EXPECT_EQ(audit.chosen, 1u);
    EXPECT_THROW(rerank_with([](int) { return TokenSeq{}; }, [](const TokenSeq&) { return ScorePair{}; },
                             kControlGrid[0], 0),
                 DomainError);
}

TEST_F(BaselineFixture, CallCountsAndDistanceMinimality) {
    int decisions = 0;
    for (const auto& x : prompts) {
        for (const ControlPair& c : kControlGrid) {
            int draws = 0, scores = 0;
            RerankAudit audit;
            rerank_with(
                [&](int i) {
                    ++draws;
                    return prompt_generate(p, x.tokens, c, PromptFormat::numeric_harmless,
                                           cfg.with_seed(candidate_seed(cfg.seed + decisions, i)));
                },
                [&](const TokenSeq& y) {
                    ++scores;
                    return panel.score_pair(x, y, ScorerFamily::optimization);
                },
                c, 3, &audit);
            EXPECT_EQ(draws, 3);
            EXPECT_EQ(scores, 3);
            ASSERT_EQ(audit.scores.size(), 3u);
            for (const auto& s : audit.scores) {
                EXPECT_LE(target_distance(audit.scores[audit.chosen], c), target_distance(s, c));
            }
            ++decisions;
        }
    }
    EXPECT_EQ(decisions, 120);
}

TEST_F(BaselineFixture, RerankReturnsTheChosenCandidate) {
    RerankAudit audit;
    const TokenSeq y = rerank(p, prompts[2], kControlGrid[0], 3, PromptFormat::numeric_harmless, cfg, panel, &audit);
    const ScorePair s = panel.score_pair(prompts[2], y, ScorerFamily::optimization);
    EXPECT_EQ(s.hp, audit.scores[audit.chosen].hp);
    EXPECT_EQ(s.sf, audit.scores[audit.chosen].sf);
}
