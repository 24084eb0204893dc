#include <gtest/gtest.h>

#include <cmath>

#include "ctrlgen/ctrlgen.hpp"

using namespace ctrlgen;

namespace {

struct RewardFixture : ::testing::Test {
    Universe u = build_universe(6, 3, 1);
    TokenId I(int i) const { return u.vocab.id("I" + std::to_string(i)); }
    TokenId H(int i) const { return u.vocab.id("H" + std::to_string(i)); }

    PromptSpec prompt(TokenSeq info, TokenSeq hazard) const {
        PromptSpec p;
        p.tokens = {u.vocab.id(tokens::ask)};
        p.tokens.insert(p.tokens.end(), info.begin(), info.end());
        std::sort(info.begin(), info.end());
        std::sort(hazard.begin(), hazard.end());
        p.requested_info = info;
        p.hazard_flags = hazard;
        return p;
    }

    double logit(Attribute a, const PromptSpec& x, const TokenSeq& y, ScorerFamily f = ScorerFamily::optimization) const {
        return raw_score(ScorerSpec{a, f, kDefaultGain, 7}, u.vocab, x, y);
    }
};

double sigma(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST(Squash, Examples) {
    EXPECT_EQ(squash(0.0), 0.5);
    EXPECT_NEAR(squash(1.0), 0.7310585786, 1e-9);
    EXPECT_GT(squash(0.01), squash(0.0));
    EXPECT_LT(squash(-3.0), squash(-2.9));
}

TEST_F(RewardFixture, HalfCoverageGivesZeroLogit) {
    const auto x = prompt({I(1), I(2)}, {});
    EXPECT_NEAR(logit(Attribute::helpfulness, x, {I(1)}), 0.0, 1e-12);
}

TEST_F(RewardFixture, NoHazardGivesPlusGain) {
    const auto x = prompt({H(1)}, {H(1)});
    EXPECT_DOUBLE_EQ(logit(Attribute::safety, x, {u.vocab.id(tokens::sorry)}), 4.0);
}

TEST_F(RewardFixture, EmptyResponseFloors) {
    const auto x = prompt({I(1), I(3)}, {});
    EXPECT_DOUBLE_EQ(logit(Attribute::helpfulness, x, {}), -4.0);
    const RewardPanel panel(u.vocab);
    const ScorePair s = panel.score_pair(x, TokenSeq{}, ScorerFamily::optimization);
    EXPECT_NEAR(s.hp, sigma(-4.0), 1e-12);
    EXPECT_NEAR(s.sf, sigma(4.0), 1e-12);
}

TEST_F(RewardFixture, ScorePairCorners) {
    const RewardPanel panel(u.vocab);
    const auto benign = prompt({I(1), I(2)}, {});
    const ScorePair full = panel.score_pair(benign, TokenSeq{I(2), I(1)}, ScorerFamily::optimization);
    EXPECT_NEAR(full.hp, 0.9820, 1e-4);
    EXPECT_NEAR(full.sf, 0.9820, 1e-4);

    const auto trade = prompt({H(1), H(2)}, {H(1), H(2)});
    const ScorePair unsafe = panel.score_pair(trade, TokenSeq{H(1), H(2)}, ScorerFamily::optimization);
    EXPECT_NEAR(unsafe.hp, sigma(4.0), 1e-12);
    EXPECT_NEAR(unsafe.sf, sigma(-4.0), 1e-12);
}

TEST_F(RewardFixture, HazardRateCountsDistinctTypesAndCaps) {
    const auto x = prompt({I(1), H(1)}, {H(1)});
    const double once = logit(Attribute::safety, x, {H(1)});
    EXPECT_DOUBLE_EQ(logit(Attribute::safety, x, {H(1), H(1), H(1)}), once);
    // Unrequested hazards also count; the rate is capped at 1.
    EXPECT_DOUBLE_EQ(logit(Attribute::safety, x, {H(1), H(2), H(3)}), -4.0);
}

TEST_F(RewardFixture, HeldoutWeightsInRangeAndMeanOne) {
    const ScorerSpec spec{Attribute::helpfulness, ScorerFamily::heldout, kDefaultGain, 99};
    const auto w = scorer_token_weights(spec, u.vocab);
    double sum = 0.0;
    int n = 0;
    for (std::uint32_t i = 0; i < u.vocab.size(); ++i) {
        const TokenKind k = u.vocab.kind(TokenId{i});
        if (k == TokenKind::info || k == TokenKind::hazard) {
            sum += w[i];
            ++n;
            const double raw = detail::heldout_raw_weight(99, TokenId{i});
            EXPECT_GE(raw, 0.5);
            EXPECT_LE(raw, 1.5);
        } else {
            EXPECT_EQ(w[i], 1.0);
        }
    }
    EXPECT_NEAR(sum / n, 1.0, 1e-12);
}

TEST_F(RewardFixture, ScoresStayInOpenUnitInterval) {
    const RewardPanel panel(u.vocab);
    Rng rng(3);
    const TokenSeq content = [&] {
        TokenSeq c = u.info_tokens();
        const TokenSeq h = u.hazard_tokens();
        c.insert(c.end(), h.begin(), h.end());
        return c;
    }();
    const auto x = prompt({I(1), I(2), H(1)}, {H(1)});
    for (int i = 0; i < 200; ++i) {
        TokenSeq y;
        for (std::uint64_t k = rng.below(6); k > 0; --k) y.push_back(content[rng.below(content.size())]);
        for (ScorerFamily f : kScorerFamilies) {
            const ScorePair s = panel.score_pair(x, y, f);
            EXPECT_GT(s.hp, 0.0);
            EXPECT_LT(s.hp, 1.0);
            EXPECT_GT(s.sf, 0.0);
            EXPECT_LT(s.sf, 1.0);
        }
    }
}

TEST_F(RewardFixture, OptimizationScorerIsPure) {
    const RewardPanel a(u.vocab), b(u.vocab);
    const auto x = prompt({I(1), H(2)}, {H(2)});
    const TokenSeq y{I(1), H(2)};
    const ScorePair s1 = a.score_pair(x, y, ScorerFamily::optimization);
    const ScorePair s2 = b.score_pair(x, y, ScorerFamily::optimization);
    EXPECT_EQ(s1.hp, s2.hp);
    EXPECT_EQ(s1.sf, s2.sf);
}

TEST_F(RewardFixture, HeldoutPositivelyRankCorrelatedWithOptimization) {
    const RewardPanel panel(u.vocab);
    const auto x = prompt({I(1), I(2), I(3), H(1), H(2)}, {H(1), H(2)});
    const TokenSeq pool{I(1), I(2), I(3), I(4), H(1), H(2), H(3)};
    Rng rng(11);
    std::vector<double> opt_hp, held_hp, opt_sf, held_sf;
    for (int i = 0; i < 200; ++i) {
        TokenSeq y;
        for (TokenId t : pool) {
            if (rng.bernoulli(0.4)) y.push_back(t);
        }
        const ScorePair o = panel.score_pair(x, y, ScorerFamily::optimization);
        const ScorePair h = panel.score_pair(x, y, ScorerFamily::heldout);
        opt_hp.push_back(o.hp);
        held_hp.push_back(h.hp);
        opt_sf.push_back(o.sf);
        held_sf.push_back(h.sf);
    }
    EXPECT_GT(spearman(opt_hp, held_hp).value(), 0.0);
    EXPECT_GT(spearman(opt_sf, held_sf).value(), 0.0);
}

TEST_F(RewardFixture, TradeoffPromptsAdmitNoDoubleWin) {
    // On hazard_flags = requested_info no subset of content scores above
    // sigma(0) on both attributes.
    const RewardPanel panel(u.vocab);
    const TokenSeq req{H(1), H(2), H(3)};
    const auto x = prompt(req, req);
    const TokenSeq pool{H(1), H(2), H(3), I(1), I(2)};
    for (unsigned mask = 0; mask < (1u << pool.size()); ++mask) {
        TokenSeq y;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (mask & (1u << i)) y.push_back(pool[i]);
        }
        const ScorePair s = panel.score_pair(x, y, ScorerFamily::optimization);
        EXPECT_FALSE(s.hp > 0.5 && s.sf > 0.5) << mask;
    }
}

TEST(RewardPanel, RejectsNonPositiveGain) {
    const Universe u = build_universe(4, 2, 1);
    EXPECT_THROW(RewardPanel(u.vocab, 0.0), DomainError);
}
