#include <gtest/gtest.h>

#include <cmath>

#include "ctrlgen/ctrlgen.hpp"
#include "support/oracles.hpp"

using namespace ctrlgen;

namespace {

constexpr PromptFormat kFmt = PromptFormat::numeric_harmless;

ModelParams uniform_model() {
    ModelParams p = oracle::tiny_model(1);
    std::fill(p.weights.begin(), p.weights.end(), 0.0);
    return p;
}

TrainExample example(const ModelParams& p, ControlPair c = kControlGrid[3]) {
    return TrainExample{PromptId{4},
                        {p.vocab.id(tokens::ask), p.vocab.id("I1"), p.vocab.id("I2"), p.vocab.id(tokens::go)},
                        {p.vocab.id("I1"), p.vocab.id("I2"), p.eos()},
                        c};
}

}  // namespace

TEST(Clm, UniformModelLoss) {
    const ModelParams p = uniform_model();
    const std::vector<TrainExample> batch{example(p)};
    EXPECT_NEAR(clm_loss(p, batch, kFmt), 3.0 * std::log(static_cast<double>(p.vocab.size())), 1e-12);
}

TEST(Clm, PerfectFitHasZeroLoss) {
    // Output bias saturated on a one-token response.
    ModelParams p = uniform_model();
    const TrainExample ex{PromptId{1}, {p.vocab.id(tokens::ask)}, {p.eos()}, kControlGrid[0]};
    const auto& out_b = p.layout().out_b;
    p.weights[out_b.offset + p.eos().value] = 800.0;
    EXPECT_NEAR(clm_loss(p, std::vector<TrainExample>{ex}, kFmt), 0.0, 1e-12);
}

TEST(Clm, GradientStepDecreasesLoss) {
    ModelParams p = oracle::tiny_model(3);
    const std::vector<TrainExample> batch{example(p)};
    std::vector<double> g(p.weights.size(), 0.0);
    const double before = clm_loss(p, batch, kFmt, &g);
    for (std::size_t i = 0; i < g.size(); ++i) p.weights[i] -= 1e-2 * g[i];
    EXPECT_LT(clm_loss(p, batch, kFmt), before);
}

TEST(Clm, EmptyBatchRejected) {
    const ModelParams p = oracle::tiny_model(3);
    EXPECT_THROW(clm_loss(p, std::vector<TrainExample>{}, kFmt), DomainError);
}

TEST(Plm, CountsEveryPosition) {
    const ModelParams p = uniform_model();
    const double lnV = std::log(static_cast<double>(p.vocab.size()));
    TrainExample ex = example(p);
    ex.x = {p.vocab.id(tokens::ask), p.vocab.id("I1"), p.vocab.id(tokens::go)};  // |control| + |x| = 5
    const std::vector<TrainExample> batch{ex};
    EXPECT_NEAR(plm_loss(p, batch, kFmt), 8.0 * lnV, 1e-12);
    EXPECT_NEAR(clm_loss(p, batch, kFmt), 3.0 * lnV, 1e-12);
}

TEST(Plm, EqualsClmWithoutPrefix) {
    // With no control tokens and no prompt every position belongs to y.
    const ModelParams p = oracle::tiny_model(5);
    const TokenSeq y{p.vocab.id("I3"), p.eos()};
    const double full = sequence_nll(p, {}, {}, y, LossSpan::full, 1.0, nullptr);
    const double resp = sequence_nll(p, {}, {}, y, LossSpan::response, 1.0, nullptr);
    EXPECT_EQ(full, resp);
}

TEST(Gradients, SupervisedLossesMatchFiniteDifferences) {
    for (int heads : {1, 2}) {
        ModelParams p = oracle::tiny_model(7, heads, 1);
        ASSERT_LE(p.parameter_count(), 1000u);
        Rng rng(17);
        for (int b = 0; b < 3; ++b) {
            const auto batch = oracle::random_batch(rng, p, 3);
            const std::uint64_t fake_seed = rng.next_u64();
            const std::vector<std::pair<const char*, std::function<double(std::vector<double>*)>>> losses{
                {"clm", [&](std::vector<double>* g) { return clm_loss(p, batch, kFmt, g); }},
                {"plm", [&](std::vector<double>* g) { return plm_loss(p, batch, kFmt, g); }},
                {"exmate", [&](std::vector<double>* g) { return exmate_loss(p, batch, kFmt, fake_seed, g); }},
            };
            for (const auto& [name, loss] : losses) {
                std::vector<double> g(p.weights.size(), 0.0);
                loss(&g);
                const auto fd = oracle::numeric_gradient(p, [&] { return loss(nullptr); });
                EXPECT_LT(oracle::relative_error(g, fd), 1e-4) << name << " heads " << heads;
            }
        }
    }
}

TEST(Exmate, FakeControlDiffersFromRealAndCoversGrid) {
    for (const ControlPair& real : kControlGrid) {
        std::set<int> seen;
        for (std::uint64_t s = 0; s < 200; ++s) {
            const ControlPair f = fake_control(real, s, PromptId{3});
            EXPECT_NE(f, real);
            EXPECT_TRUE(f.quantized);
            seen.insert(grid_index(f));
        }
        EXPECT_EQ(seen.size(), 3u);
    }
}

TEST(Exmate, DecomposesIntoClmPlusFakeProbability) {
    ModelParams p = oracle::tiny_model(8);
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        const auto batch = oracle::random_batch(rng, p, 4);
        const std::uint64_t seed = rng.next_u64();
        double mean_p = 0.0;
        for (const auto& ex : batch) {
            const ControlPair fake = fake_control(ex.control, seed, ex.prompt_id);
            mean_p += std::exp(logprob(p, ex.x, encode_control(p.vocab, fake, kFmt), ex.y));
        }
        mean_p /= static_cast<double>(batch.size());
        const double diff = exmate_loss(p, batch, kFmt, seed) - clm_loss(p, batch, kFmt);
        EXPECT_NEAR(diff, mean_p, 1e-9);
        EXPECT_GE(diff, 0.0);
        EXPECT_LE(diff, 1.0);
    }
}

TEST(Exmate, ArithmeticExample) {
    EXPECT_NEAR(2.0 + std::exp(-3.0), 2.0498, 1e-4);
}

TEST(Exmate, FakeTermGradientLowersFakeProbability) {
    ModelParams p = oracle::tiny_model(9);
    const std::vector<TrainExample> batch{example(p, kControlGrid[1])};
    const std::uint64_t seed = 5;
    const TokenSeq fake = encode_control(p.vocab, fake_control(batch[0].control, seed, batch[0].prompt_id), kFmt);
    std::vector<double> g_ex(p.weights.size(), 0.0), g_clm(p.weights.size(), 0.0);
    exmate_loss(p, batch, kFmt, seed, &g_ex);
    clm_loss(p, batch, kFmt, &g_clm);
    const double before = std::exp(logprob(p, batch[0].x, fake, batch[0].y));
    for (std::size_t i = 0; i < g_ex.size(); ++i) p.weights[i] -= 0.5 * (g_ex[i] - g_clm[i]);
    EXPECT_LT(std::exp(logprob(p, batch[0].x, fake, batch[0].y)), before);
}

TEST(RCtrl, Examples) {
    EXPECT_EQ(r_ctrl(0.3, 0.9, 0.3, 0.9), 1.0);
    EXPECT_EQ(r_ctrl(1.0, 1.0, 0.0, 0.0), -1.0);
    EXPECT_NEAR(r_ctrl(1.0, 0.2, 0.7, 0.5), 0.82, 1e-12);
    EXPECT_THROW(r_ctrl(1.1, 0.2, 0.5, 0.5), DomainError);
    EXPECT_THROW(r_ctrl(1.0, 0.2, -0.5, 0.5), DomainError);
}

TEST(RCtrl, UniqueMaximumAndConcavity) {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const double sh = rng.uniform(), ss = rng.uniform();
        const double a = rng.uniform(), b = rng.uniform();
        const double c = rng.uniform(), d = rng.uniform();
        if (a != sh || b != ss) EXPECT_LT(r_ctrl(sh, ss, a, b), r_ctrl(sh, ss, sh, ss));
        const double mid = r_ctrl(sh, ss, 0.5 * (a + c), 0.5 * (b + d));
        EXPECT_GE(mid + 1e-12, 0.5 * (r_ctrl(sh, ss, a, b) + r_ctrl(sh, ss, c, d)));
    }
}

TEST(Surrogate, ClipsAtOnePlusEpsilon) {
    const SurrogateTerm t = clipped_surrogate(1.5, 1.0, 0.2);
    EXPECT_DOUBLE_EQ(t.value, 1.2);
    EXPECT_TRUE(t.clipped);
    const SurrogateTerm neg = clipped_surrogate(0.5, -1.0, 0.2);
    EXPECT_DOUBLE_EQ(neg.value, -0.8);
    EXPECT_TRUE(neg.clipped);
    const SurrogateTerm one = clipped_surrogate(1.0, 0.7, 0.2);
    EXPECT_DOUBLE_EQ(one.value, 0.7);
    EXPECT_FALSE(one.clipped);
}

namespace {

struct RLFixture : ::testing::Test {
    Universe u = build_universe(4, 2, 1);
    std::vector<PromptSpec> prompts = make_prompts(u, 20, 0.3, 2);
    ModelParams p = [&] {
        ModelShape s;
        s.context_window = 24;
        s.d_model = 8;
        s.d_hidden = 8;
        s.n_blocks = 1;
        return init_model(u.vocab, s, 3);
    }();
    RewardPanel panel{u.vocab};
    SamplerConfig cfg = [] {
        SamplerConfig c;
        c.max_len = 6;
        c.temperature = 1.0;
        c.seed = 8;
        return c;
    }();
};

}  // namespace

TEST_F(RLFixture, IdenticalPoliciesHaveZeroKl) {
    RLConfig rl;
    rl.episodes_per_update = 8;
    AdamW opt(p.weights.size(), AdamWConfig{});
    const ModelParams ref = p;
    const RLStepDiagnostics d = rlhf_step(p, ref, prompts, rl, kFmt, cfg, panel, opt, 0);
    EXPECT_EQ(d.kl_mean, 0.0);
    EXPECT_GT(d.tokens, 0u);
    EXPECT_GE(d.clip_fraction, 0.0);
    EXPECT_LE(d.clip_fraction, 1.0);
}

TEST_F(RLFixture, ZeroAdvantagesLeaveParamsUnchanged) {
    // One episode per update with a batch-mean baseline has advantage 0.
    RLConfig rl;
    rl.kl_coeff = 0.0;
    rl.episodes_per_update = 1;
    AdamWConfig ac;
    ac.weight_decay = 0.0;
    AdamW opt(p.weights.size(), ac);
    const ModelParams ref = p;
    for (long s = 0; s < 3; ++s) rlhf_step(p, ref, prompts, rl, kFmt, cfg, panel, opt, s);
    EXPECT_EQ(p.weights, ref.weights);
}

TEST_F(RLFixture, EpisodesCarryTerminalRewardAndAdvantage) {
    RLConfig rl;
    rl.kl_coeff = 0.0;
    rl.episodes_per_update = 12;
    const auto eps = collect_episodes(p, p, prompts, rl, kFmt, cfg, panel, 0);
    double mean = 0.0;
    for (const auto& e : eps) {
        const ScorePair s = panel.score_pair(*e.prompt, e.y, ScorerFamily::optimization);
        EXPECT_EQ(e.terminal_reward, r_ctrl(e.control.helpfulness, e.control.safety, s.hp, s.sf));
        EXPECT_EQ(e.total_reward, e.terminal_reward);
        mean += e.total_reward;
        // Ratio one on a fresh snapshot: the surrogate is the plain advantage.
        EXPECT_EQ(clipped_surrogate(1.0, e.advantage, rl.clip_epsilon).value, e.advantage);
    }
    mean /= static_cast<double>(eps.size());
    for (const auto& e : eps) EXPECT_NEAR(e.advantage, e.total_reward - mean, 1e-12);
}

TEST_F(RLFixture, ConfigValidation) {
    RLConfig rl;
    rl.clip_epsilon = 1.0;
    EXPECT_THROW(rl.validate(), DomainError);
    rl = RLConfig{};
    rl.episodes_per_update = 0;
    EXPECT_THROW(rl.validate(), DomainError);
}
