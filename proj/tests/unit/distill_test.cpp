#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

#include "ctrlgen/ctrlgen.hpp"
#include "support/oracles.hpp"

using namespace ctrlgen;

namespace {

ScoredSample sample_at(std::uint32_t prompt, std::uint32_t tag, double hp, double sf) {
    return ScoredSample{PromptId{prompt}, {TokenId{2}, TokenId{3}}, {TokenId{tag}, TokenId{1}}, hp, sf};
}

std::set<std::uint32_t> prompt_set(const std::vector<TrainExample>& ex) {
    std::set<std::uint32_t> s;
    for (const auto& e : ex) s.insert(e.prompt_id.value);
    return s;
}

TrainExample ex_at(std::uint32_t prompt, int cell) {
    return TrainExample{PromptId{prompt}, {TokenId{2}}, {TokenId{prompt}}, kControlGrid[static_cast<std::size_t>(cell)]};
}

}  // namespace

TEST(Moec, RetainsPromptWithTwoDistinctPairs) {
    const std::vector<ScoredSample> in{sample_at(1, 6, 0.1, 0.9), sample_at(1, 7, 0.9, 0.9)};
    const auto out = moec(in, 1);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].control, ControlPair::make(0.2, 1.0));
    EXPECT_EQ(out[1].control, ControlPair::make(1.0, 1.0));
}

TEST(Moec, DropsPromptWithSinglePair) {
    const std::vector<ScoredSample> in{sample_at(1, 6, 0.9, 0.95), sample_at(1, 7, 0.85, 0.99), sample_at(1, 8, 0.5, 0.1)};
    EXPECT_TRUE(moec(in, 1).empty());
}

TEST(Moec, ExcludesNonExtremeSamples) {
    const std::vector<ScoredSample> in{sample_at(1, 6, 0.5, 0.9), sample_at(1, 7, 0.1, 0.1), sample_at(1, 8, 0.9, 0.1)};
    const auto out = moec(in, 3);
    ASSERT_EQ(out.size(), 2u);
    for (const auto& e : out) EXPECT_NE(e.y.front().value, 6u);
}

TEST(Moec, SelectionIsSeededAndCoversCandidates) {
    std::vector<ScoredSample> in{sample_at(1, 6, 0.05, 0.05)};
    for (std::uint32_t t = 7; t < 11; ++t) in.push_back(sample_at(1, t, 0.95, 0.95));
    std::set<std::uint32_t> chosen;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto out = moec(in, seed);
        EXPECT_EQ(out, moec(in, seed));
        chosen.insert(out.back().y.front().value);
    }
    EXPECT_EQ(chosen.size(), 4u);
}

TEST(Moec, PropertiesOnRandomDatasets) {
    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        const auto in = oracle::random_samples(rng);
        const auto out = moec(in, rng.next_u64());
        EXPECT_EQ(oracle::moec_violation(in, out), "") << "dataset " << i;
    }
}

TEST(Vanilla, NearestOfTwoQuantizer) {
    EXPECT_EQ(quantize_nearest(0.55), 0.2);
    EXPECT_EQ(quantize_nearest(0.65), 1.0);
    EXPECT_EQ(quantize_nearest(0.6), 1.0);
}

TEST(Vanilla, KeepsEveryPromptAndDominatesMoec) {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto in = oracle::random_samples(rng);
        const auto v = vanilla(in, 9);
        std::set<std::uint32_t> in_ids;
        for (const auto& s : in) in_ids.insert(s.prompt_id.value);
        EXPECT_EQ(prompt_set(v), in_ids);
        EXPECT_GE(v.size(), moec(in, 9).size());
        std::set<std::pair<std::uint32_t, int>> seen;
        for (const auto& e : v) EXPECT_TRUE(seen.insert({e.prompt_id.value, grid_index(e.control)}).second);
    }
}

TEST(Oversample, BalancesCountsFromSpecExample) {
    std::vector<TrainExample> ex;
    std::uint32_t id = 0;
    auto add = [&](int cell, int n) {
        for (int i = 0; i < n; ++i) ex.push_back(ex_at(id++, cell));
    };
    add(3, 10);  // (1,1)
    add(2, 2);   // (1,0.2)
    add(1, 10);  // (0.2,1)
    add(0, 10);  // (0.2,0.2)
    const auto r = oversample(ex, 4);
    const auto counts = control_counts(r.examples);
    for (std::size_t c : counts) EXPECT_EQ(c, 10u);
    EXPECT_EQ(r.examples.size(), 40u);
    std::size_t dup = 0;
    for (std::size_t i = ex.size(); i < r.examples.size(); ++i) {
        EXPECT_EQ(grid_index(r.examples[i].control), 2);
        ++dup;
    }
    EXPECT_EQ(dup, 8u);
    EXPECT_TRUE(r.empty_pairs.empty());
}

TEST(Oversample, BalancedInputIsFixedPoint) {
    std::vector<TrainExample> ex;
    for (int c = 0; c < 4; ++c) {
        for (std::uint32_t i = 0; i < 3; ++i) ex.push_back(ex_at(i * 4 + c, c));
    }
    EXPECT_EQ(oversample(ex, 1).examples, ex);
}

TEST(Oversample, EmptyClassStaysEmptyAndIsReported) {
    std::vector<TrainExample> ex{ex_at(1, 0), ex_at(2, 1), ex_at(3, 1), ex_at(4, 3)};
    const auto r = oversample(ex, 2);
    const auto counts = control_counts(r.examples);
    EXPECT_EQ(counts[2], 0u);
    EXPECT_EQ(counts[0], 2u);
    EXPECT_EQ(counts[3], 2u);
    ASSERT_EQ(r.empty_pairs.size(), 1u);
    EXPECT_EQ(r.empty_pairs[0], kControlGrid[2]);
    EXPECT_THROW(oversample({}, 1), DomainError);
}

TEST(DatasetStats, IdenticalScoresCorrelatePerfectly) {
    std::vector<ScoredSample> in;
    Rng rng(3);
    for (std::uint32_t i = 0; i < 30; ++i) {
        const double v = rng.uniform();
        in.push_back(sample_at(i, 6, v, v));
    }
    const auto st = dataset_stats(in);
    EXPECT_NEAR(*st.pearson, 1.0, 1e-12);
    EXPECT_NEAR(*st.spearman, 1.0, 1e-12);
}

TEST(DatasetStats, DegenerateVarianceIsUndefined) {
    std::vector<ScoredSample> in{sample_at(1, 6, 0.3, 0.1), sample_at(2, 6, 0.3, 0.9)};
    const auto st = dataset_stats(in);
    EXPECT_FALSE(st.pearson.has_value());
    EXPECT_FALSE(st.spearman.has_value());
}

TEST(DatasetStats, CorrelationsMatchReference) {
    Rng rng(12);
    std::vector<ScoredSample> in;
    std::vector<double> hp, sf;
    for (std::uint32_t i = 0; i < 50; ++i) {
        in.push_back(sample_at(i, 6, rng.uniform(), rng.uniform()));
        hp.push_back(in.back().s_hp);
        sf.push_back(in.back().s_sf);
    }
    const auto st = dataset_stats(in);
    EXPECT_NEAR(*st.pearson, *oracle::pcc(hp, sf), 1e-9);
    // Spearman without ties is the Pearson of the ranks.
    auto ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            r[i] = 1.0 + static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x < v[i]; }));
        }
        return r;
    };
    EXPECT_NEAR(*st.spearman, *oracle::pcc(ranks(hp), ranks(sf)), 1e-9);
    EXPECT_EQ(st.records, 50u);
}

TEST(DatasetStats, CountsPairsAndNonExtreme) {
    const std::vector<ScoredSample> in{sample_at(1, 6, 0.1, 0.9), sample_at(1, 7, 0.9, 0.9), sample_at(1, 8, 0.5, 0.9),
                                       sample_at(2, 6, 0.95, 0.05)};
    const auto st = dataset_stats(in);
    EXPECT_EQ(st.non_extreme, 1u);
    EXPECT_EQ(st.pair_counts[1], 1u);
    EXPECT_EQ(st.pair_counts[2], 1u);
    EXPECT_EQ(st.pair_counts[3], 1u);
    std::size_t hist = 0;
    for (const auto& row : st.histogram) {
        for (std::size_t c : row) hist += c;
    }
    EXPECT_EQ(hist, 4u);
}

TEST(TrainExamples, PersistRoundTripAndSuffix) {
    const Universe u = build_universe(4, 2, 1);
    Rng rng(1);
    const auto samples = oracle::random_samples(rng);
    const auto ex = moec(samples, 3);
    const auto dir = std::filesystem::temp_directory_path() / ("ctrlgen_distill_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    EXPECT_THROW(persist_train_examples(ex, u.vocab, dir / "moec.jsonl"), Error);
    persist_train_examples(ex, u.vocab, dir / "moec.train.jsonl");
    EXPECT_EQ(load_train_examples(dir / "moec.train.jsonl", u.vocab), ex);
    std::filesystem::remove_all(dir);
}
