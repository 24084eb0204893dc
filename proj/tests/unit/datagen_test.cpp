#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unistd.h>

#include "ctrlgen/ctrlgen.hpp"

using namespace ctrlgen;

namespace {

struct DatagenFixture : ::testing::Test {
    Universe u = build_universe(4, 2, 1);
    std::vector<PromptSpec> prompts = make_prompts(u, 10, 0.3, 4);
    ModelParams p = [&] {
        ModelShape s;
        s.context_window = 24;
        s.d_model = 8;
        s.d_hidden = 8;
        s.n_blocks = 1;
        return init_model(u.vocab, s, 2);
    }();
    RewardPanel panel{u.vocab};
    SamplerConfig cfg = [] {
        SamplerConfig c;
        c.max_len = 8;
        c.temperature = 1.5;
        c.seed = 77;
        return c;
    }();
    std::filesystem::path dir = std::filesystem::temp_directory_path() / ("ctrlgen_datagen_" + std::to_string(::getpid()));

    void SetUp() override { std::filesystem::create_directories(dir); }
    void TearDown() override { std::filesystem::remove_all(dir); }

    std::string slurp(const std::filesystem::path& f) {
        std::ifstream in(f, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), {}};
    }
};

}  // namespace

TEST_F(DatagenFixture, ExactlyNPerPromptWithScoresInRange) {
    const auto out = self_generate(p, panel, prompts, 4, cfg);
    EXPECT_EQ(out.size(), 40u);
    std::map<std::uint32_t, int> per;
    for (const auto& s : out) {
        ++per[s.prompt_id.value];
        EXPECT_GT(s.s_hp, 0.0);
        EXPECT_LT(s.s_hp, 1.0);
        EXPECT_GT(s.s_sf, 0.0);
        EXPECT_LT(s.s_sf, 1.0);
        EXPECT_LE(static_cast<int>(s.y.size()), cfg.max_len);
    }
    EXPECT_EQ(per.size(), 10u);
    for (const auto& [id, n] : per) EXPECT_EQ(n, 4);
}

TEST_F(DatagenFixture, OrderIndependentAndByteIdentical) {
    auto shuffled = prompts;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto a = self_generate(p, panel, prompts, 3, cfg);
    const auto b = self_generate(p, panel, shuffled, 3, cfg);
    EXPECT_EQ(a, b);
    persist_dataset(a, u.vocab, dir / "a.jsonl");
    persist_dataset(b, u.vocab, dir / "b.jsonl");
    EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
}

TEST_F(DatagenFixture, SamplesUseDistinctSeeds) {
    const auto out = self_generate(p, panel, {prompts[0]}, 8, cfg);
    std::set<TokenSeq> distinct;
    for (const auto& s : out) distinct.insert(s.y);
    EXPECT_GT(distinct.size(), 1u);
}

TEST_F(DatagenFixture, RejectsBadArguments) {
    EXPECT_THROW(self_generate(p, panel, prompts, 0, cfg), DomainError);
    EXPECT_THROW(self_generate(p, panel, {}, 2, cfg), DomainError);
}

TEST_F(DatagenFixture, PersistLoadRoundTrip) {
    const auto out = self_generate(p, panel, prompts, 2, cfg);
    persist_dataset(out, u.vocab, dir / "d.jsonl", {{"config_hash", "x"}});
    EXPECT_EQ(load_dataset(dir / "d.jsonl", u.vocab), out);
    persist_dataset({}, u.vocab, dir / "empty.jsonl");
    EXPECT_TRUE(load_dataset(dir / "empty.jsonl", u.vocab).empty());
}

TEST_F(DatagenFixture, LoaderNamesViolatedField) {
    std::ofstream(dir / "bad.jsonl") << R"({"prompt_id":1,"x":"<ask> I1 <go>","y":"I1 <eos>","s_hp":1.3,"s_sf":0.5})"
                                     << '\n';
    try {
        load_dataset(dir / "bad.jsonl", u.vocab);
        FAIL() << "expected an invariant violation";
    } catch (const InvariantViolationError& e) {
        EXPECT_EQ(e.field(), "s_tilde_hp");
        EXPECT_EQ(e.line(), 1u);
    }
    std::ofstream(dir / "garbled.jsonl") << R"({"prompt_id":1,"x":"<ask> I1 <go>","y":"I1 <eos>","s_hp":0.3,"s_sf":0.5})"
                                         << "\n{not json\n";
    try {
        load_dataset(dir / "garbled.jsonl", u.vocab);
        FAIL() << "expected a malformed record";
    } catch (const MalformedRecordError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}
