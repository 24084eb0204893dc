#include <gtest/gtest.h>

#include <set>

#include "ctrlgen/ctrlgen.hpp"

using namespace ctrlgen;

namespace {

std::string joined(const std::vector<std::string>& toks) {
    std::string s;
    for (const auto& t : toks) s += (s.empty() || t.front() == '[' ? "" : " ") + t;
    return s;
}

}  // namespace

TEST(ControlTokens, NumericRenderingMatchesBracketFormat) {
    const auto toks = render_control_tokens(ControlPair::make(1.0, 0.2), PromptFormat::numeric_harmless);
    ASSERT_EQ(toks.size(), 2u);
    EXPECT_EQ(toks[0] + toks[1], "[helpful=1.0][harmless=0.2]");
    const auto safety = render_control_tokens(ControlPair::make(0.2, 1.0), PromptFormat::numeric_safety);
    EXPECT_EQ(safety[0] + safety[1], "[helpful=0.2][safety=1.0]");
}

TEST(ControlTokens, TextRenderingUsesNegatedPhrasing) {
    const auto toks = render_control_tokens(ControlPair::make(0.2, 0.2), PromptFormat::text_harmless);
    EXPECT_EQ(joined(toks), "The response should be not helpful and not harmless");
    const auto pos = render_control_tokens(ControlPair::make(1.0, 1.0), PromptFormat::text_safe);
    EXPECT_EQ(joined(pos), "The response should be helpful and safe");
}

TEST(ControlTokens, TextPolarityThresholdIsHalf) {
    const auto hi = render_control_tokens(ControlPair::raw(0.5, 0.49), PromptFormat::text_harmless);
    EXPECT_EQ(joined(hi), "The response should be helpful and not harmless");
}

TEST(ControlTokens, ParseNumeric) {
    const std::vector<std::string> toks{"[helpful=0.2]", "[harmless=1.0]"};
    const ControlPair p = parse_control_tokens(toks, PromptFormat::numeric_harmless);
    EXPECT_EQ(p.helpfulness, 0.2);
    EXPECT_EQ(p.safety, 1.0);
    EXPECT_TRUE(p.quantized);
}

TEST(ControlTokens, MalformedInputThrows) {
    const std::vector<std::string> bad{"[helpful=xy]"};
    EXPECT_THROW(parse_control_tokens(bad, PromptFormat::numeric_harmless), MalformedControlError);
    const std::vector<std::string> wrong_key{"[helpful=0.2]", "[safety=1.0]"};
    EXPECT_THROW(parse_control_tokens(wrong_key, PromptFormat::numeric_harmless), MalformedControlError);
    const std::vector<std::string> truncated{"The", "response", "should", "be"};
    EXPECT_THROW(parse_control_tokens(truncated, PromptFormat::text_safe), MalformedControlError);
}

TEST(ControlTokens, RoundTripAndInjectiveForEveryFormat) {
    for (PromptFormat f : kPromptFormats) {
        std::set<std::vector<std::string>> seen;
        for (const ControlPair& p : kControlGrid) {
            const auto toks = render_control_tokens(p, f);
            EXPECT_TRUE(seen.insert(toks).second) << to_string(f);
            EXPECT_EQ(parse_control_tokens(toks, f), p) << to_string(f) << ' ' << to_string(p);
        }
    }
}

TEST(ControlTokens, RenderingIsDeterministic) {
    for (PromptFormat f : kPromptFormats) {
        EXPECT_EQ(render_control_tokens(kControlGrid[2], f), render_control_tokens(kControlGrid[2], f));
    }
}

TEST(Quantize, Examples) {
    EXPECT_EQ(quantize_extreme(0.15), 0.2);
    EXPECT_EQ(quantize_extreme(0.85), 1.0);
    EXPECT_FALSE(quantize_extreme(0.5).has_value());
    EXPECT_EQ(quantize_extreme(0.2), 0.2);
    EXPECT_EQ(quantize_extreme(0.8), 1.0);
    EXPECT_EQ(quantize_extreme(0.0), 0.2);
    EXPECT_EQ(quantize_extreme(1.0), 1.0);
    EXPECT_THROW(quantize_extreme(1.5), DomainError);
}

TEST(Quantize, IdempotentOnOutputs) {
    for (double s = 0.0; s <= 1.0; s += 0.01) {
        if (const auto q = quantize_extreme(s)) EXPECT_EQ(quantize_extreme(*q), q);
    }
}

TEST(ControlPair, ValidatesRangeAndQuantizedFlag) {
    EXPECT_THROW(ControlPair::make(1.2, 0.2), DomainError);
    EXPECT_THROW(ControlPair::make(0.2, -0.1), DomainError);
    EXPECT_TRUE(ControlPair::make(0.2, 1.0).quantized);
    EXPECT_FALSE(ControlPair::make(0.3, 1.0).quantized);
    ControlPair broken{0.5, 1.0, true};
    EXPECT_FALSE(broken.valid());
}

TEST(ControlPair, GridIndexInvertsGrid) {
    for (int i = 0; i < 4; ++i) EXPECT_EQ(grid_index(kControlGrid[static_cast<std::size_t>(i)]), i);
    EXPECT_THROW(grid_index(ControlPair::raw(0.5, 0.5)), DomainError);
}

TEST(Vocabulary, RejectsDuplicatesAndUnknownNames) {
    Vocabulary v;
    v.add("a", TokenKind::info);
    EXPECT_THROW(v.add("a", TokenKind::info), VocabularyError);
    EXPECT_THROW(v.id("b"), VocabularyError);
    EXPECT_THROW(parse_tokens(v, "a b"), VocabularyError);
    EXPECT_EQ(parse_tokens(v, "a a").size(), 2u);
}

TEST(PromptSpec, ReportsFirstViolatedInvariant) {
    PromptSpec p;
    EXPECT_EQ(p.violated_invariant(), "tokens");
    p.tokens = {TokenId{1}};
    EXPECT_EQ(p.violated_invariant(), "requested_info");
    p.requested_info = {TokenId{3}, TokenId{5}};
    p.hazard_flags = {TokenId{4}};
    EXPECT_EQ(p.violated_invariant(), "hazard_flags");
    p.hazard_flags = {TokenId{5}};
    EXPECT_EQ(p.violated_invariant(), "");
}
