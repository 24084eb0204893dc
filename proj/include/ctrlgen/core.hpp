#pragma once

// Domain types shared by every module: attributes, control pairs and their
// token rendering, the vocabulary, prompts and dataset records.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctrlgen/errors.hpp"

namespace ctrlgen {

// ---------------------------------------------------------------------------
// Attributes

enum class Attribute : std::uint8_t { helpfulness, safety };

inline constexpr std::array<Attribute, 2> kAttributes{Attribute::helpfulness, Attribute::safety};

inline constexpr std::string_view to_string(Attribute a) noexcept {
    return a == Attribute::helpfulness ? "helpfulness" : "safety";
}

inline constexpr Attribute other(Attribute a) noexcept {
    return a == Attribute::helpfulness ? Attribute::safety : Attribute::helpfulness;
}

// ---------------------------------------------------------------------------
// Control pairs

inline constexpr double kLowLevel = 0.2;
inline constexpr double kHighLevel = 1.0;

inline constexpr bool is_quantized_level(double s) noexcept {
    return s == kLowLevel || s == kHighLevel;
}

struct ControlPair {
    double helpfulness = kHighLevel;
    double safety = kHighLevel;
    bool quantized = true;

    // Validating constructor for raw pairs in [0,1]^2. The pair is flagged
    // quantized when both levels sit on the {0.2, 1.0} grid.
    static ControlPair make(double hp, double sf) {
        if (!(hp >= 0.0 && hp <= 1.0) || !(sf >= 0.0 && sf <= 1.0)) {
            throw DomainError("control scores must lie in [0,1], got (" + std::to_string(hp) +
                              ", " + std::to_string(sf) + ")");
        }
        return ControlPair{hp, sf, is_quantized_level(hp) && is_quantized_level(sf)};
    }

    static ControlPair raw(double hp, double sf) {
        ControlPair p = make(hp, sf);
        p.quantized = false;
        return p;
    }

    double level(Attribute a) const noexcept { return a == Attribute::helpfulness ? helpfulness : safety; }

    bool valid() const noexcept {
        const bool in_range = helpfulness >= 0.0 && helpfulness <= 1.0 && safety >= 0.0 && safety <= 1.0;
        return in_range && (!quantized || (is_quantized_level(helpfulness) && is_quantized_level(safety)));
    }

    friend bool operator==(const ControlPair&, const ControlPair&) = default;
};

// The 2x2 quantized grid in canonical order; `grid_index` is its inverse.
inline constexpr std::array<ControlPair, 4> kControlGrid{
    ControlPair{kLowLevel, kLowLevel, true},
    ControlPair{kLowLevel, kHighLevel, true},
    ControlPair{kHighLevel, kLowLevel, true},
    ControlPair{kHighLevel, kHighLevel, true},
};

inline int grid_index(const ControlPair& p) {
    if (!is_quantized_level(p.helpfulness) || !is_quantized_level(p.safety)) {
        throw DomainError("control pair is not on the quantized grid");
    }
    return (p.helpfulness == kHighLevel ? 2 : 0) + (p.safety == kHighLevel ? 1 : 0);
}

inline std::string format_level(double s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f", s);
    return buf;
}

inline std::string to_string(const ControlPair& p) {
    return "(" + format_level(p.helpfulness) + "," + format_level(p.safety) + ")";
}

// ---------------------------------------------------------------------------
// Prompt formats and control-token rendering

enum class PromptFormat : std::uint8_t { numeric_harmless, numeric_safety, text_harmless, text_safe };

inline constexpr std::array<PromptFormat, 4> kPromptFormats{
    PromptFormat::numeric_harmless, PromptFormat::numeric_safety, PromptFormat::text_harmless,
    PromptFormat::text_safe};

inline constexpr std::string_view to_string(PromptFormat f) noexcept {
    switch (f) {
        case PromptFormat::numeric_harmless: return "numeric_harmless";
        case PromptFormat::numeric_safety: return "numeric_safety";
        case PromptFormat::text_harmless: return "text_harmless";
        case PromptFormat::text_safe: return "text_safe";
    }
    return "?";
}

inline std::optional<PromptFormat> parse_prompt_format(std::string_view s) noexcept {
    for (PromptFormat f : kPromptFormats) {
        if (to_string(f) == s) return f;
    }
    return std::nullopt;
}

inline constexpr bool is_numeric(PromptFormat f) noexcept {
    return f == PromptFormat::numeric_harmless || f == PromptFormat::numeric_safety;
}

// Name of the safety word used by a format ("harmless" or "safety"/"safe").
inline constexpr std::string_view safety_word(PromptFormat f) noexcept {
    switch (f) {
        case PromptFormat::numeric_harmless: return "harmless";
        case PromptFormat::numeric_safety: return "safety";
        case PromptFormat::text_harmless: return "harmless";
        case PromptFormat::text_safe: return "safe";
    }
    return "?";
}

inline constexpr double kTextPolarityThreshold = 0.5;

inline std::vector<std::string> render_control_tokens(const ControlPair& pair, PromptFormat fmt) {
    if (!pair.valid()) throw DomainError("cannot render invalid control pair " + to_string(pair));
    std::vector<std::string> out;
    if (is_numeric(fmt)) {
        out.push_back("[helpful=" + format_level(pair.helpfulness) + "]");
        out.push_back("[" + std::string(safety_word(fmt)) + "=" + format_level(pair.safety) + "]");
        return out;
    }
    out = {"The", "response", "should", "be"};
    if (pair.helpfulness < kTextPolarityThreshold) out.emplace_back("not");
    out.emplace_back("helpful");
    out.emplace_back("and");
    if (pair.safety < kTextPolarityThreshold) out.emplace_back("not");
    out.emplace_back(safety_word(fmt));
    return out;
}

namespace detail {

// Parses "[<key>=<d>.<d>]" and returns the level; throws on any mismatch.
inline double parse_bracket(std::string_view tok, std::string_view key) {
    const std::string prefix = "[" + std::string(key) + "=";
    if (tok.size() != prefix.size() + 4 || tok.substr(0, prefix.size()) != prefix || tok.back() != ']') {
        throw MalformedControlError("expected " + prefix + "d.d], got '" + std::string(tok) + "'");
    }
    const std::string_view num = tok.substr(prefix.size(), 3);
    if (!(num[0] >= '0' && num[0] <= '9') || num[1] != '.' || !(num[2] >= '0' && num[2] <= '9')) {
        throw MalformedControlError("bad control value in '" + std::string(tok) + "'");
    }
    const double v = (num[0] - '0') + (num[2] - '0') / 10.0;
    if (v > 1.0) throw MalformedControlError("control value out of range in '" + std::string(tok) + "'");
    return v;
}

}  // namespace detail

inline ControlPair parse_control_tokens(std::span<const std::string> tokens, PromptFormat fmt) {
    if (is_numeric(fmt)) {
        if (tokens.size() != 2) {
            throw MalformedControlError("numeric control expects 2 tokens, got " + std::to_string(tokens.size()));
        }
        const double hp = detail::parse_bracket(tokens[0], "helpful");
        const double sf = detail::parse_bracket(tokens[1], safety_word(fmt));
        return ControlPair::make(hp, sf);
    }
    std::size_t i = 0;
    auto expect = [&](std::string_view word) {
        if (i >= tokens.size() || tokens[i] != word) {
            throw MalformedControlError("text control: expected '" + std::string(word) + "' at position " +
                                        std::to_string(i));
        }
        ++i;
    };
    auto negated = [&] {
        if (i < tokens.size() && tokens[i] == "not") {
            ++i;
            return true;
        }
        return false;
    };
    for (std::string_view w : {"The", "response", "should", "be"}) expect(w);
    const bool hp_neg = negated();
    expect("helpful");
    expect("and");
    const bool sf_neg = negated();
    expect(safety_word(fmt));
    if (i != tokens.size()) throw MalformedControlError("text control: trailing tokens");
    return ControlPair{hp_neg ? kLowLevel : kHighLevel, sf_neg ? kLowLevel : kHighLevel, true};
}

// Maps an extreme score onto the quantized grid; nullopt means "not extreme".
// Both band boundaries are inclusive.
inline std::optional<double> quantize_extreme(double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("score out of [0,1]: " + std::to_string(s));
    if (s <= 0.2) return kLowLevel;
    if (s >= 0.8) return kHighLevel;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Tokens and vocabulary

struct TokenId {
    std::uint32_t value = 0;
    friend auto operator<=>(const TokenId&, const TokenId&) = default;
};

using TokenSeq = std::vector<TokenId>;
using TokenSpan = std::span<const TokenId>;

enum class TokenKind : std::uint8_t { special, refusal, info, hazard, control, prompt_word };

class Vocabulary {
public:
    Vocabulary() = default;

    TokenId add(std::string name, TokenKind kind) {
        if (index_.contains(name)) throw VocabularyError("duplicate token '" + name + "'");
        const TokenId id{static_cast<std::uint32_t>(names_.size())};
        index_.emplace(name, id.value);
        names_.push_back(std::move(name));
        kinds_.push_back(kind);
        return id;
    }

    std::size_t size() const noexcept { return names_.size(); }

    const std::string& name(TokenId id) const {
        check(id);
        return names_[id.value];
    }

    TokenKind kind(TokenId id) const {
        check(id);
        return kinds_[id.value];
    }

    std::optional<TokenId> find(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return TokenId{it->second};
    }

    TokenId id(std::string_view name) const {
        auto t = find(name);
        if (!t) throw VocabularyError("out-of-vocabulary token '" + std::string(name) + "'");
        return *t;
    }

    bool contains(TokenId id) const noexcept { return id.value < names_.size(); }

    TokenSeq ids(std::span<const std::string> names) const {
        TokenSeq out;
        out.reserve(names.size());
        for (const auto& n : names) out.push_back(id(n));
        return out;
    }

    TokenSeq tokens_of_kind(TokenKind k) const {
        TokenSeq out;
        for (std::uint32_t i = 0; i < kinds_.size(); ++i) {
            if (kinds_[i] == k) out.push_back(TokenId{i});
        }
        return out;
    }

    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<TokenKind>& kinds() const noexcept { return kinds_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.names_ == b.names_ && a.kinds_ == b.kinds_;
    }

private:
    void check(TokenId id) const {
        if (id.value >= names_.size()) {
            throw VocabularyError("token id " + std::to_string(id.value) + " outside vocabulary of size " +
                                  std::to_string(names_.size()));
        }
    }

    std::vector<std::string> names_;
    std::vector<TokenKind> kinds_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

inline std::string_view to_string(TokenKind k) noexcept {
    switch (k) {
        case TokenKind::special: return "special";
        case TokenKind::refusal: return "refusal";
        case TokenKind::info: return "info";
        case TokenKind::hazard: return "hazard";
        case TokenKind::control: return "control";
        case TokenKind::prompt_word: return "prompt_word";
    }
    return "?";
}

inline std::optional<TokenKind> parse_token_kind(std::string_view s) noexcept {
    for (TokenKind k : {TokenKind::special, TokenKind::refusal, TokenKind::info, TokenKind::hazard,
                        TokenKind::control, TokenKind::prompt_word}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

// Whitespace-separated token names, the serialization used by every file.
inline std::string join_tokens(const Vocabulary& vocab, TokenSpan seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out.push_back(' ');
        out += vocab.name(seq[i]);
    }
    return out;
}

inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) out.push_back(std::move(w));
    return out;
}

inline TokenSeq parse_tokens(const Vocabulary& vocab, std::string_view text) {
    const auto words = split_words(text);
    return vocab.ids(words);
}

// Control tokens for `pair` in `fmt`, as vocabulary ids.
inline TokenSeq encode_control(const Vocabulary& vocab, const ControlPair& pair, PromptFormat fmt) {
    return vocab.ids(render_control_tokens(pair, fmt));
}

// ---------------------------------------------------------------------------
// Prompts and records

struct PromptId {
    std::uint32_t value = 0;
    friend auto operator<=>(const PromptId&, const PromptId&) = default;
};

enum class PromptFamily : std::uint8_t { benign, mixed, tradeoff };

inline constexpr std::string_view to_string(PromptFamily f) noexcept {
    switch (f) {
        case PromptFamily::benign: return "benign";
        case PromptFamily::mixed: return "mixed";
        case PromptFamily::tradeoff: return "tradeoff";
    }
    return "?";
}

enum class Split : std::uint8_t { train, validation, test };

inline constexpr std::string_view to_string(Split s) noexcept {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

struct PromptSpec {
    PromptId id;
    TokenSeq tokens;
    TokenSeq requested_info;  // sorted, unique
    TokenSeq hazard_flags;    // sorted, unique, subset of requested_info
    PromptFamily family = PromptFamily::benign;
    Split split = Split::train;

    // Returns the name of the first violated invariant, or empty when valid.
    std::string violated_invariant() const {
        if (tokens.empty()) return "tokens";
        if (requested_info.empty()) return "requested_info";
        if (!std::is_sorted(requested_info.begin(), requested_info.end()) ||
            std::adjacent_find(requested_info.begin(), requested_info.end()) != requested_info.end()) {
            return "requested_info";
        }
        if (!std::is_sorted(hazard_flags.begin(), hazard_flags.end()) ||
            !std::includes(requested_info.begin(), requested_info.end(), hazard_flags.begin(), hazard_flags.end())) {
            return "hazard_flags";
        }
        return {};
    }
};

struct ScoredSample {
    PromptId prompt_id;
    TokenSeq x;
    TokenSeq y;
    double s_hp = 0.0;
    double s_sf = 0.0;

    friend bool operator==(const ScoredSample&, const ScoredSample&) = default;
};

struct TrainExample {
    PromptId prompt_id;
    TokenSeq x;
    TokenSeq y;
    ControlPair control;

    friend bool operator==(const TrainExample&, const TrainExample&) = default;
};

// Scores carried in files have 6 fractional digits; in-memory values are
// snapped to the same grid so persisted datasets round-trip exactly.
inline double snap_score(double s) { return std::round(s * 1e6) / 1e6; }

}  // namespace ctrlgen

template <>
struct std::hash<ctrlgen::TokenId> {
    std::size_t operator()(const ctrlgen::TokenId& t) const noexcept { return std::hash<std::uint32_t>{}(t.value); }
};

template <>
struct std::hash<ctrlgen::PromptId> {
    std::size_t operator()(const ctrlgen::PromptId& t) const noexcept { return std::hash<std::uint32_t>{}(t.value); }
};
