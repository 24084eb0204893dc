#pragma once

// Synthetic reward oracles for helpfulness and safety.
//
// Helpfulness rewards covering the requested info tokens; safety penalizes
// distinct hazard tokens in the response. The held-out family re-weights the
// same evidence per token, so it agrees with the optimization family in rank
// without being identical to it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ctrlgen/core.hpp"
#include "ctrlgen/random.hpp"

namespace ctrlgen {

enum class ScorerFamily : std::uint8_t { optimization, heldout };

inline constexpr std::array<ScorerFamily, 2> kScorerFamilies{ScorerFamily::optimization, ScorerFamily::heldout};

inline constexpr std::string_view to_string(ScorerFamily f) noexcept {
    return f == ScorerFamily::optimization ? "optimization" : "heldout";
}

inline constexpr double kDefaultGain = 4.0;

struct ScorerSpec {
    Attribute attribute = Attribute::helpfulness;
    ScorerFamily family = ScorerFamily::optimization;
    double gain = kDefaultGain;
    std::uint64_t perturb_seed = 0;  // held-out family only
};

inline double squash(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

namespace detail {

// Per-token weight of the held-out family before renormalization, in [0.5, 1.5].
inline double heldout_raw_weight(std::uint64_t seed, TokenId t) {
    const std::uint64_t h = derive_seed(seed, {t.value});
    return 0.5 + static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Token weights for a scorer: all ones for the optimization family; for the
// held-out family, seeded weights over info and hazard tokens renormalized
// to mean one.
inline std::vector<double> scorer_token_weights(const ScorerSpec& spec, const Vocabulary& vocab) {
    std::vector<double> w(vocab.size(), 1.0);
    if (spec.family == ScorerFamily::optimization) return w;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::uint32_t i = 0; i < vocab.size(); ++i) {
        const TokenKind k = vocab.kinds()[i];
        if (k == TokenKind::info || k == TokenKind::hazard) {
            w[i] = detail::heldout_raw_weight(spec.perturb_seed, TokenId{i});
            sum += w[i];
            ++n;
        }
    }
    if (n > 0) {
        const double mean = sum / static_cast<double>(n);
        for (std::uint32_t i = 0; i < vocab.size(); ++i) {
            const TokenKind k = vocab.kinds()[i];
            if (k == TokenKind::info || k == TokenKind::hazard) w[i] /= mean;
        }
    }
    return w;
}

// Coverage of requested info and hazard rate of a response under the given
// token weights (unit weights reproduce the plain counting definitions).
struct ResponseEvidence {
    double coverage = 0.0;
    double hazard_rate = 0.0;
};

inline ResponseEvidence response_evidence(const Vocabulary& vocab, const PromptSpec& x, TokenSpan y,
                                          const std::vector<double>& weights) {
    std::unordered_set<TokenId> emitted(y.begin(), y.end());
    ResponseEvidence ev;

    double requested = 0.0;
    double covered = 0.0;
    for (TokenId t : x.requested_info) {
        requested += weights[t.value];
        if (emitted.contains(t)) covered += weights[t.value];
    }
    ev.coverage = requested > 0.0 ? covered / requested : 0.0;

    double flagged = 0.0;
    for (TokenId t : x.hazard_flags) flagged += weights[t.value];
    double hazards = 0.0;
    for (TokenId t : emitted) {
        if (vocab.contains(t) && vocab.kind(t) == TokenKind::hazard) hazards += weights[t.value];
    }
    const double denom = x.hazard_flags.empty() ? 1.0 : flagged;
    ev.hazard_rate = std::clamp(hazards / denom, 0.0, 1.0);
    return ev;
}

inline double logit_from_evidence(Attribute a, double gain, const ResponseEvidence& ev) {
    return a == Attribute::helpfulness ? gain * (2.0 * ev.coverage - 1.0) : gain * (1.0 - 2.0 * ev.hazard_rate);
}

inline double raw_score(const ScorerSpec& spec, const Vocabulary& vocab, const PromptSpec& x, TokenSpan y) {
    const auto weights = scorer_token_weights(spec, vocab);
    return logit_from_evidence(spec.attribute, spec.gain, response_evidence(vocab, x, y, weights));
}

struct ScorePair {
    double hp = 0.0;
    double sf = 0.0;

    double get(Attribute a) const noexcept { return a == Attribute::helpfulness ? hp : sf; }
};

// Both scorer families for both attributes, with token weights precomputed.
class RewardPanel {
public:
    RewardPanel(const Vocabulary& vocab, double gain = kDefaultGain, std::uint64_t heldout_seed = 0x5EED)
        : vocab_(&vocab), gain_(gain) {
        if (!(gain > 0.0)) throw DomainError("scorer gain must be > 0");
        const ScorerSpec opt{Attribute::helpfulness, ScorerFamily::optimization, gain, 0};
        const ScorerSpec held{Attribute::helpfulness, ScorerFamily::heldout, gain, heldout_seed};
        weights_[0] = scorer_token_weights(opt, vocab);
        weights_[1] = scorer_token_weights(held, vocab);
        heldout_seed_ = heldout_seed;
    }

    ScorePair score_pair(const PromptSpec& x, TokenSpan y, ScorerFamily family) const {
        const auto ev = response_evidence(*vocab_, x, y, weights_[family == ScorerFamily::optimization ? 0 : 1]);
        return {squash(logit_from_evidence(Attribute::helpfulness, gain_, ev)),
                squash(logit_from_evidence(Attribute::safety, gain_, ev))};
    }

    ScorerSpec spec(Attribute a, ScorerFamily f) const {
        return {a, f, gain_, f == ScorerFamily::heldout ? heldout_seed_ : 0};
    }

    double gain() const noexcept { return gain_; }
    const Vocabulary& vocabulary() const noexcept { return *vocab_; }

private:
    const Vocabulary* vocab_;
    double gain_;
    std::uint64_t heldout_seed_ = 0;
    std::array<std::vector<double>, 2> weights_;
};

inline ScorePair score_pair(const RewardPanel& panel, const PromptSpec& x, TokenSpan y, ScorerFamily family) {
    return panel.score_pair(x, y, family);
}

}  // namespace ctrlgen
