#pragma once

// Training-free control: prompting with rendered control tokens, and
// reranking k prompted samples by distance to the requested scores.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ctrlgen/core.hpp"
#include "ctrlgen/reward.hpp"
#include "ctrlgen/toylm.hpp"

namespace ctrlgen {

inline TokenSeq prompt_generate(const ModelParams& params, TokenSpan x, const ControlPair& pair, PromptFormat fmt,
                                const SamplerConfig& cfg) {
    if (!pair.quantized) throw DomainError("prompting needs a quantized control pair");
    return sample(params, x, encode_control(params.vocab, pair, fmt), cfg);
}

inline double target_distance(const ScorePair& s, const ControlPair& target) {
    return std::hypot(s.hp - target.helpfulness, s.sf - target.safety);
}

// Seed of the i-th rerank candidate; candidate 0 reuses the caller's seed so
// k = 1 reduces to plain prompting.
inline std::uint64_t candidate_seed(std::uint64_t base, int i) {
    return i == 0 ? base : derive_seed(base, {stream_tag("rerank"), static_cast<std::uint64_t>(i)});
}

struct RerankAudit {
    std::vector<ScorePair> scores;  // per candidate, in sample order
    std::size_t chosen = 0;
};

// Draws k candidates via `draw(i)`, scores each once via `score(y)`, returns
// the one nearest `target` (lowest index on ties).
template <class Draw, class Score>
TokenSeq rerank_with(Draw&& draw, Score&& score, const ControlPair& target, int k, RerankAudit* audit = nullptr) {
    if (k < 1) throw DomainError("rerank needs k >= 1");
    TokenSeq best;
    double best_d = 0.0;
    RerankAudit local;
    for (int i = 0; i < k; ++i) {
        TokenSeq y = draw(i);
        const ScorePair s = score(y);
        const double d = target_distance(s, target);
        local.scores.push_back(s);
        if (i == 0 || d < best_d) {
            best_d = d;
            best = std::move(y);
            local.chosen = static_cast<std::size_t>(i);
        }
    }
    if (audit != nullptr) *audit = std::move(local);
    return best;
}

inline TokenSeq rerank(const ModelParams& params, const PromptSpec& x, const ControlPair& pair, int k,
                       PromptFormat fmt, const SamplerConfig& cfg, const RewardPanel& panel,
                       RerankAudit* audit = nullptr) {
    return rerank_with([&](int i) { return prompt_generate(params, x.tokens, pair, fmt, cfg.with_seed(candidate_seed(cfg.seed, i))); },
                       [&](const TokenSeq& y) { return panel.score_pair(x, y, ScorerFamily::optimization); }, pair, k,
                       audit);
}

}  // namespace ctrlgen
