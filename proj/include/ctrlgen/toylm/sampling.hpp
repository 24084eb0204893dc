#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "ctrlgen/toylm/model.hpp"

namespace ctrlgen {

struct SamplerConfig {
    double nucleus_p = 0.95;
    double temperature = 0.5;
    int max_len = 64;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) throw DomainError("nucleus_p must lie in (0,1]");
        if (!(temperature > 0.0)) throw DomainError("temperature must be > 0");
        if (max_len < 1) throw DomainError("max_len must be >= 1");
    }

    SamplerConfig with_seed(std::uint64_t s) const {
        SamplerConfig c = *this;
        c.seed = s;
        return c;
    }
};

// What the sampler saw at one decoding step: the retained nucleus (most
// probable first) and the token it drew.
struct DecodeStep {
    int step = 0;
    std::vector<TokenId> nucleus;
    TokenId chosen;
};

using DecodeObserver = std::function<void(const DecodeStep&)>;

namespace detail {

// Temperature first, then nucleus truncation over the tempered distribution.
inline TokenId draw_from_nucleus(const RowVec& logp, double temperature, double top_p, Rng& rng,
                                 std::vector<TokenId>* nucleus_out) {
    const Eigen::Index V = logp.size();
    std::vector<double> prob(static_cast<std::size_t>(V));
    const double mx = logp.maxCoeff();
    double z = 0.0;
    for (Eigen::Index i = 0; i < V; ++i) {
        prob[static_cast<std::size_t>(i)] = std::exp((logp(i) - mx) / temperature);
        z += prob[static_cast<std::size_t>(i)];
    }
    for (double& q : prob) q /= z;

    std::vector<std::uint32_t> order(static_cast<std::size_t>(V));
    std::iota(order.begin(), order.end(), 0U);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return prob[a] > prob[b]; });

    std::size_t keep = 0;
    double mass = 0.0;
    while (keep < order.size()) {
        mass += prob[order[keep]];
        ++keep;
        if (mass >= top_p) break;
    }
    if (nucleus_out != nullptr) {
        nucleus_out->clear();
        for (std::size_t i = 0; i < keep; ++i) nucleus_out->push_back(TokenId{order[i]});
    }
    const double u = rng.uniform() * mass;
    double acc = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        acc += prob[order[i]];
        if (u < acc) return TokenId{order[i]};
    }
    return TokenId{order[keep - 1]};
}

}  // namespace detail

// Autoregressive sampling of a response to `x` under `control`. The returned
// sequence includes the terminating <eos> when one was drawn.
inline TokenSeq sample(const ModelParams& p, TokenSpan x, TokenSpan control, const SamplerConfig& cfg,
                       const DecodeObserver* observer = nullptr) {
    cfg.validate();
    check_tokens(p, x);
    check_tokens(p, control);
    const std::size_t needed = control.size() + x.size() + static_cast<std::size_t>(cfg.max_len);
    if (needed > static_cast<std::size_t>(p.shape.context_window)) {
        throw ContextOverflowError("prompt of " + std::to_string(control.size() + x.size()) + " tokens plus max_len " +
                                   std::to_string(cfg.max_len) + " exceeds context window " +
                                   std::to_string(p.shape.context_window));
    }
    Rng rng(cfg.seed);
    IncrementalDecoder dec(p);
    const TokenId eos = p.eos();
    dec.push(p.bos());
    for (TokenId t : control) dec.push(t);
    const RowVec* logp = nullptr;
    for (TokenId t : x) logp = &dec.push(t);
    if (logp == nullptr) throw DomainError("sample needs a non-empty conditioning sequence");

    TokenSeq y;
    std::vector<TokenId> nucleus;
    for (int step = 0; step < cfg.max_len; ++step) {
        const TokenId next = detail::draw_from_nucleus(*logp, cfg.temperature, cfg.nucleus_p, rng,
                                                       observer != nullptr ? &nucleus : nullptr);
        if (observer != nullptr) (*observer)(DecodeStep{step, nucleus, next});
        y.push_back(next);
        if (next == eos || step + 1 == cfg.max_len) break;
        logp = &dec.push(next);
    }
    return y;
}

// Argmax decoding (lowest id wins ties).
inline TokenSeq greedy_decode(const ModelParams& p, TokenSpan x, TokenSpan control, int max_len) {
    IncrementalDecoder dec(p);
    dec.push(p.bos());
    for (TokenId t : control) dec.push(t);
    const RowVec* logp = nullptr;
    for (TokenId t : x) logp = &dec.push(t);
    TokenSeq y;
    for (int step = 0; step < max_len; ++step) {
        Eigen::Index best = 0;
        logp->maxCoeff(&best);
        const TokenId next{static_cast<std::uint32_t>(best)};
        y.push_back(next);
        if (next == p.eos() || step + 1 == max_len) break;
        logp = &dec.push(next);
    }
    return y;
}

}  // namespace ctrlgen
