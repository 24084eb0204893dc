#pragma once

// Synthetic task universe: vocabulary, prompt families and the safety-biased
// corpus the base model is pretrained on.
//
// A prompt is `<ask> r1 .. rk <go>` where the r_i are the requested info
// tokens. Benign prompts request info tokens only, trade-off prompts request
// hazard tokens only (so helpfulness demands unsafe output), mixed prompts
// request both.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ctrlgen/core.hpp"
#include "ctrlgen/random.hpp"

namespace ctrlgen {

namespace tokens {
inline constexpr const char* bos = "<bos>";
inline constexpr const char* eos = "<eos>";
inline constexpr const char* ask = "<ask>";
inline constexpr const char* go = "<go>";
inline constexpr const char* sorry = "<sorry>";
inline constexpr const char* cannot = "<cannot>";
}  // namespace tokens

// Number of vocabulary items that do not depend on the universe size:
// 4 specials, 2 refusal tokens, 6 control brackets and 9 prompt words.
inline constexpr std::size_t kStructuralTokenCount = 21;

struct Universe {
    Vocabulary vocab;
    int n_info = 0;
    int n_hazard = 0;
    std::uint64_t seed = 0;

    TokenSeq info_tokens() const { return vocab.tokens_of_kind(TokenKind::info); }
    TokenSeq hazard_tokens() const { return vocab.tokens_of_kind(TokenKind::hazard); }
};

inline Vocabulary make_vocabulary(int n_info, int n_hazard) {
    Vocabulary v;
    v.add(tokens::bos, TokenKind::special);
    v.add(tokens::eos, TokenKind::special);
    v.add(tokens::ask, TokenKind::special);
    v.add(tokens::go, TokenKind::special);
    v.add(tokens::sorry, TokenKind::refusal);
    v.add(tokens::cannot, TokenKind::refusal);
    for (int i = 1; i <= n_info; ++i) v.add("I" + std::to_string(i), TokenKind::info);
    for (int i = 1; i <= n_hazard; ++i) v.add("H" + std::to_string(i), TokenKind::hazard);
    for (const char* key : {"helpful", "harmless", "safety"}) {
        for (double level : {kLowLevel, kHighLevel}) {
            v.add("[" + std::string(key) + "=" + format_level(level) + "]", TokenKind::control);
        }
    }
    for (const char* w : {"The", "response", "should", "be", "not", "helpful", "and", "harmless", "safe"}) {
        v.add(w, TokenKind::prompt_word);
    }
    return v;
}

inline Universe build_universe(int n_info, int n_hazard, std::uint64_t seed) {
    if (n_info < 4) throw DomainError("n_info must be >= 4");
    if (n_hazard < 2) throw DomainError("n_hazard must be >= 2");
    return Universe{make_vocabulary(n_info, n_hazard), n_info, n_hazard, seed};
}

struct PromptOptions {
    double mixed_fraction = 0.0;
    double train_fraction = 0.6;
    double validation_fraction = 0.1;
    int min_items = 1;
    int max_items = 3;
};

namespace detail {

inline TokenSeq draw_distinct(Rng& rng, TokenSeq pool, std::size_t n) {
    rng.shuffle(pool);
    pool.resize(std::min(n, pool.size()));
    return pool;
}

inline std::size_t fraction_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace detail

inline std::vector<PromptSpec> make_prompts(const Universe& u, std::size_t n_prompts, double tradeoff_fraction,
                                            std::uint64_t seed, const PromptOptions& opt = {}) {
    if (!(tradeoff_fraction >= 0.0 && tradeoff_fraction <= 1.0)) {
        throw DomainError("tradeoff_fraction must lie in [0,1]");
    }
    if (!(opt.mixed_fraction >= 0.0 && opt.mixed_fraction <= 1.0)) throw DomainError("mixed_fraction must lie in [0,1]");
    if (opt.min_items < 1 || opt.max_items < opt.min_items) throw DomainError("bad prompt item range");
    if (opt.train_fraction < 0.0 || opt.validation_fraction < 0.0 ||
        opt.train_fraction + opt.validation_fraction > 1.0) {
        throw DomainError("bad split fractions");
    }

    Rng rng(derive_seed(seed, {stream_tag("prompts")}));
    const std::size_t n_trade = detail::fraction_count(tradeoff_fraction, n_prompts);
    const std::size_t n_mixed =
        std::min(detail::fraction_count(opt.mixed_fraction, n_prompts), n_prompts - n_trade);

    std::vector<PromptFamily> families;
    families.insert(families.end(), n_trade, PromptFamily::tradeoff);
    families.insert(families.end(), n_mixed, PromptFamily::mixed);
    families.insert(families.end(), n_prompts - n_trade - n_mixed, PromptFamily::benign);
    rng.shuffle(families);

    const TokenSeq info = u.info_tokens();
    const TokenSeq hazard = u.hazard_tokens();
    const TokenId ask = u.vocab.id(tokens::ask);
    const TokenId go = u.vocab.id(tokens::go);

    std::vector<PromptSpec> prompts;
    prompts.reserve(n_prompts);
    for (std::size_t i = 0; i < n_prompts; ++i) {
        PromptSpec p;
        p.id = PromptId{static_cast<std::uint32_t>(i)};
        p.family = families[i];
        const auto span = static_cast<std::uint64_t>(opt.max_items - opt.min_items + 1);
        std::size_t k = static_cast<std::size_t>(opt.min_items) + rng.below(span);
        TokenSeq requested;
        switch (p.family) {
            case PromptFamily::benign: requested = detail::draw_distinct(rng, info, k); break;
            case PromptFamily::tradeoff: requested = detail::draw_distinct(rng, hazard, k); break;
            case PromptFamily::mixed: {
                k = std::max<std::size_t>(k, 2);
                const std::size_t n_h = 1 + rng.below(k - 1);
                requested = detail::draw_distinct(rng, hazard, n_h);
                const TokenSeq safe = detail::draw_distinct(rng, info, k - n_h);
                requested.insert(requested.end(), safe.begin(), safe.end());
                break;
            }
        }
        p.tokens.push_back(ask);
        TokenSeq order = requested;
        rng.shuffle(order);
        p.tokens.insert(p.tokens.end(), order.begin(), order.end());
        p.tokens.push_back(go);

        std::sort(requested.begin(), requested.end());
        p.requested_info = requested;
        for (TokenId t : requested) {
            if (u.vocab.kind(t) == TokenKind::hazard) p.hazard_flags.push_back(t);
        }
        prompts.push_back(std::move(p));
    }

    // Splits are stratified by family so each split sees the same mix.
    for (PromptFamily fam : {PromptFamily::benign, PromptFamily::mixed, PromptFamily::tradeoff}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            if (prompts[i].family == fam) members.push_back(i);
        }
        rng.shuffle(members);
        const std::size_t n_train = detail::fraction_count(opt.train_fraction, members.size());
        const std::size_t n_val =
            std::min(detail::fraction_count(opt.validation_fraction, members.size()), members.size() - n_train);
        for (std::size_t j = 0; j < members.size(); ++j) {
            prompts[members[j]].split = j < n_train ? Split::train
                                        : j < n_train + n_val ? Split::validation
                                                              : Split::test;
        }
    }
    return prompts;
}

inline std::vector<PromptSpec> select_split(const std::vector<PromptSpec>& prompts, Split s) {
    std::vector<PromptSpec> out;
    for (const auto& p : prompts) {
        if (p.split == s) out.push_back(p);
    }
    return out;
}

struct CorpusPair {
    PromptId prompt_id;
    TokenSeq x;
    TokenSeq y;

    friend bool operator==(const CorpusPair&, const CorpusPair&) = default;
};

// Shape of the aligned behavior the corpus demonstrates.
struct CorpusOptions {
    int responses_per_prompt = 4;
    // Probability that a response ends with one unrequested "tangent" token.
    // Benign tangents may be hazard tokens; trade-off tangents never are.
    double tangent_probability = 0.25;
};

// Safety-biased demonstrations: benign prompts are answered in full, prompts
// containing hazards get a refusal, and mixed prompts get the safe subset of
// the request after the refusal token.
inline std::vector<CorpusPair> make_aligned_corpus(const Universe& u, const std::vector<PromptSpec>& prompts,
                                                   std::uint64_t seed, const CorpusOptions& opt = {}) {
    Rng rng(derive_seed(seed, {stream_tag("aligned-corpus")}));
    const Vocabulary& v = u.vocab;
    const TokenId eos = v.id(tokens::eos);
    const TokenId sorry = v.id(tokens::sorry);
    const TokenId cannot = v.id(tokens::cannot);
    const TokenSeq info = u.info_tokens();
    TokenSeq any_content = info;
    const TokenSeq hazard = u.hazard_tokens();
    any_content.insert(any_content.end(), hazard.begin(), hazard.end());

    auto tangent = [&](const PromptSpec& p, const TokenSeq& pool, TokenSeq& y) {
        if (!rng.bernoulli(opt.tangent_probability)) return;
        TokenSeq candidates;
        for (TokenId t : pool) {
            if (!std::binary_search(p.requested_info.begin(), p.requested_info.end(), t)) candidates.push_back(t);
        }
        if (!candidates.empty()) y.push_back(candidates[rng.below(candidates.size())]);
    };

    std::vector<CorpusPair> corpus;
    for (const auto& p : prompts) {
        for (int r = 0; r < opt.responses_per_prompt; ++r) {
            TokenSeq y;
            switch (p.family) {
                case PromptFamily::benign: {
                    TokenSeq items = p.requested_info;
                    rng.shuffle(items);
                    y = items;
                    tangent(p, any_content, y);
                    break;
                }
                case PromptFamily::mixed: {
                    y.push_back(sorry);
                    TokenSeq items;
                    for (TokenId t : p.requested_info) {
                        if (!std::binary_search(p.hazard_flags.begin(), p.hazard_flags.end(), t)) items.push_back(t);
                    }
                    rng.shuffle(items);
                    y.insert(y.end(), items.begin(), items.end());
                    break;
                }
                case PromptFamily::tradeoff: {
                    y = {sorry, cannot};
                    tangent(p, info, y);
                    break;
                }
            }
            y.push_back(eos);
            corpus.push_back(CorpusPair{p.id, p.tokens, std::move(y)});
        }
    }
    return corpus;
}

}  // namespace ctrlgen
