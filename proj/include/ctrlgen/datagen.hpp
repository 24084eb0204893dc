#pragma once

// Self-generation of the preliminary dataset: N sampled responses per prompt,
// each scored by the optimization scorers.

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctrlgen/core.hpp"
#include "ctrlgen/records.hpp"
#include "ctrlgen/reward.hpp"
#include "ctrlgen/toylm.hpp"

namespace ctrlgen {

// Seed of the sample_index-th response to a prompt.
inline std::uint64_t sample_seed(std::uint64_t base, PromptId prompt, std::uint32_t sample_index) {
    return derive_seed(base, {stream_tag("self-generate"), prompt.value, sample_index});
}

// Generation conditions on no control tokens. Records come out ordered by
// (prompt_id, sample index) whatever order the prompts are given in.
inline std::vector<ScoredSample> self_generate(const ModelParams& params, const RewardPanel& panel,
                                               const std::vector<PromptSpec>& prompts, int samples_per_prompt,
                                               const SamplerConfig& cfg) {
    if (samples_per_prompt < 1) throw DomainError("samples per prompt must be >= 1");
    if (prompts.empty()) throw DomainError("self_generate needs at least one prompt");
    std::vector<const PromptSpec*> ordered;
    for (const auto& p : prompts) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });

    std::vector<ScoredSample> out;
    out.reserve(prompts.size() * static_cast<std::size_t>(samples_per_prompt));
    for (const PromptSpec* p : ordered) {
        for (int i = 0; i < samples_per_prompt; ++i) {
            TokenSeq y;
            try {
                y = sample(params, p->tokens, {}, cfg.with_seed(sample_seed(cfg.seed, p->id, static_cast<std::uint32_t>(i))));
            } catch (const Error& e) {
                throw Error(e.kind(), "prompt " + std::to_string(p->id.value) + ": " + e.what());
            }
            const ScorePair s = panel.score_pair(*p, y, ScorerFamily::optimization);
            out.push_back(ScoredSample{p->id, p->tokens, std::move(y), snap_score(s.hp), snap_score(s.sf)});
        }
    }
    return out;
}

inline std::string scored_sample_line(const Vocabulary& vocab, const ScoredSample& s) {
    return RecordWriter{}
        .field("prompt_id", static_cast<long long>(s.prompt_id.value))
        .field("x", join_tokens(vocab, s.x))
        .field("y", join_tokens(vocab, s.y))
        .number("s_hp", s.s_hp)
        .number("s_sf", s.s_sf)
        .str();
}

inline void persist_dataset(const std::vector<ScoredSample>& samples, const Vocabulary& vocab,
                            const std::filesystem::path& path, const Metadata& meta = {}) {
    std::vector<std::string> lines;
    lines.reserve(samples.size());
    for (const auto& s : samples) lines.push_back(scored_sample_line(vocab, s));
    write_lines(path, lines, meta);
}

namespace detail {

inline TokenSeq tokens_field(const Vocabulary& vocab, const Json& j, const char* key, std::size_t line) {
    const auto text = require_field<std::string>(j, key, line);
    try {
        return parse_tokens(vocab, text);
    } catch (const VocabularyError& e) {
        throw InvariantViolationError(line, key, e.what());
    }
}

inline double score_field(const Json& j, const char* key, const char* field_name, std::size_t line) {
    const auto v = require_field<double>(j, key, line);
    if (!(v >= 0.0 && v <= 1.0)) {
        throw InvariantViolationError(line, field_name, "score " + std::to_string(v) + " outside [0,1]");
    }
    return v;
}

}  // namespace detail

inline std::vector<ScoredSample> load_dataset(const std::filesystem::path& path, const Vocabulary& vocab,
                                              std::optional<int> max_response_len = std::nullopt) {
    std::vector<ScoredSample> out;
    for_each_record(path, [&](const Json& j, std::size_t line) {
        ScoredSample s;
        const auto id = require_field<long long>(j, "prompt_id", line);
        if (id < 0) throw InvariantViolationError(line, "prompt_id", "negative id");
        s.prompt_id = PromptId{static_cast<std::uint32_t>(id)};
        s.x = detail::tokens_field(vocab, j, "x", line);
        s.y = detail::tokens_field(vocab, j, "y", line);
        if (s.x.empty()) throw InvariantViolationError(line, "x", "empty prompt");
        if (max_response_len && static_cast<int>(s.y.size()) > *max_response_len) {
            throw InvariantViolationError(line, "y", "response longer than the configured maximum");
        }
        s.s_hp = detail::score_field(j, "s_hp", "s_tilde_hp", line);
        s.s_sf = detail::score_field(j, "s_sf", "s_tilde_sf", line);
        out.push_back(std::move(s));
    });
    return out;
}

}  // namespace ctrlgen
