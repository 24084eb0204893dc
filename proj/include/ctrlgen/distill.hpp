#pragma once

// Turning scored self-generations into control-conditioned training data.
//
//  * moec: keep samples extreme on both attributes, quantize them, keep only
//    prompts that show at least two distinct quantized pairs, then pick one
//    response per (prompt, pair).
//  * vanilla: quantize everything to the nearer of {0.2, 1.0}, no filtering.
//  * oversample: duplicate minority control pairs until all are equal.

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctrlgen/core.hpp"
#include "ctrlgen/datagen.hpp"
#include "ctrlgen/random.hpp"
#include "ctrlgen/records.hpp"
#include "ctrlgen/stats.hpp"

namespace ctrlgen {

enum class DistillStrategy : std::uint8_t { moec, vanilla, oversample };

inline constexpr std::string_view to_string(DistillStrategy s) noexcept {
    switch (s) {
        case DistillStrategy::moec: return "moec";
        case DistillStrategy::vanilla: return "vanilla";
        case DistillStrategy::oversample: return "oversample";
    }
    return "?";
}

inline std::optional<DistillStrategy> parse_distill_strategy(std::string_view s) noexcept {
    for (auto v : {DistillStrategy::moec, DistillStrategy::vanilla, DistillStrategy::oversample}) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

inline constexpr double kVanillaThreshold = 0.6;

inline double quantize_nearest(double s) { return s >= kVanillaThreshold ? kHighLevel : kLowLevel; }

namespace detail {

struct PromptGroup {
    TokenSeq x;
    // Candidate responses per grid cell, in input order.
    std::array<std::vector<const TokenSeq*>, 4> by_pair;
};

inline std::map<PromptId, PromptGroup> group_quantized(const std::vector<ScoredSample>& samples, bool extreme_only) {
    std::map<PromptId, PromptGroup> groups;
    for (const auto& s : samples) {
        auto& g = groups[s.prompt_id];
        if (g.x.empty()) g.x = s.x;
        double hp = 0.0, sf = 0.0;
        if (extreme_only) {
            const auto qh = quantize_extreme(s.s_hp);
            const auto qs = quantize_extreme(s.s_sf);
            if (!qh || !qs) continue;
            hp = *qh;
            sf = *qs;
        } else {
            hp = quantize_nearest(s.s_hp);
            sf = quantize_nearest(s.s_sf);
        }
        g.by_pair[static_cast<std::size_t>(grid_index(ControlPair{hp, sf, true}))].push_back(&s.y);
    }
    return groups;
}

inline std::vector<TrainExample> pick_one_per_pair(const std::map<PromptId, PromptGroup>& groups,
                                                   std::uint64_t seed, std::size_t min_distinct_pairs) {
    std::vector<TrainExample> out;
    for (const auto& [id, g] : groups) {
        const auto distinct = std::count_if(g.by_pair.begin(), g.by_pair.end(), [](const auto& c) { return !c.empty(); });
        if (static_cast<std::size_t>(distinct) < min_distinct_pairs) continue;
        for (std::size_t cell = 0; cell < 4; ++cell) {
            const auto& cands = g.by_pair[cell];
            if (cands.empty()) continue;
            Rng rng(derive_seed(seed, {stream_tag("pick-response"), id.value, cell}));
            const TokenSeq* y = cands[rng.below(cands.size())];
            out.push_back(TrainExample{id, g.x, *y, kControlGrid[cell]});
        }
    }
    return out;
}

}  // namespace detail

inline std::vector<TrainExample> moec(const std::vector<ScoredSample>& samples, std::uint64_t seed) {
    return detail::pick_one_per_pair(detail::group_quantized(samples, true), seed, 2);
}

inline std::vector<TrainExample> vanilla(const std::vector<ScoredSample>& samples, std::uint64_t seed) {
    return detail::pick_one_per_pair(detail::group_quantized(samples, false), seed, 1);
}

inline std::array<std::size_t, 4> control_counts(const std::vector<TrainExample>& examples) {
    std::array<std::size_t, 4> counts{};
    for (const auto& e : examples) ++counts[static_cast<std::size_t>(grid_index(e.control))];
    return counts;
}

struct OversampleResult {
    std::vector<TrainExample> examples;
    std::vector<ControlPair> empty_pairs;  // classes that could not be filled
};

// Output is the input followed by the added duplicates, grouped by pair.
inline OversampleResult oversample(const std::vector<TrainExample>& examples, std::uint64_t seed) {
    if (examples.empty()) throw DomainError("oversample needs a non-empty dataset");
    OversampleResult r{examples, {}};
    std::array<std::vector<std::size_t>, 4> members;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        members[static_cast<std::size_t>(grid_index(examples[i].control))].push_back(i);
    }
    std::size_t target = 0;
    for (const auto& m : members) target = std::max(target, m.size());
    Rng rng(derive_seed(seed, {stream_tag("oversample")}));
    for (std::size_t cell = 0; cell < 4; ++cell) {
        const auto& m = members[cell];
        if (m.empty()) {
            r.empty_pairs.push_back(kControlGrid[cell]);
            continue;
        }
        for (std::size_t k = m.size(); k < target; ++k) r.examples.push_back(examples[m[rng.below(m.size())]]);
    }
    return r;
}

struct DatasetStats {
    std::size_t records = 0;
    std::array<std::size_t, 4> pair_counts{};  // quantized pairs, grid order
    std::size_t non_extreme = 0;                // scored samples outside both-extreme bands
    std::array<std::array<std::size_t, 10>, 10> histogram{};  // [hp bin][sf bin]
    std::optional<double> pearson;
    std::optional<double> spearman;
    std::vector<ControlPair> empty_pairs;
};

namespace detail {

inline std::size_t decile(double s) { return std::min<std::size_t>(9, static_cast<std::size_t>(s * 10.0)); }

inline void finish_stats(DatasetStats& st, const std::vector<double>& hp, const std::vector<double>& sf) {
    st.records = hp.size();
    for (std::size_t i = 0; i < hp.size(); ++i) ++st.histogram[decile(hp[i])][decile(sf[i])];
    st.pearson = ctrlgen::pearson(hp, sf);
    st.spearman = ctrlgen::spearman(hp, sf);
    for (std::size_t c = 0; c < 4; ++c) {
        if (st.pair_counts[c] == 0) st.empty_pairs.push_back(kControlGrid[c]);
    }
}

}  // namespace detail

inline DatasetStats dataset_stats(const std::vector<ScoredSample>& samples) {
    if (samples.empty()) throw DomainError("dataset_stats needs a non-empty input");
    DatasetStats st;
    std::vector<double> hp, sf;
    for (const auto& s : samples) {
        hp.push_back(s.s_hp);
        sf.push_back(s.s_sf);
        const auto qh = quantize_extreme(s.s_hp);
        const auto qs = quantize_extreme(s.s_sf);
        if (qh && qs) {
            ++st.pair_counts[static_cast<std::size_t>(grid_index(ControlPair{*qh, *qs, true}))];
        } else {
            ++st.non_extreme;
        }
    }
    detail::finish_stats(st, hp, sf);
    return st;
}

inline DatasetStats dataset_stats(const std::vector<TrainExample>& examples) {
    if (examples.empty()) throw DomainError("dataset_stats needs a non-empty input");
    DatasetStats st;
    st.pair_counts = control_counts(examples);
    std::vector<double> hp, sf;
    for (const auto& e : examples) {
        hp.push_back(e.control.helpfulness);
        sf.push_back(e.control.safety);
    }
    detail::finish_stats(st, hp, sf);
    return st;
}

inline Json stats_to_json(const DatasetStats& st) {
    Json j;
    j["records"] = st.records;
    Json pairs = Json::object();
    for (std::size_t c = 0; c < 4; ++c) pairs[to_string(kControlGrid[c])] = st.pair_counts[c];
    j["pair_counts"] = pairs;
    j["non_extreme"] = st.non_extreme;
    j["histogram_hp_by_sf"] = st.histogram;
    j["pearson"] = st.pearson ? Json(*st.pearson) : Json(nullptr);
    j["spearman"] = st.spearman ? Json(*st.spearman) : Json(nullptr);
    Json empty = Json::array();
    for (const auto& p : st.empty_pairs) empty.push_back(to_string(p));
    j["empty_pairs"] = empty;
    return j;
}

// ---------------------------------------------------------------------------
// Training-example files ("*.train.jsonl", never mixed with scored datasets)

inline constexpr std::string_view kTrainSuffix = ".train.jsonl";

inline bool has_train_suffix(const std::filesystem::path& p) {
    const std::string s = p.filename().string();
    return s.size() >= kTrainSuffix.size() && s.ends_with(kTrainSuffix);
}

inline void persist_train_examples(const std::vector<TrainExample>& examples, const Vocabulary& vocab,
                                   const std::filesystem::path& path, const Metadata& meta = {}) {
    if (!has_train_suffix(path)) throw Error("io", "training-example files must end in .train.jsonl: " + path.string());
    std::vector<std::string> lines;
    for (const auto& e : examples) {
        lines.push_back(RecordWriter{}
                            .field("prompt_id", static_cast<long long>(e.prompt_id.value))
                            .field("x", join_tokens(vocab, e.x))
                            .field("y", join_tokens(vocab, e.y))
                            .number("s_hp", e.control.helpfulness)
                            .number("s_sf", e.control.safety)
                            .str());
    }
    write_lines(path, lines, meta);
}

inline std::vector<TrainExample> load_train_examples(const std::filesystem::path& path, const Vocabulary& vocab) {
    if (!has_train_suffix(path)) throw Error("io", "not a training-example file (.train.jsonl): " + path.string());
    std::vector<TrainExample> out;
    for_each_record(path, [&](const Json& j, std::size_t line) {
        TrainExample e;
        const auto id = require_field<long long>(j, "prompt_id", line);
        if (id < 0) throw InvariantViolationError(line, "prompt_id", "negative id");
        e.prompt_id = PromptId{static_cast<std::uint32_t>(id)};
        e.x = detail::tokens_field(vocab, j, "x", line);
        e.y = detail::tokens_field(vocab, j, "y", line);
        const double hp = require_field<double>(j, "s_hp", line);
        const double sf = require_field<double>(j, "s_sf", line);
        if (!is_quantized_level(hp)) throw InvariantViolationError(line, "s_hp", "control level not in {0.2, 1.0}");
        if (!is_quantized_level(sf)) throw InvariantViolationError(line, "s_sf", "control level not in {0.2, 1.0}");
        e.control = ControlPair{hp, sf, true};
        out.push_back(std::move(e));
    });
    return out;
}

}  // namespace ctrlgen
