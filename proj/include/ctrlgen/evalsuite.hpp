#pragma once

// Controllability metrics over (requested control, measured score) records:
// micro/macro Pearson, mean absolute error, and the binary test, plus the
// posterior grid and report assembly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ctrlgen/core.hpp"
#include "ctrlgen/records.hpp"
#include "ctrlgen/reward.hpp"
#include "ctrlgen/stats.hpp"

namespace ctrlgen {

struct EvalRecord {
    PromptId prompt_id;
    ControlPair control;
    TokenSeq y;
    double rm_hp = 0.0;
    double rm_sf = 0.0;
    ScorerFamily family = ScorerFamily::optimization;

    double rm(Attribute a) const noexcept { return a == Attribute::helpfulness ? rm_hp : rm_sf; }
};

using RecordSpan = std::span<const EvalRecord>;

// ---------------------------------------------------------------------------
// Metrics

// Pooled correlation of requested vs measured score; nullopt when undefined.
inline std::optional<double> micro_pearson(RecordSpan records, Attribute a) {
    std::vector<double> s, rm;
    for (const auto& r : records) {
        s.push_back(r.control.level(a));
        rm.push_back(r.rm(a));
    }
    return pearson(s, rm);
}

struct MacroPearson {
    std::optional<double> value;  // absent when every prompt is undefined
    std::size_t prompts = 0;
    std::size_t undefined = 0;    // prompts excluded from the mean
};

inline MacroPearson macro_pearson(RecordSpan records, Attribute a) {
    std::map<PromptId, std::pair<std::vector<double>, std::vector<double>>> by_prompt;
    for (const auto& r : records) {
        auto& [s, rm] = by_prompt[r.prompt_id];
        s.push_back(r.control.level(a));
        rm.push_back(r.rm(a));
    }
    MacroPearson m;
    m.prompts = by_prompt.size();
    double sum = 0.0;
    std::size_t defined = 0;
    for (const auto& [id, v] : by_prompt) {
        if (const auto c = pearson(v.first, v.second)) {
            sum += *c;
            ++defined;
        } else {
            ++m.undefined;
        }
    }
    if (defined > 0) m.value = sum / static_cast<double>(defined);
    return m;
}

inline double err(RecordSpan records, Attribute a) {
    if (records.empty()) throw DomainError("err needs at least one record");
    double sum = 0.0;
    for (const auto& r : records) sum += std::abs(r.control.level(a) - r.rm(a));
    return sum / static_cast<double>(records.size());
}

struct BinaryTest {
    std::optional<double> value;  // absent when no pair is eligible
    std::size_t pairs = 0;
};

// Pairs within a prompt whose controls differ only in `control_attr`; scores
// the fraction where the higher-control record measures strictly higher on
// `measured_attr`.
inline BinaryTest binary_test(RecordSpan records, Attribute control_attr, Attribute measured_attr) {
    std::map<PromptId, std::vector<const EvalRecord*>> by_prompt;
    for (const auto& r : records) by_prompt[r.prompt_id].push_back(&r);
    const Attribute held = other(control_attr);
    BinaryTest bt;
    std::size_t wins = 0;
    for (const auto& [id, rs] : by_prompt) {
        for (const EvalRecord* hi : rs) {
            for (const EvalRecord* lo : rs) {
                if (hi->control.level(held) != lo->control.level(held)) continue;
                if (!(hi->control.level(control_attr) > lo->control.level(control_attr))) continue;
                ++bt.pairs;
                if (hi->rm(measured_attr) > lo->rm(measured_attr)) ++wins;
            }
        }
    }
    if (bt.pairs > 0) bt.value = static_cast<double>(wins) / static_cast<double>(bt.pairs);
    return bt;
}

// P(control pair | rm bin): `cells[hp_bin][sf_bin]` holds a distribution over
// the grid pairs, or nothing for an empty bin.
struct PosteriorGrid {
    int bins = 5;
    std::vector<std::vector<std::optional<std::array<double, 4>>>> cells;
};

inline int rm_bin(double v, int bins) { return std::clamp(static_cast<int>(v * bins), 0, bins - 1); }

inline PosteriorGrid posterior_grid(RecordSpan records, int bins = 5) {
    if (bins < 1) throw DomainError("posterior grid needs at least one bin");
    PosteriorGrid g;
    g.bins = bins;
    std::vector<std::vector<std::array<std::size_t, 4>>> counts(bins, std::vector<std::array<std::size_t, 4>>(bins));
    for (const auto& r : records) {
        ++counts[rm_bin(r.rm_hp, bins)][rm_bin(r.rm_sf, bins)][static_cast<std::size_t>(grid_index(r.control))];
    }
    g.cells.assign(bins, std::vector<std::optional<std::array<double, 4>>>(bins));
    for (int i = 0; i < bins; ++i) {
        for (int j = 0; j < bins; ++j) {
            const auto& c = counts[i][j];
            const std::size_t n = c[0] + c[1] + c[2] + c[3];
            if (n == 0) continue;
            std::array<double, 4> p{};
            for (std::size_t k = 0; k < 4; ++k) p[k] = static_cast<double>(c[k]) / static_cast<double>(n);
            g.cells[i][j] = p;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Reports

struct AttributeMetrics {
    std::optional<double> micro;  // mP
    MacroPearson macro;           // MP
    double err = 0.0;
    BinaryTest bt;                // matched
    BinaryTest bt_mismatched;     // the other attribute's controls, this attribute measured
    std::optional<double> bt_diff() const {
        if (!bt.value || !bt_mismatched.value) return std::nullopt;
        return *bt.value - *bt_mismatched.value;
    }
};

struct FamilyMetrics {
    AttributeMetrics helpfulness;
    AttributeMetrics safety;
    PosteriorGrid grid;

    const AttributeMetrics& get(Attribute a) const noexcept {
        return a == Attribute::helpfulness ? helpfulness : safety;
    }
};

struct EvalReport {
    std::string method;
    std::uint64_t seed = 0;
    std::string dataset_hash;
    std::size_t prompts = 0;
    std::size_t failures = 0;
    FamilyMetrics optimization;
    FamilyMetrics heldout;

    const FamilyMetrics& family(ScorerFamily f) const noexcept {
        return f == ScorerFamily::optimization ? optimization : heldout;
    }
};

inline AttributeMetrics attribute_metrics(RecordSpan records, Attribute a) {
    AttributeMetrics m;
    m.micro = micro_pearson(records, a);
    m.macro = macro_pearson(records, a);
    m.err = err(records, a);
    m.bt = binary_test(records, a, a);
    m.bt_mismatched = binary_test(records, other(a), a);
    return m;
}

inline FamilyMetrics family_metrics(RecordSpan records, int grid_bins = 5) {
    FamilyMetrics f;
    f.helpfulness = attribute_metrics(records, Attribute::helpfulness);
    f.safety = attribute_metrics(records, Attribute::safety);
    f.grid = posterior_grid(records, grid_bins);
    return f;
}

// Maps (prompt, control, seed) to a response.
using GenerateFn = std::function<TokenSeq(const PromptSpec&, const ControlPair&, std::uint64_t seed)>;

struct EvalRun {
    std::vector<EvalRecord> optimization;
    std::vector<EvalRecord> heldout;
    EvalReport report;
};

inline std::uint64_t eval_seed(std::uint64_t seed, PromptId id, int cell) {
    return derive_seed(seed, {stream_tag("evaluate"), id.value, static_cast<std::uint64_t>(cell)});
}

// Generates once per (prompt, grid pair) and scores the same response with
// both scorer families. Failed generations are counted and skipped.
inline EvalRun evaluate_method(const GenerateFn& generate, const std::vector<PromptSpec>& prompts,
                               const RewardPanel& panel, std::uint64_t seed, std::string method = {},
                               int grid_bins = 5) {
    std::vector<const PromptSpec*> ordered;
    for (const auto& p : prompts) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });
    EvalRun run;
    run.report.method = std::move(method);
    run.report.seed = seed;
    run.report.prompts = prompts.size();
    for (const PromptSpec* p : ordered) {
        for (int cell = 0; cell < 4; ++cell) {
            const ControlPair& pair = kControlGrid[static_cast<std::size_t>(cell)];
            TokenSeq y;
            try {
                y = generate(*p, pair, eval_seed(seed, p->id, cell));
            } catch (const Error&) {
                ++run.report.failures;
                continue;
            }
            const ScorePair o = panel.score_pair(*p, y, ScorerFamily::optimization);
            const ScorePair h = panel.score_pair(*p, y, ScorerFamily::heldout);
            run.optimization.push_back({p->id, pair, y, o.hp, o.sf, ScorerFamily::optimization});
            run.heldout.push_back({p->id, pair, std::move(y), h.hp, h.sf, ScorerFamily::heldout});
        }
    }
    if (run.optimization.empty()) throw DomainError("evaluation produced no records");
    run.report.optimization = family_metrics(run.optimization, grid_bins);
    run.report.heldout = family_metrics(run.heldout, grid_bins);
    return run;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline void metric_line(std::vector<std::string>& out, ScorerFamily f, Attribute a, const char* metric,
                        const std::optional<double>& v) {
    RecordWriter w;
    w.field("family", std::string(to_string(f))).field("attribute", std::string(to_string(a))).field("metric", metric);
    if (v) {
        w.number("value", *v);
    } else {
        w.null("value");
    }
    out.push_back(w.str());
}

inline std::string fmt_opt(const std::optional<double>& v, int width = 7) {
    char buf[32];
    if (v) {
        std::snprintf(buf, sizeof buf, "%*.3f", width, *v);
    } else {
        std::snprintf(buf, sizeof buf, "%*s", width, "n/a");
    }
    return buf;
}

}  // namespace detail

// One flat record per (family, attribute, metric).
inline std::vector<std::string> report_lines(const EvalReport& r) {
    std::vector<std::string> out;
    out.push_back(RecordWriter{}
                      .field("method", r.method)
                      .field("seed", std::to_string(r.seed))
                      .field("dataset_hash", r.dataset_hash)
                      .field("prompts", static_cast<long long>(r.prompts))
                      .field("failures", static_cast<long long>(r.failures))
                      .str());
    for (ScorerFamily f : kScorerFamilies) {
        for (Attribute a : kAttributes) {
            const AttributeMetrics& m = r.family(f).get(a);
            detail::metric_line(out, f, a, "mP", m.micro);
            detail::metric_line(out, f, a, "MP", m.macro.value);
            detail::metric_line(out, f, a, "MP_undefined", static_cast<double>(m.macro.undefined));
            detail::metric_line(out, f, a, "Err", m.err);
            detail::metric_line(out, f, a, "BT", m.bt.value);
            detail::metric_line(out, f, a, "BT_mismatched", m.bt_mismatched.value);
            detail::metric_line(out, f, a, "BT_diff", m.bt_diff());
        }
    }
    return out;
}

// Flat metric table as written by report_lines, keyed "family/attribute/metric".
struct MetricTable {
    std::string method;
    std::string seed;
    std::map<std::string, std::optional<double>> values;

    std::optional<double> get(ScorerFamily f, Attribute a, const std::string& metric) const {
        const auto it = values.find(std::string(to_string(f)) + "/" + std::string(to_string(a)) + "/" + metric);
        return it == values.end() ? std::nullopt : it->second;
    }
};

inline MetricTable metric_table(const EvalReport& r) {
    MetricTable t{r.method, std::to_string(r.seed), {}};
    for (const auto& line : report_lines(r)) {
        const Json j = Json::parse(line);
        if (!j.contains("metric")) continue;
        const std::string key = j["family"].get<std::string>() + "/" + j["attribute"].get<std::string>() + "/" +
                                j["metric"].get<std::string>();
        t.values[key] = j["value"].is_null() ? std::nullopt : std::optional<double>(j["value"].get<double>());
    }
    return t;
}

inline MetricTable load_metric_table(const std::filesystem::path& path) {
    MetricTable t;
    for_each_record(path, [&](const Json& j, std::size_t line) {
        if (j.contains("method")) {
            t.method = require_field<std::string>(j, "method", line);
            t.seed = require_field<std::string>(j, "seed", line);
            return;
        }
        const std::string key = require_field<std::string>(j, "family", line) + "/" +
                                require_field<std::string>(j, "attribute", line) + "/" +
                                require_field<std::string>(j, "metric", line);
        if (!j.contains("value")) throw MalformedRecordError(line, "missing field 'value'");
        t.values[key] = j["value"].is_null() ? std::nullopt : std::optional<double>(j["value"].get<double>());
    });
    return t;
}

// Plain-text table: one row per method, mP MP Err BT for safety then
// helpfulness.
inline std::string format_table(const std::vector<MetricTable>& rows, ScorerFamily f, const std::string& title) {
    std::ostringstream out;
    char buf[256];
    out << title << '\n';
    std::snprintf(buf, sizeof buf, "%-22s | %-31s | %-31s\n", "", "Safety", "Helpfulness");
    out << buf;
    std::snprintf(buf, sizeof buf, "%-22s | %7s %7s %7s %7s | %7s %7s %7s %7s\n", "Method", "mP", "MP", "Err", "BT",
                  "mP", "MP", "Err", "BT");
    out << buf;
    out << std::string(92, '-') << '\n';
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-22s |", r.method.c_str());
        out << buf;
        for (Attribute a : {Attribute::safety, Attribute::helpfulness}) {
            for (const char* m : {"mP", "MP", "Err", "BT"}) out << ' ' << detail::fmt_opt(r.get(f, a, m));
            if (a == Attribute::safety) out << " |";
        }
        out << '\n';
    }
    return out.str();
}

inline std::string table_csv(const std::vector<MetricTable>& rows, ScorerFamily f) {
    std::ostringstream out;
    out << "method,safety_mP,safety_MP,safety_Err,safety_BT,helpfulness_mP,helpfulness_MP,helpfulness_Err,"
           "helpfulness_BT,helpfulness_BT_diff\n";
    auto cell = [](const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); };
    for (const auto& r : rows) {
        out << r.method;
        for (Attribute a : {Attribute::safety, Attribute::helpfulness}) {
            for (const char* m : {"mP", "MP", "Err", "BT"}) out << ',' << cell(r.get(f, a, m));
        }
        out << ',' << cell(r.get(f, Attribute::helpfulness, "BT_diff")) << '\n';
    }
    return out.str();
}

// Rows are rm_hp bins (low to high), columns rm_sf bins; each cell lists the
// probability of every grid pair, separated by '|'.
inline std::string grid_csv(const PosteriorGrid& g) {
    std::ostringstream out;
    out << "rm_hp_bin\\rm_sf_bin";
    for (int j = 0; j < g.bins; ++j) out << ',' << j;
    out << '\n';
    for (int i = 0; i < g.bins; ++i) {
        out << i;
        for (int j = 0; j < g.bins; ++j) {
            out << ',';
            if (const auto& c = g.cells[i][j]) {
                for (std::size_t k = 0; k < 4; ++k) out << (k ? "|" : "") << fixed6((*c)[k]);
            }
        }
        out << '\n';
    }
    out << "# cell order:";
    for (const auto& p : kControlGrid) out << ' ' << to_string(p);
    out << '\n';
    return out.str();
}

}  // namespace ctrlgen
