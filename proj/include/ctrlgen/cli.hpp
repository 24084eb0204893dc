#pragma once

// Orchestration behind the `ctrlgen` tool: INI config loading, config
// hashing, run directories, and one function per subcommand. Every artifact
// lands in <runs>/<config hash>/ and carries the hash and seed.

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctrlgen/pipeline.hpp"

namespace ctrlgen::cli {

namespace fs = std::filesystem;
using Ptree = boost::property_tree::ptree;

// ---------------------------------------------------------------------------
// Config

namespace detail {

// Typed access to one `section.key`, recording which keys were consumed.
class ConfigReader {
public:
    explicit ConfigReader(const Ptree& tree) : tree_(tree) {}

    template <class T>
    void read(const std::string& key, T& out) {
        used_.insert(key);
        const auto node = tree_.get_child_optional(Ptree::path_type(key, '.'));
        if (!node) return;
        const std::string text = node->data();
        if constexpr (std::is_same_v<T, std::string>) {
            out = text;
        } else {
            std::istringstream in(text);
            T v{};
            in >> v;
            if (in.fail() || !(in >> std::ws).eof()) throw ConfigError(key, "cannot parse '" + text + "'");
            out = v;
        }
    }

    template <class E, class Parse>
    void read_enum(const std::string& key, E& out, Parse parse) {
        std::string text;
        read(key, text);
        if (text.empty()) return;
        const auto v = parse(text);
        if (!v) throw ConfigError(key, "unknown value '" + text + "'");
        out = *v;
    }

    void reject_unknown() const {
        for (const auto& [section, body] : tree_) {
            if (body.empty() && !body.data().empty()) throw ConfigError(section, "key outside a section");
            for (const auto& [k, v] : body) {
                const std::string key = section + "." + k;
                if (!used_.contains(key)) throw ConfigError(key, "unknown key");
            }
        }
    }

private:
    const Ptree& tree_;
    std::set<std::string> used_;
};

// Visits every config field as (key, value) in a fixed order. Used both for
// parsing and for the canonical dump.
template <class Visitor>
void visit_config(PipelineConfig& c, Visitor&& v) {
    v.num("run.seed", c.seed);
    v.num("universe.n_info", c.n_info);
    v.num("universe.n_hazard", c.n_hazard);
    v.num("prompts.count", c.n_prompts);
    v.num("prompts.tradeoff_fraction", c.tradeoff_fraction);
    v.num("prompts.mixed_fraction", c.prompt_options.mixed_fraction);
    v.num("prompts.train_fraction", c.prompt_options.train_fraction);
    v.num("prompts.validation_fraction", c.prompt_options.validation_fraction);
    v.num("prompts.min_items", c.prompt_options.min_items);
    v.num("prompts.max_items", c.prompt_options.max_items);
    v.num("corpus.prompts", c.corpus_prompts);
    v.num("corpus.responses_per_prompt", c.corpus.responses_per_prompt);
    v.num("corpus.tangent_probability", c.corpus.tangent_probability);
    v.num("model.d_model", c.model.d_model);
    v.num("model.d_hidden", c.model.d_hidden);
    v.num("model.n_heads", c.model.n_heads);
    v.num("model.n_blocks", c.model.n_blocks);
    v.num("model.context_window", c.model.context_window);
    v.num("pretrain.epochs", c.pretrain.epochs);
    v.num("pretrain.batch_size", c.pretrain.batch_size);
    v.num("pretrain.lr_multiplier", c.pretrain.lr_multiplier);
    v.num("scorer.gain", c.scorer_gain);
    v.num("scorer.heldout_seed", c.heldout_seed);
    v.num("sampler.temperature", c.sampler.temperature);
    v.num("sampler.top_p", c.sampler.nucleus_p);
    v.num("sampler.max_len", c.sampler.max_len);
    v.num("generate.samples_per_prompt", c.samples_per_prompt);
    v.num("generate.data_multiplier", c.data_multiplier);
    v.num("generate.temperature", c.generate_temperature);
    v.choice("distill.strategy", c.distill, parse_distill_strategy);
    v.choice("finetune.objective", c.objective, parse_objective);
    v.choice("finetune.format", c.format, parse_prompt_format);
    v.num("finetune.epochs", c.finetune.epochs);
    v.num("finetune.batch_size", c.finetune.batch_size);
    v.num("finetune.lr_multiplier", c.finetune.lr_multiplier);
    v.num("finetune.weight_decay", c.finetune.weight_decay);
    v.num("rlhf.updates", c.rlhf.updates);
    v.num("rlhf.lr_multiplier", c.rlhf.lr_multiplier);
    v.num("rlhf.clip_epsilon", c.rlhf.rl.clip_epsilon);
    v.num("rlhf.kl_coeff", c.rlhf.rl.kl_coeff);
    v.num("rlhf.episodes_per_update", c.rlhf.rl.episodes_per_update);
    v.num("rlhf.ppo_epochs", c.rlhf.rl.ppo_epochs);
    v.choice("rlhf.baseline", c.rlhf.rl.baseline, parse_rl_baseline);
    v.choice("evaluate.method", c.method, parse_eval_method);
    v.num("evaluate.rerank_k", c.rerank_k);
    v.num("evaluate.grid_bins", c.grid_bins);
}

struct ParseVisitor {
    ConfigReader& r;
    template <class T>
    void num(const char* key, T& field) { r.read(key, field); }
    template <class E, class P>
    void choice(const char* key, E& field, P parse) { r.read_enum(key, field, parse); }
};

struct DumpVisitor {
    std::string out;
    template <class T>
    void num(const char* key, const T& field) {
        if constexpr (std::is_floating_point_v<T>) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", field);
            out += std::string(key) + "=" + buf + "\n";
        } else {
            out += std::string(key) + "=" + std::to_string(field) + "\n";
        }
    }
    template <class E, class P>
    void choice(const char* key, const E& field, P) { out += std::string(key) + "=" + std::string(to_string(field)) + "\n"; }
};

}  // namespace detail

inline PipelineConfig parse_config(const Ptree& tree) {
    PipelineConfig cfg;
    detail::ConfigReader reader(tree);
    detail::visit_config(cfg, detail::ParseVisitor{reader});
    reader.reject_unknown();
    cfg.validate();
    return cfg;
}

inline PipelineConfig parse_config_text(const std::string& ini) {
    Ptree tree;
    std::istringstream in(ini);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("<file>", "line " + std::to_string(e.line()) + ": " + e.message());
    }
    return parse_config(tree);
}

inline PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("<file>", "cannot read config " + path.string());
    return parse_config_text(std::string(std::istreambuf_iterator<char>(in), {}));
}

// All fields, one `key=value` per line, in a fixed order with round-trip
// precision. Comments and key order in the source file do not matter.
inline std::string canonical_config(PipelineConfig cfg) {
    detail::DumpVisitor v;
    detail::visit_config(cfg, v);
    return v.out;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("crypto", "SHA-256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

inline std::string file_sha256(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot read " + path.string());
    return sha256_hex(std::string(std::istreambuf_iterator<char>(in), {}));
}

inline std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(canonical_config(cfg)).substr(0, 16); }

// ---------------------------------------------------------------------------
// Runs and artifacts

namespace artifact {
inline constexpr const char* prompts = "prompts.jsonl";
inline constexpr const char* corpus = "corpus.jsonl";
inline constexpr const char* base = "base.ckpt";
inline constexpr const char* pretrain_log = "pretrain.log.jsonl";
inline constexpr const char* samples = "samples.jsonl";
inline constexpr const char* report = "report.txt";

inline std::string dataset(DistillStrategy s) { return std::string(to_string(s)) + ".train.jsonl"; }
inline std::string dataset_stats(DistillStrategy s) { return std::string(to_string(s)) + ".stats.json"; }
inline std::string model(const std::string& label) { return "model." + label + ".ckpt"; }
inline std::string train_log(const std::string& label) { return "train." + label + ".log.jsonl"; }
inline std::string eval(const std::string& label) { return "eval." + label + ".jsonl"; }
inline std::string eval_records(const std::string& label) { return "eval." + label + ".records.jsonl"; }
inline std::string grid(const std::string& label, ScorerFamily f) {
    return "grid." + label + "." + std::string(to_string(f)) + ".csv";
}
inline std::string report_csv(const std::string& table) { return "report." + table + ".csv"; }
}  // namespace artifact

// Label of a fine-tuned model: "<strategy>+<objective>", or "rlhf".
inline std::string model_label(DistillStrategy s, Objective o) {
    if (o == Objective::rlhf) return "rlhf";
    return std::string(to_string(s)) + "+" + std::string(to_string(o));
}

inline std::string method_label(EvalMethod m, DistillStrategy s, Objective o) {
    return m == EvalMethod::checkpoint ? model_label(s, o) : std::string(to_string(m));
}

struct Run {
    PipelineConfig cfg;
    std::string hash;
    fs::path dir;

    fs::path path(const std::string& name) const { return dir / name; }

    Metadata meta(const std::string& kind) const {
        return {{"artifact", kind}, {"config_hash", hash}, {"seed", std::to_string(cfg.seed)}};
    }
};

inline Run open_run(const PipelineConfig& cfg, const fs::path& runs_root) {
    Run r{cfg, config_hash(cfg), {}};
    r.dir = runs_root / r.hash;
    return r;
}

inline void ensure_dir(const Run& run) {
    std::error_code ec;
    fs::create_directories(run.dir, ec);
    if (ec) throw Error("io", "cannot create run directory " + run.dir.string() + ": " + ec.message());
}

// Checks an upstream artifact exists and belongs to this run.
inline fs::path require(const Run& run, const std::string& name, const std::string& producer) {
    const fs::path p = run.path(name);
    if (!fs::exists(p)) throw MissingArtifactError(p.string(), producer);
    if (p.extension() != ".ckpt") {
        const Metadata m = read_metadata(p);
        const auto it = m.find("config_hash");
        if (it == m.end() || it->second != run.hash) {
            throw Error("stale_artifact", p.string() + " was not produced under config " + run.hash);
        }
    }
    return p;
}

inline Checkpoint require_checkpoint(const Run& run, const std::string& name, const std::string& producer) {
    Checkpoint ck = load_checkpoint(require(run, name, producer));
    if (ck.metadata["config_hash"] != run.hash) {
        throw Error("stale_artifact", run.path(name).string() + " was not produced under config " + run.hash);
    }
    return ck;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path.string());
    out << text;
    if (!out) throw Error("io", "failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Subcommands

namespace detail {

inline std::string prompt_line(const Vocabulary& v, const PromptSpec& p) {
    return RecordWriter{}
        .field("prompt_id", static_cast<long long>(p.id.value))
        .field("family", std::string(to_string(p.family)))
        .field("split", std::string(to_string(p.split)))
        .field("x", join_tokens(v, p.tokens))
        .field("requested_info", join_tokens(v, p.requested_info))
        .field("hazard_flags", join_tokens(v, p.hazard_flags))
        .str();
}

inline std::vector<std::string> prompt_lines(const TaskData& t) {
    std::vector<std::string> lines;
    for (const auto& p : t.prompts) lines.push_back(prompt_line(t.universe.vocab, p));
    return lines;
}

inline std::vector<std::string> corpus_lines(const TaskData& t) {
    std::vector<std::string> lines;
    for (const auto& c : t.corpus) {
        lines.push_back(RecordWriter{}
                            .field("prompt_id", static_cast<long long>(c.prompt_id.value))
                            .field("x", join_tokens(t.universe.vocab, c.x))
                            .field("y", join_tokens(t.universe.vocab, c.y))
                            .str());
    }
    return lines;
}

inline std::vector<std::string> record_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(in, l)) {
        if (!l.empty() && l[0] != '#') lines.push_back(l);
    }
    return lines;
}

}  // namespace detail

// The task is a pure function of the config; stages rebuild it and check it
// against the persisted synth artifacts.
inline TaskData load_task(const Run& run) {
    const fs::path pp = require(run, artifact::prompts, "synth");
    const fs::path cp = require(run, artifact::corpus, "synth");
    TaskData t = synthesize(run.cfg);
    if (detail::record_lines(pp) != detail::prompt_lines(t) || detail::record_lines(cp) != detail::corpus_lines(t)) {
        throw Error("stale_artifact", "synth artifacts in " + run.dir.string() + " do not match the config");
    }
    return t;
}

using Log = std::function<void(const std::string&)>;

inline void synth(const Run& run, const Log& log) {
    ensure_dir(run);
    const TaskData t = synthesize(run.cfg);
    write_lines(run.path(artifact::prompts), detail::prompt_lines(t), run.meta("prompts"));
    write_lines(run.path(artifact::corpus), detail::corpus_lines(t), run.meta("corpus"));
    log("synth: " + std::to_string(t.prompts.size()) + " prompts, " + std::to_string(t.corpus.size()) +
        " corpus pairs");
}

inline void pretrain(const Run& run, const Log& log) {
    const TaskData t = load_task(run);
    PretrainReport rep;
    const ModelParams base = pretrain_base(run.cfg, t, &rep);
    save_checkpoint(base, run.path(artifact::base), run.meta("checkpoint"));
    std::vector<std::string> lines;
    for (const auto& s : rep.steps) lines.push_back(supervised_log_line(s));
    write_lines(run.path(artifact::pretrain_log), lines, run.meta("pretrain_log"));
    log("pretrain: " + std::to_string(base.parameter_count()) + " parameters, corpus loss " +
        (rep.initial_loss ? fixed6(*rep.initial_loss) : "n/a") + " -> " +
        (rep.final_loss ? fixed6(*rep.final_loss) : "n/a"));
}

inline void generate(const Run& run, const Log& log) {
    const TaskData t = load_task(run);
    const Checkpoint base = require_checkpoint(run, artifact::base, "pretrain");
    const RewardPanel panel = make_panel(run.cfg, t);
    const auto samples = self_generate_train(run.cfg, t, base.params, panel);
    persist_dataset(samples, base.params.vocab, run.path(artifact::samples), run.meta("samples"));
    log("generate: " + std::to_string(samples.size()) + " scored samples");
}

inline void distill(const Run& run, DistillStrategy strategy, const Log& log) {
    const TaskData t = load_task(run);
    const auto samples =
        load_dataset(require(run, artifact::samples, "generate"), t.universe.vocab, run.cfg.sampler.max_len);
    std::vector<ControlPair> empty;
    const auto data = distill_samples(run.cfg, samples, strategy, &empty);
    persist_train_examples(data, t.universe.vocab, run.path(artifact::dataset(strategy)),
                           run.meta(std::string(to_string(strategy)) + "_dataset"));
    Json stats = stats_to_json(dataset_stats(data));
    stats["input"] = stats_to_json(dataset_stats(samples));
    stats["config_hash"] = run.hash;
    stats["seed"] = std::to_string(run.cfg.seed);
    stats["strategy"] = std::string(to_string(strategy));
    write_text(run.path(artifact::dataset_stats(strategy)), stats.dump(2) + "\n");
    log("distill(" + std::string(to_string(strategy)) + "): " + std::to_string(data.size()) + " examples from " +
        std::to_string(samples.size()) + " samples");
}

inline void train(const Run& run, DistillStrategy strategy, Objective objective, const Log& log) {
    const TaskData t = load_task(run);
    const Checkpoint base = require_checkpoint(run, artifact::base, "pretrain");
    const RewardPanel panel = make_panel(run.cfg, t);
    std::vector<TrainExample> data;
    if (objective != Objective::rlhf) {
        data = load_train_examples(require(run, artifact::dataset(strategy), "distill"), t.universe.vocab);
    }
    const FinetuneResult r = finetune_model(run.cfg, t, base.params, data, objective, panel);
    const std::string label = model_label(strategy, objective);
    save_checkpoint(r.params, run.path(artifact::model(label)), run.meta("checkpoint"));
    std::vector<std::string> lines;
    for (const auto& s : r.steps) lines.push_back(supervised_log_line(s));
    for (const auto& s : r.rl_steps) lines.push_back(rl_log_line(s));
    write_lines(run.path(artifact::train_log(label)), lines, run.meta("train_log"));
    log("train(" + label + "): " + std::to_string(lines.size()) + " updates");
}

inline EvalRun evaluate(const Run& run, EvalMethod method, DistillStrategy strategy, Objective objective,
                        const Log& log) {
    const TaskData t = load_task(run);
    const std::string label = method_label(method, strategy, objective);
    const Checkpoint ck = method == EvalMethod::checkpoint
                              ? require_checkpoint(run, artifact::model(label), "train")
                              : require_checkpoint(run, artifact::base, "pretrain");
    const RewardPanel panel = make_panel(run.cfg, t);
    EvalRun r = evaluate_model(run.cfg, t, ck.params, method, panel, label);
    r.report.dataset_hash = file_sha256(run.path(artifact::prompts)).substr(0, 16);
    write_lines(run.path(artifact::eval(label)), report_lines(r.report), run.meta("eval_report"));
    std::vector<std::string> recs;
    for (const auto* set : {&r.optimization, &r.heldout}) {
        for (const auto& e : *set) {
            recs.push_back(RecordWriter{}
                               .field("family", std::string(to_string(e.family)))
                               .field("prompt_id", static_cast<long long>(e.prompt_id.value))
                               .number("s_hp", e.control.helpfulness)
                               .number("s_sf", e.control.safety)
                               .field("y", join_tokens(t.universe.vocab, e.y))
                               .number("rm_hp", e.rm_hp)
                               .number("rm_sf", e.rm_sf)
                               .str());
        }
    }
    write_lines(run.path(artifact::eval_records(label)), recs, run.meta("eval_records"));
    for (ScorerFamily f : kScorerFamilies) {
        write_text(run.path(artifact::grid(label, f)),
                   "# config_hash=" + run.hash + " seed=" + std::to_string(run.cfg.seed) + "\n" +
                       grid_csv(r.report.family(f).grid));
    }
    log("evaluate(" + label + "): " + std::to_string(r.report.prompts) + " prompts, " +
        std::to_string(r.report.failures) + " failures");
    return r;
}

// Row sets of the report tables, in display order.
inline const std::vector<std::string>& main_rows() {
    static const std::vector<std::string> rows{"prompting", "rerank", "moec+clm", "moec+exmate", "rlhf"};
    return rows;
}

inline std::vector<std::string> ablation_rows() {
    std::vector<std::string> rows;
    for (auto s : {DistillStrategy::vanilla, DistillStrategy::oversample, DistillStrategy::moec}) {
        for (auto o : {Objective::plm, Objective::clm, Objective::exmate}) rows.push_back(model_label(s, o));
    }
    return rows;
}

// Merges the evaluation reports present in the run directory (plus any
// `data_size_runs`, which feed the data-size table) into text tables and CSV.
// Returns the text report.
inline std::string report(const Run& run, const std::vector<Run>& data_size_runs, const Log& log) {
    auto collect = [](const Run& r, const std::vector<std::string>& labels, const std::string& prefix = {}) {
        std::vector<MetricTable> rows;
        for (const auto& l : labels) {
            const fs::path p = r.path(artifact::eval(l));
            if (!fs::exists(p)) continue;
            MetricTable t = load_metric_table(require(r, artifact::eval(l), "evaluate"));
            t.method = prefix + l;
            rows.push_back(std::move(t));
        }
        return rows;
    };
    const auto main = collect(run, main_rows());
    const auto ablation = collect(run, ablation_rows());
    std::vector<MetricTable> sizes;
    std::vector<Run> size_runs{run};
    size_runs.insert(size_runs.end(), data_size_runs.begin(), data_size_runs.end());
    std::stable_sort(size_runs.begin(), size_runs.end(),
                     [](const Run& a, const Run& b) { return a.cfg.data_multiplier < b.cfg.data_multiplier; });
    for (auto o : {Objective::clm, Objective::exmate}) {
        for (const Run& r : size_runs) {
            auto rows = collect(r, {model_label(DistillStrategy::moec, o)}, std::to_string(r.cfg.data_multiplier) + "x ");
            sizes.insert(sizes.end(), rows.begin(), rows.end());
        }
    }
    if (main.empty() && ablation.empty()) throw MissingArtifactError(run.path(artifact::eval("*")).string(), "evaluate");

    std::string text = "# config_hash=" + run.hash + " seed=" + std::to_string(run.cfg.seed) + "\n\n";
    if (!main.empty()) {
        text += format_table(main, ScorerFamily::optimization, "Optimization scorers") + "\n";
        text += format_table(main, ScorerFamily::heldout, "Held-out scorers") + "\n";
    }
    if (!ablation.empty()) text += format_table(ablation, ScorerFamily::optimization, "Data synthesis x objective") + "\n";
    std::set<int> multipliers;
    for (const Run& r : size_runs) multipliers.insert(r.cfg.data_multiplier);
    const bool size_table = multipliers.size() > 1 && !sizes.empty();
    if (size_table) text += format_table(sizes, ScorerFamily::optimization, "Data size") + "\n";
    write_text(run.path(artifact::report), text);

    const std::string head = "# config_hash=" + run.hash + " seed=" + std::to_string(run.cfg.seed) + "\n";
    if (!main.empty()) {
        write_text(run.path(artifact::report_csv("optimization")), head + table_csv(main, ScorerFamily::optimization));
        write_text(run.path(artifact::report_csv("heldout")), head + table_csv(main, ScorerFamily::heldout));
    }
    if (!ablation.empty()) {
        write_text(run.path(artifact::report_csv("ablation")), head + table_csv(ablation, ScorerFamily::optimization));
    }
    if (size_table) {
        write_text(run.path(artifact::report_csv("data_size")), head + table_csv(sizes, ScorerFamily::optimization));
    }
    log("report: " + std::to_string(main.size() + ablation.size()) + " methods");
    return text;
}

// ---------------------------------------------------------------------------
// Dry run

struct PlanStep {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

inline std::vector<PlanStep> plan(const std::string& subcommand, DistillStrategy s, Objective o, EvalMethod m) {
    const std::string label = model_label(s, o);
    const std::string eval_label = method_label(m, s, o);
    if (subcommand == "synth") return {{"synth", {}, {artifact::prompts, artifact::corpus}}};
    if (subcommand == "pretrain") {
        return {{"pretrain", {artifact::prompts, artifact::corpus}, {artifact::base, artifact::pretrain_log}}};
    }
    if (subcommand == "generate") return {{"generate", {artifact::prompts, artifact::base}, {artifact::samples}}};
    if (subcommand == "distill") {
        return {{"distill", {artifact::prompts, artifact::samples}, {artifact::dataset(s), artifact::dataset_stats(s)}}};
    }
    if (subcommand == "train") {
        std::vector<std::string> in{artifact::prompts, artifact::base};
        if (o != Objective::rlhf) in.push_back(artifact::dataset(s));
        return {{"train", in, {artifact::model(label), artifact::train_log(label)}}};
    }
    if (subcommand == "evaluate") {
        return {{"evaluate",
                 {artifact::prompts, m == EvalMethod::checkpoint ? artifact::model(label) : artifact::base},
                 {artifact::eval(eval_label), artifact::eval_records(eval_label)}}};
    }
    if (subcommand == "report") return {{"report", {"eval.*.jsonl"}, {artifact::report}}};
    throw ConfigError("<subcommand>", "unknown subcommand " + subcommand);
}

// Validates the config and prints each step with the state of its inputs;
// no computation.
inline std::string dry_run(const Run& run, const std::string& subcommand, DistillStrategy s, Objective o,
                           EvalMethod m) {
    std::ostringstream out;
    out << "config " << run.hash << " seed " << run.cfg.seed << " -> " << run.dir.string() << '\n';
    for (const auto& step : plan(subcommand, s, o, m)) {
        out << step.subcommand << '\n';
        for (const auto& in : step.inputs) {
            const bool present = in.find('*') != std::string::npos || fs::exists(run.path(in));
            out << "  in  " << in << (present ? "" : "  (missing)") << '\n';
        }
        for (const auto& o2 : step.outputs) out << "  out " << o2 << '\n';
    }
    return out.str();
}

}  // namespace ctrlgen::cli
