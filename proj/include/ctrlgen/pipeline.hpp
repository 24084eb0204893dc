#pragma once

// The end-to-end experiment as plain functions over one config: synthesize
// the task, pretrain the aligned base model, self-generate, distill,
// fine-tune and evaluate. The command-line tool persists what these return.

#include <cstdint>
#include <string>
#include <vector>

#include "ctrlgen/baselines.hpp"
#include "ctrlgen/datagen.hpp"
#include "ctrlgen/distill.hpp"
#include "ctrlgen/evalsuite.hpp"
#include "ctrlgen/objectives.hpp"
#include "ctrlgen/reward.hpp"
#include "ctrlgen/tasksynth.hpp"
#include "ctrlgen/toylm.hpp"

namespace ctrlgen {

enum class EvalMethod : std::uint8_t { prompting, rerank, checkpoint };

inline constexpr std::string_view to_string(EvalMethod m) noexcept {
    switch (m) {
        case EvalMethod::prompting: return "prompting";
        case EvalMethod::rerank: return "rerank";
        case EvalMethod::checkpoint: return "checkpoint";
    }
    return "?";
}

inline std::optional<EvalMethod> parse_eval_method(std::string_view s) noexcept {
    for (auto m : {EvalMethod::prompting, EvalMethod::rerank, EvalMethod::checkpoint}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

struct PipelineConfig {
    std::uint64_t seed = 1;

    int n_info = 12;
    int n_hazard = 6;
    std::size_t n_prompts = 200;
    double tradeoff_fraction = 0.3;
    PromptOptions prompt_options;
    CorpusOptions corpus;
    std::size_t corpus_prompts = 0;  // extra prompts behind the aligned corpus; 0 = the training split

    ModelShape model;
    TrainOptions pretrain{.epochs = 6, .batch_size = 8, .lr_multiplier = 150.0};

    double scorer_gain = kDefaultGain;
    std::uint64_t heldout_seed = 0x5EED;

    SamplerConfig sampler;           // evaluation and RL episodes
    int samples_per_prompt = 8;      // N
    int data_multiplier = 1;         // N is scaled by this (1x / 8x)
    double generate_temperature = 1.0;

    DistillStrategy distill = DistillStrategy::moec;
    Objective objective = Objective::clm;
    PromptFormat format = PromptFormat::numeric_harmless;
    TrainOptions finetune{.epochs = 1, .batch_size = 8, .lr_multiplier = 150.0};
    RLRunOptions rlhf;

    EvalMethod method = EvalMethod::checkpoint;
    int rerank_k = 3;
    int grid_bins = 5;

    void validate() const;
};

inline void PipelineConfig::validate() const {
    auto need = [](bool ok, const char* field, const std::string& why) {
        if (!ok) throw ConfigError(field, why);
    };
    need(n_info >= 4, "universe.n_info", "must be >= 4");
    need(n_hazard >= 2, "universe.n_hazard", "must be >= 2");
    need(n_prompts >= 1, "prompts.count", "must be >= 1");
    need(tradeoff_fraction >= 0.0 && tradeoff_fraction <= 1.0, "prompts.tradeoff_fraction", "must lie in [0,1]");
    need(prompt_options.mixed_fraction >= 0.0 && prompt_options.mixed_fraction <= 1.0, "prompts.mixed_fraction",
         "must lie in [0,1]");
    need(corpus.responses_per_prompt >= 1, "corpus.responses_per_prompt", "must be >= 1");
    need(corpus.tangent_probability >= 0.0 && corpus.tangent_probability <= 1.0, "corpus.tangent_probability",
         "must lie in [0,1]");
    need(model.n_blocks == 1 || model.n_blocks == 2, "model.n_blocks", "must be 1 or 2");
    need(model.n_heads >= 1 && model.d_model % std::max(model.n_heads, 1) == 0, "model.n_heads", "must divide model.d_model");
    need(model.d_model > 0 && model.d_hidden > 0 && model.context_window > 0, "model", "dimensions must be positive");
    need(pretrain.epochs >= 0, "pretrain.epochs", "must be >= 0");
    need(pretrain.batch_size >= 1, "pretrain.batch_size", "must be >= 1");
    need(pretrain.lr_multiplier > 0.0, "pretrain.lr_multiplier", "must be > 0");
    need(scorer_gain > 0.0, "scorer.gain", "must be > 0");
    need(sampler.nucleus_p > 0.0 && sampler.nucleus_p <= 1.0, "sampler.top_p", "must lie in (0,1]");
    need(sampler.temperature > 0.0, "sampler.temperature", "must be > 0");
    need(sampler.max_len >= 1, "sampler.max_len", "must be >= 1");
    need(samples_per_prompt >= 1, "generate.samples_per_prompt", "must be >= 1");
    need(data_multiplier >= 1, "generate.data_multiplier", "must be >= 1");
    need(generate_temperature > 0.0, "generate.temperature", "must be > 0");
    need(finetune.epochs >= 1, "finetune.epochs", "must be >= 1");
    need(finetune.batch_size >= 1, "finetune.batch_size", "must be >= 1");
    need(finetune.lr_multiplier > 0.0, "finetune.lr_multiplier", "must be > 0");
    need(rlhf.rl.clip_epsilon > 0.0 && rlhf.rl.clip_epsilon < 1.0, "rlhf.clip_epsilon", "must lie in (0,1)");
    need(rlhf.rl.kl_coeff >= 0.0, "rlhf.kl_coeff", "must be >= 0");
    need(rlhf.rl.episodes_per_update >= 1, "rlhf.episodes_per_update", "must be >= 1");
    need(rlhf.rl.ppo_epochs >= 1, "rlhf.ppo_epochs", "must be >= 1");
    need(rlhf.updates >= 1, "rlhf.updates", "must be >= 1");
    need(rlhf.lr_multiplier > 0.0, "rlhf.lr_multiplier", "must be > 0");
    need(rerank_k >= 1, "evaluate.rerank_k", "must be >= 1");
    need(grid_bins >= 1, "evaluate.grid_bins", "must be >= 1");
}

inline std::uint64_t stage_seed(const PipelineConfig& cfg, const char* stage) {
    return derive_seed(cfg.seed, {stream_tag(stage)});
}

struct TaskData {
    Universe universe;
    std::vector<PromptSpec> prompts;
    std::vector<CorpusPair> corpus;

    std::vector<PromptSpec> split(Split s) const { return select_split(prompts, s); }
};

// The aligned corpus is drawn either from the training split or from a
// separate pool of `corpus_prompts` prompts with the same family mix.
inline TaskData synthesize(const PipelineConfig& cfg) {
    TaskData t{build_universe(cfg.n_info, cfg.n_hazard, stage_seed(cfg, "universe")), {}, {}};
    t.prompts = make_prompts(t.universe, cfg.n_prompts, cfg.tradeoff_fraction, stage_seed(cfg, "prompts"),
                             cfg.prompt_options);
    if (cfg.corpus_prompts == 0) {
        t.corpus = make_aligned_corpus(t.universe, t.split(Split::train), stage_seed(cfg, "corpus"), cfg.corpus);
    } else {
        const auto pool = make_prompts(t.universe, cfg.corpus_prompts, cfg.tradeoff_fraction,
                                       stage_seed(cfg, "corpus-prompts"), cfg.prompt_options);
        t.corpus = make_aligned_corpus(t.universe, pool, stage_seed(cfg, "corpus"), cfg.corpus);
    }
    return t;
}

inline ModelParams pretrain_base(const PipelineConfig& cfg, const TaskData& task, PretrainReport* report = nullptr) {
    ModelParams p = init_model(task.universe.vocab, cfg.model, stage_seed(cfg, "init"));
    TrainOptions opt = cfg.pretrain;
    opt.seed = stage_seed(cfg, "pretrain");
    PretrainReport r = pretrain_aligned(p, task.corpus, opt);
    if (report != nullptr) *report = std::move(r);
    return p;
}

inline RewardPanel make_panel(const PipelineConfig& cfg, const TaskData& task) {
    return RewardPanel(task.universe.vocab, cfg.scorer_gain, cfg.heldout_seed);
}

inline SamplerConfig generation_sampler(const PipelineConfig& cfg) {
    SamplerConfig s = cfg.sampler;
    s.temperature = cfg.generate_temperature;
    s.seed = stage_seed(cfg, "generate");
    return s;
}

inline std::vector<ScoredSample> self_generate_train(const PipelineConfig& cfg, const TaskData& task,
                                                     const ModelParams& base, const RewardPanel& panel) {
    return self_generate(base, panel, task.split(Split::train), cfg.samples_per_prompt * cfg.data_multiplier,
                         generation_sampler(cfg));
}

inline std::vector<TrainExample> distill_samples(const PipelineConfig& cfg, const std::vector<ScoredSample>& samples,
                                                 DistillStrategy strategy, std::vector<ControlPair>* empty_pairs = nullptr) {
    const std::uint64_t seed = stage_seed(cfg, "distill");
    switch (strategy) {
        case DistillStrategy::moec: return moec(samples, seed);
        case DistillStrategy::vanilla: return vanilla(samples, seed);
        case DistillStrategy::oversample: {
            auto base = moec(samples, seed);
            if (base.empty()) return base;
            auto r = oversample(base, seed);
            if (empty_pairs != nullptr) *empty_pairs = r.empty_pairs;
            return std::move(r.examples);
        }
    }
    return {};
}

struct FinetuneResult {
    ModelParams params;
    std::vector<StepRecord> steps;
    std::vector<RLStepDiagnostics> rl_steps;
};

inline FinetuneResult finetune_model(const PipelineConfig& cfg, const TaskData& task, const ModelParams& base,
                                     const std::vector<TrainExample>& data, Objective objective,
                                     const RewardPanel& panel) {
    FinetuneResult r{base, {}, {}};
    if (objective == Objective::rlhf) {
        SamplerConfig s = cfg.sampler;
        s.seed = stage_seed(cfg, "rlhf");
        r.rl_steps = finetune_rlhf(r.params, task.split(Split::train), cfg.rlhf, cfg.format, s, panel);
        return r;
    }
    if (data.empty()) throw DomainError("fine-tuning data is empty");
    TrainOptions opt = cfg.finetune;
    opt.seed = stage_seed(cfg, "finetune");
    r.steps = finetune_supervised(r.params, data, objective, cfg.format, opt);
    return r;
}

inline GenerateFn method_generator(const PipelineConfig& cfg, const ModelParams& params, EvalMethod method,
                                   const RewardPanel& panel) {
    const SamplerConfig base = cfg.sampler;
    const PromptFormat fmt = cfg.format;
    const int k = cfg.rerank_k;
    if (method == EvalMethod::rerank) {
        return [&params, &panel, base, fmt, k](const PromptSpec& p, const ControlPair& c, std::uint64_t seed) {
            return rerank(params, p, c, k, fmt, base.with_seed(seed), panel);
        };
    }
    return [&params, base, fmt](const PromptSpec& p, const ControlPair& c, std::uint64_t seed) {
        return prompt_generate(params, p.tokens, c, fmt, base.with_seed(seed));
    };
}

inline EvalRun evaluate_model(const PipelineConfig& cfg, const TaskData& task, const ModelParams& params,
                              EvalMethod method, const RewardPanel& panel, std::string label) {
    return evaluate_method(method_generator(cfg, params, method, panel), task.split(Split::test), panel,
                           stage_seed(cfg, "evaluate"), std::move(label), cfg.grid_bins);
}

}  // namespace ctrlgen
