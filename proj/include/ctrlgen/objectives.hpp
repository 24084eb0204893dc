#pragma once

// Fine-tuning objectives: conditional LM (CLM), full-sequence LM (PLM),
// ExMATE (CLM plus the probability of y under a fake control), and a PPO-style
// RLHF step driven by the r_ctrl reward.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctrlgen/core.hpp"
#include "ctrlgen/records.hpp"
#include "ctrlgen/reward.hpp"
#include "ctrlgen/toylm.hpp"

namespace ctrlgen {

enum class Objective : std::uint8_t { clm, plm, exmate, rlhf };

inline constexpr std::string_view to_string(Objective o) noexcept {
    switch (o) {
        case Objective::clm: return "clm";
        case Objective::plm: return "plm";
        case Objective::exmate: return "exmate";
        case Objective::rlhf: return "rlhf";
    }
    return "?";
}

inline std::optional<Objective> parse_objective(std::string_view s) noexcept {
    for (auto o : {Objective::clm, Objective::plm, Objective::exmate, Objective::rlhf}) {
        if (to_string(o) == s) return o;
    }
    return std::nullopt;
}

namespace detail {

template <class Fn>
auto with_prompt_context(PromptId id, Fn&& fn) {
    try {
        return fn();
    } catch (const ContextOverflowError& e) {
        throw ContextOverflowError("prompt " + std::to_string(id.value) + ": " + e.what());
    }
}

inline void require_batch(std::span<const TrainExample> batch) {
    if (batch.empty()) throw DomainError("loss needs a non-empty batch");
}

inline double supervised_loss(const ModelParams& p, std::span<const TrainExample> batch, PromptFormat fmt,
                              LossSpan span, std::vector<double>* grad) {
    require_batch(batch);
    const double w = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& ex : batch) {
        const TokenSeq ctrl = encode_control(p.vocab, ex.control, fmt);
        total += with_prompt_context(ex.prompt_id, [&] { return sequence_nll(p, ctrl, ex.x, ex.y, span, w, grad); });
    }
    return total * w;
}

// log P(y | x, control) with `d_logp` times its gradient accumulated into
// `grad`, where d_logp is computed from the log-probability itself.
template <class Coef>
double response_logprob(const ModelParams& p, TokenSpan control, TokenSpan x, TokenSpan y, std::vector<double>* grad,
                        Coef&& d_logp) {
    const SequenceLayout s = layout_sequence(p, control, x, y);
    if (y.empty()) return 0.0;
    const ForwardPass fp(p, s.input, s.targets);
    double lp = 0.0;
    for (std::size_t t = s.response_start; t < s.targets.size(); ++t) lp += fp.target_logprob(static_cast<Eigen::Index>(t));
    if (grad != nullptr) {
        const double c = d_logp(lp);
        if (c != 0.0) {
            // backward() differentiates sum coef * (-log p), hence the sign.
            std::vector<double> coef(s.targets.size(), 0.0);
            for (std::size_t t = s.response_start; t < s.targets.size(); ++t) coef[t] = -c;
            fp.backward(coef, *grad);
        }
    }
    return lp;
}

}  // namespace detail

// Mean over the batch of -log P(y | x, control).
inline double clm_loss(const ModelParams& p, std::span<const TrainExample> batch, PromptFormat fmt,
                       std::vector<double>* grad = nullptr) {
    return detail::supervised_loss(p, batch, fmt, LossSpan::response, grad);
}

// Mean over the batch of -log P(control, x, y): every position is modeled.
inline double plm_loss(const ModelParams& p, std::span<const TrainExample> batch, PromptFormat fmt,
                       std::vector<double>* grad = nullptr) {
    return detail::supervised_loss(p, batch, fmt, LossSpan::full, grad);
}

// One of the three grid pairs other than `real`, drawn uniformly.
inline ControlPair fake_control(const ControlPair& real, std::uint64_t seed, PromptId prompt) {
    const int real_idx = grid_index(real);
    Rng rng(derive_seed(seed, {stream_tag("fake-control"), prompt.value, static_cast<std::uint64_t>(real_idx)}));
    int k = static_cast<int>(rng.below(3));
    if (k >= real_idx) ++k;
    return kControlGrid[static_cast<std::size_t>(k)];
}

struct ExmateTerms {
    double loss = 0.0;            // clm + fake_probability
    double clm = 0.0;             // mean -log P(y | x, control)
    double fake_probability = 0.0;  // mean P(y | x, fake control)
};

inline ExmateTerms exmate_terms(const ModelParams& p, std::span<const TrainExample> batch, PromptFormat fmt,
                                std::uint64_t fake_seed, std::vector<double>* grad = nullptr) {
    detail::require_batch(batch);
    const double w = 1.0 / static_cast<double>(batch.size());
    ExmateTerms t;
    t.clm = clm_loss(p, batch, fmt, grad);
    double prob_sum = 0.0;
    for (const auto& ex : batch) {
        const TokenSeq fake = encode_control(p.vocab, fake_control(ex.control, fake_seed, ex.prompt_id), fmt);
        const double lp = detail::with_prompt_context(ex.prompt_id, [&] {
            // d(w * exp(lp)) / d(lp) = w * exp(lp)
            return detail::response_logprob(p, fake, ex.x, ex.y, grad, [w](double l) { return w * std::exp(l); });
        });
        prob_sum += std::exp(lp);
    }
    t.fake_probability = prob_sum * w;
    t.loss = t.clm + t.fake_probability;
    return t;
}

inline double exmate_loss(const ModelParams& p, std::span<const TrainExample> batch, PromptFormat fmt,
                          std::uint64_t fake_seed, std::vector<double>* grad = nullptr) {
    return exmate_terms(p, batch, fmt, fake_seed, grad).loss;
}

// Supervised fine-tuning with minibatch AdamW. ExMATE redraws fake controls
// every epoch.
inline std::vector<StepRecord> finetune_supervised(ModelParams& params, const std::vector<TrainExample>& data,
                                                   Objective objective, PromptFormat fmt, const TrainOptions& opt) {
    if (objective == Objective::rlhf) throw DomainError("rlhf is not a supervised objective");
    std::vector<TrainExample> batch;
    return run_minibatches(params, data.size(), opt,
                           [&](std::span<const std::size_t> idx, int epoch, std::vector<double>& grad) {
                               batch.clear();
                               for (std::size_t i : idx) batch.push_back(data[i]);
                               switch (objective) {
                                   case Objective::clm: return clm_loss(params, batch, fmt, &grad);
                                   case Objective::plm: return plm_loss(params, batch, fmt, &grad);
                                   default: {
                                       const auto seed = derive_seed(opt.seed, {stream_tag("exmate-epoch"),
                                                                                static_cast<std::uint64_t>(epoch)});
                                       return exmate_loss(params, batch, fmt, seed, &grad);
                                   }
                               }
                           });
}

// ---------------------------------------------------------------------------
// RLHF

// 1 - (rm_hp - s_hp)^2 - (rm_sf - s_sf)^2; lies in [-1, 1].
inline double r_ctrl(double s_hp, double s_sf, double rm_hp, double rm_sf) {
    for (double v : {s_hp, s_sf, rm_hp, rm_sf}) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("r_ctrl argument " + std::to_string(v) + " outside [0,1]");
    }
    return 1.0 - (rm_hp - s_hp) * (rm_hp - s_hp) - (rm_sf - s_sf) * (rm_sf - s_sf);
}

enum class RLBaseline : std::uint8_t { batch_mean, none };

inline constexpr std::string_view to_string(RLBaseline b) noexcept {
    return b == RLBaseline::batch_mean ? "batch_mean" : "none";
}

inline std::optional<RLBaseline> parse_rl_baseline(std::string_view s) noexcept {
    if (s == "batch_mean") return RLBaseline::batch_mean;
    if (s == "none") return RLBaseline::none;
    return std::nullopt;
}

struct RLConfig {
    double clip_epsilon = 0.2;
    double kl_coeff = 0.05;
    int episodes_per_update = 16;
    RLBaseline baseline = RLBaseline::batch_mean;
    int ppo_epochs = 2;

    void validate() const {
        if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw DomainError("clip_epsilon must lie in (0,1)");
        if (!(kl_coeff >= 0.0)) throw DomainError("kl_coeff must be >= 0");
        if (episodes_per_update < 1) throw DomainError("episodes_per_update must be >= 1");
        if (ppo_epochs < 1) throw DomainError("ppo_epochs must be >= 1");
    }
};

struct Episode {
    const PromptSpec* prompt = nullptr;
    ControlPair control;
    TokenSeq control_tokens;
    TokenSeq y;
    std::vector<double> old_logp;  // per response token, behaviour snapshot
    std::vector<double> ref_logp;
    double terminal_reward = 0.0;  // r_ctrl
    double total_reward = 0.0;     // r_ctrl plus summed KL rewards
    double advantage = 0.0;
};

struct RLStepDiagnostics {
    long step = 0;
    double loss = 0.0;
    double reward_mean = 0.0;  // mean terminal r_ctrl
    double kl_mean = 0.0;      // mean per-token log pi - log pi_ref
    double clip_fraction = 0.0;
    std::size_t tokens = 0;
};

namespace detail {

inline std::vector<double> response_token_logprobs(const ModelParams& p, TokenSpan control, TokenSpan x, TokenSpan y) {
    const SequenceLayout s = layout_sequence(p, control, x, y);
    std::vector<double> out;
    if (y.empty()) return out;
    const ForwardPass fp(p, s.input, s.targets);
    for (std::size_t t = s.response_start; t < s.targets.size(); ++t) {
        out.push_back(fp.target_logprob(static_cast<Eigen::Index>(t)));
    }
    return out;
}

}  // namespace detail

// Clipped surrogate min(r A, clip(r, 1-eps, 1+eps) A) for one token, and
// whether the clipped branch is the active one (zero gradient).
struct SurrogateTerm {
    double value = 0.0;
    bool clipped = false;
};

inline SurrogateTerm clipped_surrogate(double ratio, double advantage, double eps) {
    const double unclipped = ratio * advantage;
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
    if (clipped < unclipped) return {clipped, true};
    return {unclipped, false};
}

// Draws one batch of episodes with the current policy.
inline std::vector<Episode> collect_episodes(const ModelParams& params, const ModelParams& ref,
                                             const std::vector<PromptSpec>& prompts, const RLConfig& rl,
                                             PromptFormat fmt, const SamplerConfig& cfg, const RewardPanel& panel,
                                             long step) {
    if (prompts.empty()) throw DomainError("rlhf needs at least one prompt");
    Rng rng(derive_seed(cfg.seed, {stream_tag("rl-episodes"), static_cast<std::uint64_t>(step)}));
    std::vector<Episode> eps(static_cast<std::size_t>(rl.episodes_per_update));
    for (std::size_t e = 0; e < eps.size(); ++e) {
        Episode& ep = eps[e];
        ep.prompt = &prompts[rng.below(prompts.size())];
        ep.control = kControlGrid[rng.below(4)];
        ep.control_tokens = encode_control(params.vocab, ep.control, fmt);
        const auto seed = derive_seed(cfg.seed, {stream_tag("rl-sample"), static_cast<std::uint64_t>(step), e});
        ep.y = detail::with_prompt_context(ep.prompt->id, [&] {
            return sample(params, ep.prompt->tokens, ep.control_tokens, cfg.with_seed(seed));
        });
        ep.old_logp = detail::response_token_logprobs(params, ep.control_tokens, ep.prompt->tokens, ep.y);
        ep.ref_logp = detail::response_token_logprobs(ref, ep.control_tokens, ep.prompt->tokens, ep.y);
        const ScorePair rm = panel.score_pair(*ep.prompt, ep.y, ScorerFamily::optimization);
        ep.terminal_reward = r_ctrl(ep.control.helpfulness, ep.control.safety, rm.hp, rm.sf);
        double kl = 0.0;
        for (std::size_t t = 0; t < ep.y.size(); ++t) kl += ep.old_logp[t] - ep.ref_logp[t];
        ep.total_reward = ep.terminal_reward - rl.kl_coeff * kl;
    }
    double baseline = 0.0;
    if (rl.baseline == RLBaseline::batch_mean) {
        for (const auto& ep : eps) baseline += ep.total_reward;
        baseline /= static_cast<double>(eps.size());
    }
    for (auto& ep : eps) ep.advantage = ep.total_reward - baseline;
    return eps;
}

// One policy update. Throws NonFiniteLossError and leaves `params` untouched
// when the surrogate or its gradient is not finite.
inline RLStepDiagnostics rlhf_step(ModelParams& params, const ModelParams& ref_params,
                                   const std::vector<PromptSpec>& prompts, const RLConfig& rl, PromptFormat fmt,
                                   const SamplerConfig& cfg, const RewardPanel& panel, AdamW& optimizer, long step) {
    rl.validate();
    const std::vector<Episode> eps = collect_episodes(params, ref_params, prompts, rl, fmt, cfg, panel, step);

    RLStepDiagnostics d;
    d.step = step;
    double kl_sum = 0.0;
    for (const auto& ep : eps) {
        d.reward_mean += ep.terminal_reward;
        d.tokens += ep.y.size();
        for (std::size_t t = 0; t < ep.y.size(); ++t) kl_sum += ep.old_logp[t] - ep.ref_logp[t];
    }
    d.reward_mean /= static_cast<double>(eps.size());
    d.kl_mean = d.tokens > 0 ? kl_sum / static_cast<double>(d.tokens) : 0.0;
    if (d.tokens == 0) return d;

    const std::vector<double> saved = params.weights;
    const double inv_tokens = 1.0 / static_cast<double>(d.tokens);
    std::vector<double> grad(params.weights.size());
    std::size_t clipped = 0, counted = 0;
    for (int epoch = 0; epoch < rl.ppo_epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double objective = 0.0;
        for (const auto& ep : eps) {
            const SequenceLayout s = layout_sequence(params, ep.control_tokens, ep.prompt->tokens, ep.y);
            const ForwardPass fp(params, s.input, s.targets);
            std::vector<double> coef(s.targets.size(), 0.0);
            for (std::size_t t = 0; t < ep.y.size(); ++t) {
                const std::size_t pos = s.response_start + t;
                const double ratio = std::exp(fp.target_logprob(static_cast<Eigen::Index>(pos)) - ep.old_logp[t]);
                const SurrogateTerm term = clipped_surrogate(ratio, ep.advantage, rl.clip_epsilon);
                objective += term.value;
                ++counted;
                if (term.clipped) {
                    ++clipped;
                } else {
                    // loss = -A r / T;  d loss = (A r / T) * d(-log pi)
                    coef[pos] = ep.advantage * ratio * inv_tokens;
                }
            }
            fp.backward(coef, grad);
        }
        d.loss = -objective * inv_tokens;
        const bool finite = std::isfinite(d.loss) &&
                            std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
        if (!finite) {
            params.weights = saved;
            throw NonFiniteLossError("non-finite policy loss at rl step " + std::to_string(step));
        }
        optimizer.step(params.weights, grad);
    }
    d.clip_fraction = static_cast<double>(clipped) / static_cast<double>(counted);
    return d;
}

inline std::string rl_log_line(const RLStepDiagnostics& d) {
    return RecordWriter{}
        .field("step", static_cast<long long>(d.step))
        .number("loss", d.loss)
        .number("reward_mean", d.reward_mean)
        .number("kl_mean", d.kl_mean)
        .number("clip_fraction", d.clip_fraction)
        .str();
}

inline std::string supervised_log_line(const StepRecord& r) {
    return RecordWriter{}
        .field("epoch", static_cast<long long>(r.epoch))
        .field("step", static_cast<long long>(r.step))
        .number("loss", r.loss)
        .str();
}

struct RLRunOptions {
    RLConfig rl;
    int updates = 50;
    double lr_multiplier = 1.0;
    double max_grad_norm = 1.0;
};

// Runs `updates` consecutive steps from a frozen snapshot of the incoming
// parameters.
inline std::vector<RLStepDiagnostics> finetune_rlhf(ModelParams& params, const std::vector<PromptSpec>& prompts,
                                                    const RLRunOptions& opt, PromptFormat fmt,
                                                    const SamplerConfig& cfg, const RewardPanel& panel) {
    const ModelParams ref = params;
    AdamWConfig ac;
    ac.learning_rate = kBaseLearningRate * opt.lr_multiplier;
    ac.weight_decay = 0.0;
    ac.max_grad_norm = opt.max_grad_norm;
    AdamW optim(params.weights.size(), ac);
    std::vector<RLStepDiagnostics> log;
    for (int s = 0; s < opt.updates; ++s) {
        log.push_back(rlhf_step(params, ref, prompts, opt.rl, fmt, cfg, panel, optim, s));
    }
    return log;
}

}  // namespace ctrlgen
