#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctrlgen/random.hpp"
#include "ctrlgen/tasksynth.hpp"
#include "ctrlgen/toylm/model.hpp"

namespace ctrlgen {

// Reference learning rate; desk-scale runs multiply it (see TrainOptions).
inline constexpr double kBaseLearningRate = 2e-5;

struct AdamWConfig {
    double learning_rate = kBaseLearningRate;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
    double max_grad_norm = 1.0;  // <= 0 disables clipping
};

// AdamW with decoupled weight decay and optional global-norm clipping.
class AdamW {
public:
    AdamW(std::size_t n, AdamWConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

    // Returns the pre-clipping gradient norm.
    double step(std::vector<double>& w, std::vector<double>& g) {
        double norm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
        if (cfg_.max_grad_norm > 0.0 && norm > cfg_.max_grad_norm) {
            const double s = cfg_.max_grad_norm / norm;
            for (double& x : g) x *= s;
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const double lr = cfg_.learning_rate;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.epsilon) + cfg_.weight_decay * w[i]);
        }
        return norm;
    }

    long steps() const noexcept { return t_; }

private:
    AdamWConfig cfg_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

struct TrainOptions {
    int epochs = 1;
    int batch_size = 8;
    double lr_multiplier = 1.0;
    double weight_decay = 0.01;
    double max_grad_norm = 1.0;
    std::uint64_t seed = 0;

    AdamWConfig adamw() const {
        AdamWConfig c;
        c.learning_rate = kBaseLearningRate * lr_multiplier;
        c.weight_decay = weight_decay;
        c.max_grad_norm = max_grad_norm;
        return c;
    }
};

struct StepRecord {
    int epoch = 0;
    long step = 0;
    double loss = 0.0;
};

// Computes the batch loss for the items at `indices` and accumulates its
// gradient into `grad`. `epoch` lets objectives resample per-epoch noise.
using BatchLossFn = std::function<double(std::span<const std::size_t> indices, int epoch, std::vector<double>& grad)>;

// Shuffled minibatch AdamW over `n_items` items. Aborts with
// NonFiniteLossError (parameters left at their last finite state).
inline std::vector<StepRecord> run_minibatches(ModelParams& params, std::size_t n_items, const TrainOptions& opt,
                                               const BatchLossFn& batch_loss) {
    std::vector<StepRecord> log;
    if (n_items == 0 || opt.epochs <= 0) return log;
    if (opt.batch_size < 1) throw DomainError("batch_size must be >= 1");
    AdamW optim(params.weights.size(), opt.adamw());
    Rng rng(derive_seed(opt.seed, {stream_tag("minibatch-order")}));
    std::vector<std::size_t> order(n_items);
    std::vector<double> grad(params.weights.size());
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        for (std::size_t start = 0; start < n_items; start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end = std::min(n_items, start + static_cast<std::size_t>(opt.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            const double loss = batch_loss(std::span(order).subspan(start, end - start), epoch, grad);
            const bool finite_grad =
                std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
            if (!std::isfinite(loss) || !finite_grad) {
                throw NonFiniteLossError("non-finite loss " + std::to_string(loss) + " at epoch " +
                                         std::to_string(epoch) + ", step " + std::to_string(optim.steps()));
            }
            optim.step(params.weights, grad);
            log.push_back({epoch, optim.steps(), loss});
        }
    }
    return log;
}

struct PretrainReport {
    std::optional<double> initial_loss;  // absent for an empty corpus
    std::optional<double> final_loss;
    std::vector<StepRecord> steps;
};

inline double corpus_loss(const ModelParams& p, std::span<const CorpusPair> corpus) {
    double total = 0.0;
    for (const auto& ex : corpus) total += sequence_nll(p, {}, ex.x, ex.y, LossSpan::response, 0.0, nullptr);
    return total / static_cast<double>(corpus.size());
}

// Supervised training of the base model on uncontrolled (x, y) pairs.
inline PretrainReport pretrain_aligned(ModelParams& params, std::span<const CorpusPair> corpus,
                                       const TrainOptions& opt) {
    PretrainReport report;
    if (corpus.empty()) return report;
    report.initial_loss = corpus_loss(params, corpus);
    report.steps = run_minibatches(params, corpus.size(), opt,
                                   [&](std::span<const std::size_t> idx, int, std::vector<double>& grad) {
                                       const double w = 1.0 / static_cast<double>(idx.size());
                                       double loss = 0.0;
                                       for (std::size_t i : idx) {
                                           loss += sequence_nll(params, {}, corpus[i].x, corpus[i].y,
                                                                LossSpan::response, w, &grad);
                                       }
                                       return loss * w;
                                   });
    report.final_loss = corpus_loss(params, corpus);
    return report;
}

}  // namespace ctrlgen
