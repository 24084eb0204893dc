#pragma once

// A small causal transformer over a flat parameter vector.
//
// Architecture: token + learned absolute position embeddings, `n_blocks`
// residual blocks of (multi-head causal self-attention, GELU MLP), then an
// output projection. No normalization layers; at this size they are not
// needed for stable training and they keep the backward pass short.
//
// The input to the network is always `<bos>` followed by the sequence being
// modeled, so every token of that sequence (including the first) has a
// predicting position.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "ctrlgen/core.hpp"
#include "ctrlgen/random.hpp"
#include "ctrlgen/tasksynth.hpp"

namespace ctrlgen {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;

struct ModelShape {
    int vocab_size = 0;
    int context_window = 96;
    int d_model = 32;
    int d_hidden = 64;
    int n_blocks = 2;
    int n_heads = 1;  // must divide d_model

    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

inline constexpr std::size_t kMaxParameters = 1'000'000;

struct TensorRef {
    std::size_t offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rows * cols); }
};

struct BlockLayout {
    TensorRef wq, wk, wv, wo, w1, b1, w2, b2;
};

struct ParamLayout {
    TensorRef tok_emb, pos_emb;
    std::vector<BlockLayout> blocks;
    TensorRef out_w, out_b;
    std::size_t total = 0;

    static ParamLayout of(const ModelShape& s) {
        ParamLayout l;
        std::size_t off = 0;
        auto take = [&](Eigen::Index r, Eigen::Index c) {
            TensorRef t{off, r, c};
            off += t.size();
            return t;
        };
        const Eigen::Index d = s.d_model;
        const Eigen::Index h = s.d_hidden;
        l.tok_emb = take(s.vocab_size, d);
        l.pos_emb = take(s.context_window, d);
        for (int b = 0; b < s.n_blocks; ++b) {
            BlockLayout bl;
            bl.wq = take(d, d);
            bl.wk = take(d, d);
            bl.wv = take(d, d);
            bl.wo = take(d, d);
            bl.w1 = take(d, h);
            bl.b1 = take(1, h);
            bl.w2 = take(h, d);
            bl.b2 = take(1, d);
            l.blocks.push_back(bl);
        }
        l.out_w = take(d, s.vocab_size);
        l.out_b = take(1, s.vocab_size);
        l.total = off;
        return l;
    }
};

struct ModelParams {
    Vocabulary vocab;
    ModelShape shape;
    std::vector<double> weights;

    std::size_t parameter_count() const noexcept { return weights.size(); }
    TokenId bos() const { return vocab.id(tokens::bos); }
    TokenId eos() const { return vocab.id(tokens::eos); }
    ParamLayout layout() const { return ParamLayout::of(shape); }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline void validate_shape(const ModelShape& s) {
    if (s.vocab_size <= 0 || s.context_window <= 0 || s.d_model <= 0 || s.d_hidden <= 0) {
        throw DomainError("model shape dimensions must be positive");
    }
    if (s.n_blocks < 1 || s.n_blocks > 2) throw DomainError("n_blocks must be 1 or 2");
    if (s.n_heads < 1 || s.d_model % s.n_heads != 0) throw DomainError("n_heads must divide d_model");
    if (ParamLayout::of(s).total > kMaxParameters) throw DomainError("model exceeds the parameter budget");
}

// Gaussian init scaled by fan-in; biases start at zero.
inline ModelParams init_model(const Vocabulary& vocab, ModelShape shape, std::uint64_t seed) {
    shape.vocab_size = static_cast<int>(vocab.size());
    validate_shape(shape);
    ModelParams p{vocab, shape, {}};
    const ParamLayout l = ParamLayout::of(shape);
    p.weights.assign(l.total, 0.0);
    Rng rng(derive_seed(seed, {stream_tag("init")}));
    auto fill = [&](const TensorRef& t, double stddev) {
        for (std::size_t i = 0; i < t.size(); ++i) p.weights[t.offset + i] = rng.normal(0.0, stddev);
    };
    const double d = shape.d_model;
    fill(l.tok_emb, 0.3);
    fill(l.pos_emb, 0.1);
    for (const auto& b : l.blocks) {
        fill(b.wq, 1.0 / std::sqrt(d));
        fill(b.wk, 1.0 / std::sqrt(d));
        fill(b.wv, 1.0 / std::sqrt(d));
        fill(b.wo, 0.5 / std::sqrt(d));
        fill(b.w1, 1.0 / std::sqrt(d));
        fill(b.w2, 0.5 / std::sqrt(static_cast<double>(shape.d_hidden)));
    }
    fill(l.out_w, 1.0 / std::sqrt(d));
    return p;
}

namespace detail {

inline Eigen::Map<const RowMat> view(const std::vector<double>& w, const TensorRef& t) {
    return {w.data() + t.offset, t.rows, t.cols};
}

inline Eigen::Map<RowMat> view(std::vector<double>& w, const TensorRef& t) {
    return {w.data() + t.offset, t.rows, t.cols};
}

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
}

inline double gelu_grad(double x) {
    const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

inline void log_softmax_rows(RowMat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        const double lse = mx + std::log((m.row(r).array() - mx).exp().sum());
        m.row(r).array() -= lse;
    }
}

}  // namespace detail

inline void check_tokens(const ModelParams& p, TokenSpan seq) {
    for (TokenId t : seq) {
        if (t.value >= static_cast<std::uint32_t>(p.shape.vocab_size)) {
            throw VocabularyError("out-of-vocabulary token id " + std::to_string(t.value));
        }
    }
}

// Full-sequence forward pass that keeps every activation for backward().
//
// `input` is the fed sequence (starting with <bos>); row t of the output
// distribution predicts `targets[t]`.
class ForwardPass {
public:
    ForwardPass(const ModelParams& params, TokenSpan input, TokenSpan targets)
        : params_(&params), layout_(params.layout()), input_(input.begin(), input.end()),
          targets_(targets.begin(), targets.end()) {
        if (input_.size() != targets_.size()) throw DomainError("input/target length mismatch");
        if (static_cast<int>(input_.size()) > params.shape.context_window) {
            throw ContextOverflowError("sequence of length " + std::to_string(input_.size()) +
                                       " exceeds context window " + std::to_string(params.shape.context_window));
        }
        check_tokens(params, input_);
        check_tokens(params, targets_);
        run();
    }

    Eigen::Index length() const noexcept { return static_cast<Eigen::Index>(input_.size()); }

    // log P(targets[t] | input[0..t]).
    double target_logprob(Eigen::Index t) const { return logp_(t, targets_[static_cast<std::size_t>(t)].value); }

    const RowMat& log_probs() const noexcept { return logp_; }

    // Accumulates into `grad` the gradient of  sum_t coef[t] * (-log p_t).
    void backward(std::span<const double> coef, std::vector<double>& grad) const {
        const auto& w = params_->weights;
        const Eigen::Index L = length();
        const Eigen::Index H = params_->shape.n_heads;
        const Eigen::Index dh = params_->shape.d_model / H;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        RowMat dlogits = logp_.array().exp().matrix();
        for (Eigen::Index t = 0; t < L; ++t) {
            dlogits(t, targets_[static_cast<std::size_t>(t)].value) -= 1.0;
            dlogits.row(t) *= coef[static_cast<std::size_t>(t)];
        }

        detail::view(grad, layout_.out_w).noalias() += x_final_.transpose() * dlogits;
        detail::view(grad, layout_.out_b) += dlogits.colwise().sum();
        RowMat dx = dlogits * detail::view(w, layout_.out_w).transpose();

        for (int b = static_cast<int>(layout_.blocks.size()) - 1; b >= 0; --b) {
            const BlockLayout& bl = layout_.blocks[static_cast<std::size_t>(b)];
            const BlockCache& c = cache_[static_cast<std::size_t>(b)];

            // MLP: x2 = x1 + gelu(x1 W1 + b1) W2 + b2
            detail::view(grad, bl.w2).noalias() += c.h.transpose() * dx;
            detail::view(grad, bl.b2) += dx.colwise().sum();
            RowMat dhid = dx * detail::view(w, bl.w2).transpose();
            for (Eigen::Index i = 0; i < dhid.size(); ++i) dhid.data()[i] *= detail::gelu_grad(c.hpre.data()[i]);
            detail::view(grad, bl.w1).noalias() += c.x1.transpose() * dhid;
            detail::view(grad, bl.b1) += dhid.colwise().sum();
            RowMat dx1 = dx;
            dx1.noalias() += dhid * detail::view(w, bl.w1).transpose();

            // Attention: x1 = x + (A V) Wo
            detail::view(grad, bl.wo).noalias() += c.o.transpose() * dx1;
            const RowMat d_o = dx1 * detail::view(w, bl.wo).transpose();
            RowMat dq(L, H * dh), dk(L, H * dh), dv(L, H * dh);
            RowMat ds(L, L);
            for (Eigen::Index hd = 0; hd < H; ++hd) {
                const RowMat& a = c.a[static_cast<std::size_t>(hd)];
                const auto cols = Eigen::seqN(hd * dh, dh);
                const RowMat da = d_o(Eigen::all, cols) * c.v(Eigen::all, cols).transpose();
                dv(Eigen::all, cols) = a.transpose() * d_o(Eigen::all, cols);
                for (Eigen::Index i = 0; i < L; ++i) {
                    const double dot = (da.row(i).array() * a.row(i).array()).sum();
                    ds.row(i) = (a.row(i).array() * (da.row(i).array() - dot)).matrix() * scale;
                }
                dq(Eigen::all, cols) = ds * c.k(Eigen::all, cols);
                dk(Eigen::all, cols) = ds.transpose() * c.q(Eigen::all, cols);
            }
            detail::view(grad, bl.wq).noalias() += c.x.transpose() * dq;
            detail::view(grad, bl.wk).noalias() += c.x.transpose() * dk;
            detail::view(grad, bl.wv).noalias() += c.x.transpose() * dv;
            dx = dx1;
            dx.noalias() += dq * detail::view(w, bl.wq).transpose();
            dx.noalias() += dk * detail::view(w, bl.wk).transpose();
            dx.noalias() += dv * detail::view(w, bl.wv).transpose();
        }

        auto tok = detail::view(grad, layout_.tok_emb);
        auto pos = detail::view(grad, layout_.pos_emb);
        for (Eigen::Index t = 0; t < L; ++t) {
            tok.row(input_[static_cast<std::size_t>(t)].value) += dx.row(t);
            pos.row(t) += dx.row(t);
        }
    }

private:
    struct BlockCache {
        RowMat x, q, k, v, o, x1, hpre, h;
        std::vector<RowMat> a;  // attention weights per head
    };

    void run() {
        const auto& w = params_->weights;
        const Eigen::Index L = length();
        const Eigen::Index d = params_->shape.d_model;
        const Eigen::Index H = params_->shape.n_heads;
        const Eigen::Index dh = d / H;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        RowMat x(L, d);
        const auto tok = detail::view(w, layout_.tok_emb);
        const auto pos = detail::view(w, layout_.pos_emb);
        for (Eigen::Index t = 0; t < L; ++t) {
            x.row(t) = tok.row(input_[static_cast<std::size_t>(t)].value) + pos.row(t);
        }

        cache_.resize(layout_.blocks.size());
        for (std::size_t b = 0; b < layout_.blocks.size(); ++b) {
            const BlockLayout& bl = layout_.blocks[b];
            BlockCache& c = cache_[b];
            c.x = x;
            c.q = x * detail::view(w, bl.wq);
            c.k = x * detail::view(w, bl.wk);
            c.v = x * detail::view(w, bl.wv);
            c.a.assign(static_cast<std::size_t>(H), RowMat::Zero(L, L));
            c.o.resize(L, d);
            for (Eigen::Index hd = 0; hd < H; ++hd) {
                RowMat& a = c.a[static_cast<std::size_t>(hd)];
                const auto cols = Eigen::seqN(hd * dh, dh);
                const RowMat s = (c.q(Eigen::all, cols) * c.k(Eigen::all, cols).transpose()) * scale;
                for (Eigen::Index i = 0; i < L; ++i) {
                    const double mx = s.row(i).head(i + 1).maxCoeff();
                    a.row(i).head(i + 1) = (s.row(i).head(i + 1).array() - mx).exp().matrix();
                    a.row(i).head(i + 1) /= a.row(i).head(i + 1).sum();
                }
                c.o(Eigen::all, cols) = a * c.v(Eigen::all, cols);
            }
            c.x1 = x;
            c.x1.noalias() += c.o * detail::view(w, bl.wo);
            c.hpre = c.x1 * detail::view(w, bl.w1);
            c.hpre.rowwise() += detail::view(w, bl.b1).row(0);
            c.h = c.hpre.unaryExpr([](double v) { return detail::gelu(v); });
            x = c.x1;
            x.noalias() += c.h * detail::view(w, bl.w2);
            x.rowwise() += detail::view(w, bl.b2).row(0);
        }
        x_final_ = x;
        logp_ = x * detail::view(w, layout_.out_w);
        logp_.rowwise() += detail::view(w, layout_.out_b).row(0);
        detail::log_softmax_rows(logp_);
    }

    const ModelParams* params_;
    ParamLayout layout_;
    TokenSeq input_;
    TokenSeq targets_;
    std::vector<BlockCache> cache_;
    RowMat x_final_;
    RowMat logp_;
};

// Token-at-a-time decoding with cached keys and values. Produces the same
// distributions as ForwardPass on the same prefix.
class IncrementalDecoder {
public:
    explicit IncrementalDecoder(const ModelParams& params) : params_(&params), layout_(params.layout()) {
        const Eigen::Index C = params.shape.context_window;
        const Eigen::Index d = params.shape.d_model;
        keys_.assign(layout_.blocks.size(), RowMat(C, d));
        values_.assign(layout_.blocks.size(), RowMat(C, d));
    }

    int length() const noexcept { return static_cast<int>(n_); }

    // Feeds one token and returns the log-distribution of the next token.
    const RowVec& push(TokenId token) {
        const auto& w = params_->weights;
        if (n_ >= params_->shape.context_window) {
            throw ContextOverflowError("decoding past context window " + std::to_string(params_->shape.context_window));
        }
        if (token.value >= static_cast<std::uint32_t>(params_->shape.vocab_size)) {
            throw VocabularyError("out-of-vocabulary token id " + std::to_string(token.value));
        }
        const Eigen::Index H = params_->shape.n_heads;
        const Eigen::Index dh = params_->shape.d_model / H;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        RowVec x = detail::view(w, layout_.tok_emb).row(token.value) + detail::view(w, layout_.pos_emb).row(n_);
        for (std::size_t b = 0; b < layout_.blocks.size(); ++b) {
            const BlockLayout& bl = layout_.blocks[b];
            const RowVec q = x * detail::view(w, bl.wq);
            keys_[b].row(n_) = x * detail::view(w, bl.wk);
            values_[b].row(n_) = x * detail::view(w, bl.wv);
            RowVec o(H * dh);
            for (Eigen::Index hd = 0; hd < H; ++hd) {
                const auto cols = Eigen::seqN(hd * dh, dh);
                RowVec s = (q(cols) * keys_[b].topRows(n_ + 1)(Eigen::all, cols).transpose()) * scale;
                s = (s.array() - s.maxCoeff()).exp().matrix();
                s /= s.sum();
                o(cols) = s * values_[b].topRows(n_ + 1)(Eigen::all, cols);
            }
            RowVec x1 = x + o * detail::view(w, bl.wo);
            RowVec h = x1 * detail::view(w, bl.w1) + detail::view(w, bl.b1).row(0);
            h = h.unaryExpr([](double v) { return detail::gelu(v); });
            x = x1 + h * detail::view(w, bl.w2) + detail::view(w, bl.b2).row(0);
        }
        logp_ = x * detail::view(w, layout_.out_w) + detail::view(w, layout_.out_b).row(0);
        const double mx = logp_.maxCoeff();
        const double lse = mx + std::log((logp_.array() - mx).exp().sum());
        logp_.array() -= lse;
        ++n_;
        return logp_;
    }

private:
    const ModelParams* params_;
    ParamLayout layout_;
    std::vector<RowMat> keys_;
    std::vector<RowMat> values_;
    Eigen::Index n_ = 0;
    RowVec logp_;
};

// Which positions of the modeled sequence (control, prompt, response)
// contribute to a likelihood.
enum class LossSpan : std::uint8_t { response, full };

// The model input and targets for modeling `control ++ x ++ y`.
struct SequenceLayout {
    TokenSeq input;
    TokenSeq targets;
    std::size_t response_start = 0;  // first target index belonging to y
};

inline SequenceLayout layout_sequence(const ModelParams& p, TokenSpan control, TokenSpan x, TokenSpan y) {
    SequenceLayout s;
    s.targets.reserve(control.size() + x.size() + y.size());
    s.targets.insert(s.targets.end(), control.begin(), control.end());
    s.targets.insert(s.targets.end(), x.begin(), x.end());
    s.response_start = s.targets.size();
    s.targets.insert(s.targets.end(), y.begin(), y.end());
    if (!s.targets.empty()) {
        s.input.push_back(p.bos());
        s.input.insert(s.input.end(), s.targets.begin(), s.targets.end() - 1);
    }
    return s;
}

// Exact log P(y | x, control) under the model. Zero for empty y.
inline double logprob(const ModelParams& p, TokenSpan x, TokenSpan control, TokenSpan y) {
    check_tokens(p, x);
    check_tokens(p, control);
    check_tokens(p, y);
    if (y.empty()) return 0.0;
    const SequenceLayout s = layout_sequence(p, control, x, y);
    const ForwardPass fp(p, s.input, s.targets);
    double total = 0.0;
    for (std::size_t t = s.response_start; t < s.targets.size(); ++t) total += fp.target_logprob(static_cast<Eigen::Index>(t));
    return total;
}

// Negative log-likelihood of one sequence restricted to `span`, scaled by
// `weight`, with its gradient accumulated into `grad` (when non-null).
// Returns the unscaled NLL.
inline double sequence_nll(const ModelParams& p, TokenSpan control, TokenSpan x, TokenSpan y, LossSpan span,
                           double weight, std::vector<double>* grad) {
    const SequenceLayout s = layout_sequence(p, control, x, y);
    if (s.targets.empty()) return 0.0;
    const std::size_t first = span == LossSpan::response ? s.response_start : 0;
    if (first == s.targets.size()) return 0.0;
    const ForwardPass fp(p, s.input, s.targets);
    double nll = 0.0;
    std::vector<double> coef(s.targets.size(), 0.0);
    for (std::size_t t = first; t < s.targets.size(); ++t) {
        nll -= fp.target_logprob(static_cast<Eigen::Index>(t));
        coef[t] = weight;
    }
    if (grad != nullptr && weight != 0.0) fp.backward(coef, *grad);
    return nll;
}

}  // namespace ctrlgen
