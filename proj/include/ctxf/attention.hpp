#pragma once

#include <vector>

#include "ctxf/tensor.hpp"

namespace ctxf {

// Per-head projections. No biases: the attention equations carry none.
struct MhaParams {
    std::vector<Tensor> wq, wk, wv;  // one [d_att x d_k] matrix per head
    Tensor wo;                       // [d_att x d_att]

    int heads() const { return static_cast<int>(wq.size()); }
    int head_dim() const { return wq.empty() ? 0 : wq[0].cols(); }
};

// Per-layer 2->1 channel mix over (previous-utterance scores, current raw
// scores); the three scalars are shared across heads and positions.
struct CtxMix {
    Tensor w_prev, w_cur, bias;  // each [1]
};

// Cached pre-softmax attention scores of one utterance: the post-residual
// new_scores each encoder layer produced, stored as constants for reuse by
// the next utterance in the conversation.
struct ScoreState {
    int layer_count = 0;
    int head_count = 0;
    int utterance_length = 0;
    std::vector<std::vector<Tensor>> layer_scores;  // [layer][head], each [T x T]
};

// QK^T / sqrt(d_k), pre-softmax.
Tensor scaled_scores(const Tensor& q, const Tensor& k);

// softmax over rows of `scores`, then weighted sum of v rows. Every attention
// variant below funnels through this kernel, which is what makes the
// degeneracy chain (ctx -> res -> plain) bit-exact.
Tensor attend(const Tensor& scores, const Tensor& v);

Tensor attn(const Tensor& q, const Tensor& k, const Tensor& v);

struct AttnResult {
    Tensor output;
    Tensor scores;  // pre-softmax; what the next layer receives as prev
};

// Residual attention: softmax(QK^T/sqrt(d_k) + prev) V. prev may be null for
// the first layer.
AttnResult res_attn(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* prev);

// Element-wise mix realizing the cross-utterance linear layer:
// w_prev * s_prev + w_cur * s_cur + bias.
Tensor prev_ls(const Tensor& s_prev_resampled, const Tensor& s_cur, const CtxMix& mix);

// Context-aware residual attention:
// softmax(QK^T/sqrt(d_k) + prev + alpha * prev_ls_term) V. With alpha == 0
// the term is skipped entirely, reducing to res_attn on the same code path.
AttnResult ctx_res_attn(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* prev,
                        const Tensor* prev_ls_term, double alpha);

// Bilinear resampling of a square score matrix over normalized [0,1]^2
// coordinates. Equal sizes return the input unchanged; constants are
// preserved exactly (nested-lerp form). Value-only: operates on cached
// constants, never on the live graph.
Tensor resample_scores(const Tensor& s_prev, int t_cur);
std::vector<Tensor> resample_scores(const std::vector<Tensor>& heads, int t_cur);

struct MhaOutput {
    Tensor output;
    std::vector<Tensor> scores;  // per head, pre-softmax, exactly what softmax consumed
};

// Multi-headed attention with optional additive mask (0 / -1e30 entries).
MhaOutput mha(const Tensor& x_q, const Tensor& x_k, const Tensor& x_v, const MhaParams& p,
              const Tensor* mask = nullptr);

// Encoder-side block: per-head residual score chaining plus the optional
// cross-utterance term. prev/ctx, when present, hold one matrix per head.
MhaOutput ctx_res_mha(const Tensor& x_q, const Tensor& x_k, const Tensor& x_v,
                      const MhaParams& p, const std::vector<Tensor>* prev,
                      const std::vector<Tensor>* ctx_resampled, const CtxMix* mix, double alpha,
                      const Tensor* mask = nullptr);

}  // namespace ctxf
