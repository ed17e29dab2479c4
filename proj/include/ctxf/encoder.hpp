#pragma once

#include <utility>
#include <vector>

#include "ctxf/model.hpp"

namespace ctxf {

struct EncoderOutput {
    Tensor hidden;          // [T x d_att]
    ScoreState score_state;  // post-residual pre-softmax scores, detached
};

// Live (graph-connected) copies of each layer's new_scores, for
// instrumentation and attention dumps.
struct EncoderTrace {
    std::vector<std::vector<Tensor>> layer_scores;  // [layer][head]
};

// Rows for positions first_pos .. first_pos+count-1 of the standard sinusoid.
// Negative positions are valid (used by the decoder's context prefix).
Tensor sinusoidal_positions(int first_pos, int count, int dim);

// ReLU(x W1 + b1) W2 + b2.
Tensor ffn(const Tensor& x, const FfnParams& p);

// One Post-LN encoder layer: y = LN(x' + FFN(x')), x' = LN(x + SelfAttn(x)),
// where the self-attention block carries the residual score chain and the
// cross-utterance term. Returns the layer's pre-softmax new_scores for
// chaining and caching.
std::pair<Tensor, std::vector<Tensor>> encoder_layer_forward(
    const Tensor& x, const EncoderLayerParams& p, const std::vector<Tensor>* prev_scores,
    const std::vector<Tensor>* ctx_scores, double alpha, double dropout_rate = 0.0,
    Rng* dropout_rng = nullptr);

// Full encoder pass over one utterance: input projection, sinusoidal
// positions, enc_layers blocks with intra-utterance score chaining and the
// cross-utterance score term fed from prev_state. The returned score cache
// belongs to THIS utterance and seeds the next one.
EncoderOutput encode_utterance(const Model& m, const Tensor& features,
                               const ScoreState* prev_state, EncoderTrace* trace = nullptr,
                               Rng* dropout_rng = nullptr);

}  // namespace ctxf
