#pragma once

#include <string>
#include <vector>

#include "ctxf/encoder.hpp"
#include "ctxf/model.hpp"

namespace ctxf {

// Contextual vectors folded from previous transcripts; prepended to the
// decoder input as a prefix. Length equals the oldest transcript used.
struct ContextMemory {
    Tensor vectors;  // [T_ctx x d_att]
    std::vector<std::string> source_utterance_ids;
};

struct DecoderTrace {
    std::vector<std::vector<Tensor>> self_scores;   // [layer][head], includes prefix columns
    std::vector<std::vector<Tensor>> cross_scores;  // [layer][head]
};

// Dot-product attention between two embedded transcripts: query = older,
// key/value = newer. Parameter-free besides the shared embedding.
Tensor ctx_prev_attn(const std::vector<int>& y_old, const std::vector<int>& y_new,
                     const Model& m);

// Recursive fold over history transcripts, oldest first. A single transcript
// self-folds; longer histories apply one Combine per newer transcript.
ContextMemory context_fold(const std::vector<std::vector<int>>& history_oldest_first,
                           const Model& m,
                           const std::vector<std::string>* source_ids = nullptr);

// Teacher-forced decoder pass. targets_in must begin with the start token;
// returns logits for the target positions only (the context prefix carries no
// loss). Self-attention sees all prefix positions and is causal over targets.
Tensor decode_forward(const std::vector<int>& targets_in, const ContextMemory* memory,
                      const EncoderOutput& enc, const Model& m, DecoderTrace* trace = nullptr,
                      Rng* dropout_rng = nullptr);

struct Hypothesis {
    std::vector<int> tokens;  // emitted tokens, EOS included when finished
    double log_prob = 0.0;
    bool truncated = false;  // max_len reached before EOS

    double normalized_score() const {
        return log_prob / static_cast<double>(tokens.empty() ? 1 : tokens.size());
    }
};

// Length-normalized beam search over decode_forward steps; beam == 1 is
// greedy. Ties break toward the lexicographically smaller token sequence.
Hypothesis beam_decode(const EncoderOutput& enc, const ContextMemory* memory, const Model& m,
                       int beam, int max_len);

}  // namespace ctxf
