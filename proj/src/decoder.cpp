#include "ctxf/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "ctxf/errors.hpp"

namespace ctxf {

namespace {

constexpr double kMaskedScore = -1e30;

Tensor maybe_dropout(const Tensor& x, double rate, Rng* rng) {
    if (rate > 0.0 && rng != nullptr) {
        return dropout(x, rate, *rng);
    }
    return x;
}

}  // namespace

Tensor ctx_prev_attn(const std::vector<int>& y_old, const std::vector<int>& y_new,
                     const Model& m) {
    if (y_old.empty() || y_new.empty()) {
        throw ContractError("ctx_prev_attn: transcripts must be nonempty");
    }
    const Tensor q = embedding_rows(m.embedding, y_old);
    const Tensor kv = embedding_rows(m.embedding, y_new);
    return attn(q, kv, kv);
}

namespace {

// Combine(A, B): one linear over A concatenated with the time-mean of B.
Tensor combine(const Tensor& a, const Tensor& b, const Model& m) {
    const Tensor pooled = broadcast_row(mean_rows(b), a.rows());
    return add_row_bias(matmul(concat_cols({a, pooled}), m.combine_w), m.combine_b);
}

}  // namespace

ContextMemory context_fold(const std::vector<std::vector<int>>& history, const Model& m,
                           const std::vector<std::string>* source_ids) {
    if (history.empty()) {
        throw ContractError("context_fold: empty history");
    }
    for (const auto& y : history) {
        if (y.empty()) {
            throw ContractError("context_fold: history transcripts must be nonempty");
        }
    }
    ContextMemory memory;
    if (source_ids != nullptr) {
        memory.source_utterance_ids = *source_ids;
    }
    if (history.size() == 1) {
        memory.vectors =
            combine(ctx_prev_attn(history[0], history[0], m),
                    embedding_rows(m.embedding, history[0]), m);
        return memory;
    }
    Tensor folded = combine(ctx_prev_attn(history[0], history[1], m),
                            embedding_rows(m.embedding, history[1]), m);
    for (std::size_t i = 2; i < history.size(); ++i) {
        const Tensor kv = embedding_rows(m.embedding, history[i]);
        folded = combine(attn(folded, kv, kv), kv, m);
    }
    memory.vectors = folded;
    return memory;
}

Tensor decode_forward(const std::vector<int>& targets_in, const ContextMemory* memory,
                      const EncoderOutput& enc, const Model& m, DecoderTrace* trace,
                      Rng* dropout_rng) {
    if (targets_in.empty() || targets_in.front() != kSosId) {
        throw ContractError("decode_forward: targets must begin with the start token");
    }
    const int t_tgt = static_cast<int>(targets_in.size());
    const int t_ctx = memory != nullptr ? memory->vectors.rows() : 0;
    const int t_total = t_ctx + t_tgt;

    Tensor embedded = embedding_rows(m.embedding, targets_in);
    Tensor h = memory != nullptr ? concat_rows({memory->vectors, embedded}) : embedded;
    // Prefix positions sit at -T_ctx..-1 so target positions stay comparable
    // with and without context.
    h = add(h, sinusoidal_positions(-t_ctx, t_total, m.cfg.d_att));
    h = maybe_dropout(h, m.cfg.dropout, dropout_rng);

    // Every position sees the whole prefix; target positions are causal.
    Tensor mask = Tensor::zeros({t_total, t_total});
    for (int i = 0; i < t_total; ++i) {
        for (int j = 0; j < t_total; ++j) {
            if (j >= t_ctx && j > i) {
                mask.at(i, j) = kMaskedScore;
            }
        }
    }

    if (trace != nullptr) {
        trace->self_scores.clear();
        trace->cross_scores.clear();
    }
    for (const DecoderLayerParams& layer : m.decoder_layers) {
        MhaOutput self = mha(h, h, h, layer.self_attn, &mask);
        h = layer_norm(add(h, maybe_dropout(self.output, m.cfg.dropout, dropout_rng)),
                       layer.ln_self.gain, layer.ln_self.bias);
        MhaOutput cross = mha(h, enc.hidden, enc.hidden, layer.cross_attn);
        h = layer_norm(add(h, maybe_dropout(cross.output, m.cfg.dropout, dropout_rng)),
                       layer.ln_cross.gain, layer.ln_cross.bias);
        h = layer_norm(
            add(h, maybe_dropout(ffn(h, layer.ffn), m.cfg.dropout, dropout_rng)),
            layer.ln_ffn.gain, layer.ln_ffn.bias);
        if (trace != nullptr) {
            trace->self_scores.push_back(std::move(self.scores));
            trace->cross_scores.push_back(std::move(cross.scores));
        }
    }

    const Tensor target_hidden = t_ctx > 0 ? slice_rows(h, t_ctx, t_total) : h;
    return matmul(target_hidden, m.output_proj);
}

namespace {

struct Beam {
    std::vector<int> tokens;
    double log_prob = 0.0;
};

// Ordering used for both pruning and final selection: higher score first,
// then lexicographically smaller sequence.
bool better_by(double score_a, const std::vector<int>& a, double score_b,
               const std::vector<int>& b) {
    if (score_a != score_b) {
        return score_a > score_b;
    }
    return a < b;
}

}  // namespace

Hypothesis beam_decode(const EncoderOutput& enc, const ContextMemory* memory, const Model& m,
                       int beam, int max_len) {
    if (beam < 1) {
        throw ContractError("beam_decode: beam width must be >= 1");
    }
    if (max_len < 1) {
        throw ContractError("beam_decode: max_len must be >= 1");
    }
    std::vector<Beam> live{{{}, 0.0}};
    std::vector<Hypothesis> finished;

    for (int step = 0; step < max_len && !live.empty(); ++step) {
        std::vector<Beam> candidates;
        candidates.reserve(live.size() * static_cast<std::size_t>(m.cfg.vocab));
        for (const Beam& b : live) {
            std::vector<int> input{kSosId};
            input.insert(input.end(), b.tokens.begin(), b.tokens.end());
            const Tensor logits = decode_forward(input, memory, enc, m);
            const Tensor logp = log_softmax_rows(slice_rows(logits, logits.rows() - 1, logits.rows()));
            for (int v = 0; v < m.cfg.vocab; ++v) {
                Beam next = b;
                next.tokens.push_back(v);
                next.log_prob += logp.at(0, v);
                candidates.push_back(std::move(next));
            }
        }
        std::sort(candidates.begin(), candidates.end(), [](const Beam& a, const Beam& b) {
            return better_by(a.log_prob, a.tokens, b.log_prob, b.tokens);
        });
        if (static_cast<int>(candidates.size()) > beam) {
            candidates.resize(static_cast<std::size_t>(beam));
        }
        live.clear();
        for (Beam& c : candidates) {
            if (c.tokens.back() == kEosId) {
                finished.push_back({std::move(c.tokens), c.log_prob, false});
            } else {
                live.push_back(std::move(c));
            }
        }
    }
    for (Beam& b : live) {
        finished.push_back({std::move(b.tokens), b.log_prob, true});
    }

    const Hypothesis* best = nullptr;
    for (const Hypothesis& h : finished) {
        if (best == nullptr ||
            better_by(h.normalized_score(), h.tokens, best->normalized_score(), best->tokens)) {
            best = &h;
        }
    }
    return *best;
}

}  // namespace ctxf
