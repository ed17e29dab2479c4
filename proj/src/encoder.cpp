#include "ctxf/encoder.hpp"

#include <cmath>
#include <string>

#include "ctxf/errors.hpp"

namespace ctxf {

Tensor sinusoidal_positions(int first_pos, int count, int dim) {
    if (count < 1 || dim < 2) {
        throw ShapeError("sinusoidal_positions: count must be >= 1 and dim >= 2");
    }
    Tensor pe = Tensor::zeros({count, dim});
    for (int i = 0; i < count; ++i) {
        const double pos = first_pos + i;
        for (int j = 0; j < dim; j += 2) {
            const double rate = std::exp(-std::log(10000.0) * j / dim);
            pe.at(i, j) = std::sin(pos * rate);
            if (j + 1 < dim) {
                pe.at(i, j + 1) = std::cos(pos * rate);
            }
        }
    }
    return pe;
}

Tensor ffn(const Tensor& x, const FfnParams& p) {
    const Tensor inner = relu(add_row_bias(matmul(x, p.w1), p.b1));
    return add_row_bias(matmul(inner, p.w2), p.b2);
}

namespace {

Tensor maybe_dropout(const Tensor& x, double rate, Rng* rng) {
    if (rate > 0.0 && rng != nullptr) {
        return dropout(x, rate, *rng);
    }
    return x;
}

}  // namespace

std::pair<Tensor, std::vector<Tensor>> encoder_layer_forward(
    const Tensor& x, const EncoderLayerParams& p, const std::vector<Tensor>* prev_scores,
    const std::vector<Tensor>* ctx_scores, double alpha, double dropout_rate, Rng* dropout_rng) {
    MhaOutput att = ctx_res_mha(x, x, x, p.attn, prev_scores, ctx_scores, &p.mix, alpha);
    const Tensor after_attn =
        layer_norm(add(x, maybe_dropout(att.output, dropout_rate, dropout_rng)), p.ln_attn.gain,
                   p.ln_attn.bias);
    const Tensor after_ffn = layer_norm(
        add(after_attn, maybe_dropout(ffn(after_attn, p.ffn), dropout_rate, dropout_rng)),
        p.ln_ffn.gain, p.ln_ffn.bias);
    return {after_ffn, std::move(att.scores)};
}

EncoderOutput encode_utterance(const Model& m, const Tensor& features,
                               const ScoreState* prev_state, EncoderTrace* trace,
                               Rng* dropout_rng) {
    if (features.rank() != 2 || features.cols() != m.cfg.d_in) {
        throw ConfigError("encode_utterance: features " + shape_str(features) +
                          " do not match configured d_in=" + std::to_string(m.cfg.d_in));
    }
    const int t = features.rows();
    if (prev_state != nullptr) {
        if (prev_state->layer_count != m.cfg.enc_layers ||
            prev_state->head_count != m.cfg.heads) {
            throw ContractError("encode_utterance: cached score state has " +
                                std::to_string(prev_state->layer_count) + " layers / " +
                                std::to_string(prev_state->head_count) +
                                " heads, model expects " + std::to_string(m.cfg.enc_layers) +
                                " / " + std::to_string(m.cfg.heads));
        }
    }

    Tensor h = add(add_row_bias(matmul(features, m.input_proj_w), m.input_proj_b),
                   sinusoidal_positions(0, t, m.cfg.d_att));
    h = maybe_dropout(h, m.cfg.dropout, dropout_rng);

    std::vector<Tensor> chained_prev;
    EncoderOutput out;
    out.score_state.layer_count = m.cfg.enc_layers;
    out.score_state.head_count = m.cfg.heads;
    out.score_state.utterance_length = t;
    if (trace != nullptr) {
        trace->layer_scores.clear();
    }

    for (int l = 0; l < m.cfg.enc_layers; ++l) {
        const std::vector<Tensor>* prev_ptr =
            (m.cfg.res_attn && l > 0) ? &chained_prev : nullptr;

        std::vector<Tensor> ctx_resampled;
        const std::vector<Tensor>* ctx_ptr = nullptr;
        const bool layer_uses_ctx = m.cfg.ctx_res_attn && prev_state != nullptr &&
                                    (!m.cfg.ctx_first_layer_only || l == 0);
        if (layer_uses_ctx) {
            ctx_resampled =
                resample_scores(prev_state->layer_scores[static_cast<std::size_t>(l)], t);
            ctx_ptr = &ctx_resampled;
        }

        auto [y, new_scores] = encoder_layer_forward(
            h, m.encoder_layers[static_cast<std::size_t>(l)], prev_ptr, ctx_ptr, m.cfg.alpha,
            m.cfg.dropout, dropout_rng);
        h = y;
        if (trace != nullptr) {
            trace->layer_scores.push_back(new_scores);
        }
        std::vector<Tensor> cached;
        cached.reserve(new_scores.size());
        for (const Tensor& s : new_scores) {
            cached.push_back(s.detached_copy());
        }
        out.score_state.layer_scores.push_back(std::move(cached));
        chained_prev = std::move(new_scores);
    }

    out.hidden = h;
    return out;
}

}  // namespace ctxf
