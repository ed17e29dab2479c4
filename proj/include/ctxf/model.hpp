#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ctxf/attention.hpp"
#include "ctxf/rng.hpp"
#include "ctxf/tensor.hpp"

namespace ctxf {

// Token conventions shared by the decoder, the synthetic task and the CLI.
inline constexpr int kSosId = 0;
inline constexpr int kEosId = 1;

enum class HistoryPolicy {
    speaker_independent,  // history from any speaker (SI)
    speaker_dependent,    // history from the same speaker only (SD)
};

std::string to_string(HistoryPolicy p);
HistoryPolicy history_policy_from_string(const std::string& s);

struct ModelConfig {
    int d_in = 21;  // feature dim; the synthetic task emits vocab+1 one-hot dims
    int d_att = 32;
    int heads = 2;
    int d_ff = 64;
    int enc_layers = 2;
    int dec_layers = 2;
    int vocab = 20;
    double alpha = 0.1;  // interpolation weight of the cross-utterance score term
    bool res_attn = false;
    bool ctx_res_attn = false;
    int dec_context_n = 0;  // 0 disables the conditional-decoder context memory
    bool ctx_first_layer_only = false;
    HistoryPolicy policy = HistoryPolicy::speaker_independent;
    double dropout = 0.0;
    bool two_pass_first_utterance = true;

    void validate() const;  // throws ConfigError
};

struct LnParams {
    Tensor gain, bias;  // each [d_att]
};

struct FfnParams {
    Tensor w1, b1, w2, b2;  // [d_att x d_ff], [d_ff], [d_ff x d_att], [d_att]
};

struct EncoderLayerParams {
    MhaParams attn;
    FfnParams ffn;
    LnParams ln_attn, ln_ffn;
    CtxMix mix;  // cross-utterance score mix for this layer
};

struct DecoderLayerParams {
    MhaParams self_attn, cross_attn;
    FfnParams ffn;
    LnParams ln_self, ln_cross, ln_ffn;
};

struct Model {
    ModelConfig cfg;

    Tensor input_proj_w, input_proj_b;  // [d_in x d_att], [d_att]
    std::vector<EncoderLayerParams> encoder_layers;

    Tensor embedding;    // [vocab x d_att]
    std::vector<DecoderLayerParams> decoder_layers;
    Tensor output_proj;  // [d_att x vocab]

    Tensor combine_w, combine_b;  // context fold: [2*d_att x d_att], [d_att]

    // Draws every parameter in a fixed order independent of the variant
    // flags, so two configs differing only in mechanism switches start from
    // identical weights under the same seed.
    static Model init(const ModelConfig& cfg, Rng& rng);

    // Stable name -> tensor enumeration; the checkpoint format, optimizer and
    // averaging all iterate this order.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> parameters() const;
    void zero_grad() const;
    std::size_t parameter_count() const;
};

}  // namespace ctxf
