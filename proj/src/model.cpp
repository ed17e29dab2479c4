#include "ctxf/model.hpp"

#include <cmath>

#include "ctxf/errors.hpp"

namespace ctxf {

std::string to_string(HistoryPolicy p) {
    return p == HistoryPolicy::speaker_independent ? "si" : "sd";
}

HistoryPolicy history_policy_from_string(const std::string& s) {
    if (s == "si") return HistoryPolicy::speaker_independent;
    if (s == "sd") return HistoryPolicy::speaker_dependent;
    throw ConfigError("unknown history policy '" + s + "' (expected si or sd)");
}

void ModelConfig::validate() const {
    if (d_in < 1) throw ConfigError("model.d_in must be >= 1");
    if (d_att < 2) throw ConfigError("model.d_att must be >= 2");
    if (heads < 1) throw ConfigError("model.heads must be >= 1");
    if (d_att % heads != 0) {
        throw ConfigError("model.d_att (" + std::to_string(d_att) +
                          ") must be divisible by model.heads (" + std::to_string(heads) + ")");
    }
    if (d_ff < d_att) {
        throw ConfigError("model.d_ff (" + std::to_string(d_ff) + ") must be >= model.d_att (" +
                          std::to_string(d_att) + ")");
    }
    if (enc_layers < 1 || dec_layers < 1) throw ConfigError("layer counts must be >= 1");
    if (vocab < 3) throw ConfigError("model.vocab must be >= 3 (SOS, EOS and one token)");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("model.alpha must be in [0,1]");
    if (dec_context_n < 0) throw ConfigError("model.dec_context_n must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model.dropout must be in [0,1)");
}

namespace {

Tensor xavier(int rows, int cols, Rng& rng) {
    const double stddev = std::sqrt(2.0 / (rows + cols));
    Tensor t = Tensor::zeros({rows, cols}, true);
    for (double& v : t.data()) v = rng.normal(0.0, stddev);
    return t;
}

Tensor zeros_param(std::vector<int> shape) { return Tensor::zeros(std::move(shape), true); }

Tensor ones_param(std::vector<int> shape) { return Tensor::full(std::move(shape), 1.0, true); }

MhaParams init_mha(int d_att, int heads, Rng& rng) {
    MhaParams p;
    const int d_k = d_att / heads;
    for (int h = 0; h < heads; ++h) {
        p.wq.push_back(xavier(d_att, d_k, rng));
        p.wk.push_back(xavier(d_att, d_k, rng));
        p.wv.push_back(xavier(d_att, d_k, rng));
    }
    p.wo = xavier(d_att, d_att, rng);
    return p;
}

FfnParams init_ffn(int d_att, int d_ff, Rng& rng) {
    return {xavier(d_att, d_ff, rng), zeros_param({d_ff}), xavier(d_ff, d_att, rng),
            zeros_param({d_att})};
}

LnParams init_ln(int d_att) { return {ones_param({d_att}), zeros_param({d_att})}; }

}  // namespace

Model Model::init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.input_proj_w = xavier(cfg.d_in, cfg.d_att, rng);
    m.input_proj_b = zeros_param({cfg.d_att});
    for (int l = 0; l < cfg.enc_layers; ++l) {
        EncoderLayerParams layer;
        layer.attn = init_mha(cfg.d_att, cfg.heads, rng);
        layer.ffn = init_ffn(cfg.d_att, cfg.d_ff, rng);
        layer.ln_attn = init_ln(cfg.d_att);
        layer.ln_ffn = init_ln(cfg.d_att);
        layer.mix = {Tensor::scalar(0.5, true), Tensor::scalar(0.5, true),
                     Tensor::scalar(0.0, true)};
        m.encoder_layers.push_back(std::move(layer));
    }
    m.embedding = xavier(cfg.vocab, cfg.d_att, rng);
    for (int l = 0; l < cfg.dec_layers; ++l) {
        DecoderLayerParams layer;
        layer.self_attn = init_mha(cfg.d_att, cfg.heads, rng);
        layer.cross_attn = init_mha(cfg.d_att, cfg.heads, rng);
        layer.ffn = init_ffn(cfg.d_att, cfg.d_ff, rng);
        layer.ln_self = init_ln(cfg.d_att);
        layer.ln_cross = init_ln(cfg.d_att);
        layer.ln_ffn = init_ln(cfg.d_att);
        m.decoder_layers.push_back(std::move(layer));
    }
    m.output_proj = xavier(cfg.d_att, cfg.vocab, rng);
    m.combine_w = xavier(2 * cfg.d_att, cfg.d_att, rng);
    m.combine_b = zeros_param({cfg.d_att});
    return m;
}

namespace {

void push_mha(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
              const MhaParams& p) {
    for (std::size_t h = 0; h < p.wq.size(); ++h) {
        out.emplace_back(prefix + ".wq." + std::to_string(h), p.wq[h]);
        out.emplace_back(prefix + ".wk." + std::to_string(h), p.wk[h]);
        out.emplace_back(prefix + ".wv." + std::to_string(h), p.wv[h]);
    }
    out.emplace_back(prefix + ".wo", p.wo);
}

void push_ffn(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
              const FfnParams& p) {
    out.emplace_back(prefix + ".w1", p.w1);
    out.emplace_back(prefix + ".b1", p.b1);
    out.emplace_back(prefix + ".w2", p.w2);
    out.emplace_back(prefix + ".b2", p.b2);
}

void push_ln(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             const LnParams& p) {
    out.emplace_back(prefix + ".gain", p.gain);
    out.emplace_back(prefix + ".bias", p.bias);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("input_proj.w", input_proj_w);
    out.emplace_back("input_proj.b", input_proj_b);
    for (std::size_t l = 0; l < encoder_layers.size(); ++l) {
        const std::string prefix = "enc." + std::to_string(l);
        const EncoderLayerParams& layer = encoder_layers[l];
        push_mha(out, prefix + ".attn", layer.attn);
        push_ffn(out, prefix + ".ffn", layer.ffn);
        push_ln(out, prefix + ".ln_attn", layer.ln_attn);
        push_ln(out, prefix + ".ln_ffn", layer.ln_ffn);
        out.emplace_back(prefix + ".mix.w_prev", layer.mix.w_prev);
        out.emplace_back(prefix + ".mix.w_cur", layer.mix.w_cur);
        out.emplace_back(prefix + ".mix.bias", layer.mix.bias);
    }
    out.emplace_back("embedding", embedding);
    for (std::size_t l = 0; l < decoder_layers.size(); ++l) {
        const std::string prefix = "dec." + std::to_string(l);
        const DecoderLayerParams& layer = decoder_layers[l];
        push_mha(out, prefix + ".self_attn", layer.self_attn);
        push_mha(out, prefix + ".cross_attn", layer.cross_attn);
        push_ffn(out, prefix + ".ffn", layer.ffn);
        push_ln(out, prefix + ".ln_self", layer.ln_self);
        push_ln(out, prefix + ".ln_cross", layer.ln_cross);
        push_ln(out, prefix + ".ln_ffn", layer.ln_ffn);
    }
    out.emplace_back("output_proj", output_proj);
    out.emplace_back("combine.w", combine_w);
    out.emplace_back("combine.b", combine_b);
    return out;
}

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) {
        (void)name;
        out.push_back(t);
    }
    return out;
}

void Model::zero_grad() const {
    for (const Tensor& t : parameters()) {
        t.zero_grad();
    }
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : parameters()) {
        n += t.numel();
    }
    return n;
}

}  // namespace ctxf
