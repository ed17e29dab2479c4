#include "ctxf/config.hpp"

#include <fstream>
#include <sstream>

#include "ctxf/errors.hpp"

namespace ctxf {

const std::vector<ConfigEntry>& config_schema() {
    static const std::vector<ConfigEntry> schema = {
        {"seed", "1", "master seed for generation, init, schedules and decoding"},
        {"model.d_in", "0", "input feature dim; 0 = take from the dataset"},
        {"model.d_att", "32", "attention width"},
        {"model.heads", "2", "attention heads (must divide model.d_att)"},
        {"model.d_ff", "64", "feed-forward inner width (>= model.d_att)"},
        {"model.enc_layers", "2", "encoder depth"},
        {"model.dec_layers", "2", "decoder depth"},
        {"model.vocab", "0", "output vocabulary; 0 = take from the dataset"},
        {"model.alpha", "0.1", "interpolation weight of the cross-utterance score term"},
        {"model.res_attn", "0", "chain pre-softmax scores across encoder layers"},
        {"model.ctx_res_attn", "0", "add the previous utterance's score term"},
        {"model.dec_context_n", "0", "previous transcripts folded into the decoder (0 = off)"},
        {"model.ctx_first_layer_only", "0", "apply the cross-utterance term at layer 0 only"},
        {"model.policy", "si", "history selection: si (any speaker) or sd (same speaker)"},
        {"model.dropout", "0.0", "dropout rate (0 keeps runs bit-reproducible)"},
        {"model.two_pass_first_utterance", "1",
         "decode the first utterance twice, feeding the first pass back as history"},
        {"task.vocab", "20", "synthetic vocabulary size (incl. SOS/EOS)"},
        {"task.keywords", "4", "topic keywords (k)"},
        {"task.utterances_per_conversation", "4", "turns per conversation"},
        {"task.min_len", "6", "minimum transcript length"},
        {"task.max_len", "12", "maximum transcript length"},
        {"task.ambiguity_rate", "0.3", "per-position probability of an ambiguous target (rho)"},
        {"task.noise_sigma", "0.1", "Gaussian noise on feature frames (sigma)"},
        {"task.train_conversations", "2000", "training conversations"},
        {"task.eval_conversations", "200", "held-out conversations"},
        {"task.cross_speaker_only", "0",
         "ambiguous positions only for the speaker who did not state the keyword"},
        {"train.epochs", "10", "training epochs"},
        {"train.batch_size", "8", "utterances per optimizer step"},
        {"train.lr_factor", "1.0", "inverse-square-root schedule scale"},
        {"train.warmup_steps", "200", "linear warmup steps"},
        {"train.beta1", "0.9", "first-moment decay"},
        {"train.beta2", "0.98", "second-moment decay"},
        {"train.adam_eps", "1e-9", "optimizer epsilon"},
        {"train.label_smoothing", "0.1", "cross-entropy smoothing epsilon"},
        {"train.variant", "custom",
         "baseline | dec_n1 | dec_n2 | dec_n2_res | dec_n2_ctx | res_attn | custom"},
        {"decode.beam", "1", "beam width"},
        {"decode.max_len", "0", "decode length cap; 0 = longest reference + 2"},
    };
    return schema;
}

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    for (const ConfigEntry& entry : config_schema()) {
        cfg.values_[entry.key] = entry.default_value;
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    RunConfig cfg = defaults();
    cfg.apply_file(path);
    return cfg;
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    apply_text(buffer.str(), path);
}

void RunConfig::apply_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        // trim
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            continue;
        }
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected key=value, got '" + line + "'");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto kend = key.find_last_not_of(" \t");
        key = key.substr(0, kend + 1);
        const auto vstart = value.find_first_not_of(" \t");
        value = vstart == std::string::npos ? "" : value.substr(vstart);
        if (key.rfind("run.", 0) == 0) {
            continue;  // reserved manifest keys; a manifest doubles as a config
        }
        set(key, value);
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (values_.find(key) == values_.end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    return it->second;
}

int RunConfig::get_int(const std::string& key) const {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(get(key), &pos);
        if (pos != get(key).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not an integer: '" + get(key) + "'");
    }
}

double RunConfig::get_double(const std::string& key) const {
    try {
        std::size_t pos = 0;
        const double v = std::stod(get(key), &pos);
        if (pos != get(key).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not a number: '" + get(key) + "'");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw ConfigError("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(get(key), &pos);
        if (pos != get(key).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not an unsigned integer: '" + get(key) +
                          "'");
    }
}

ModelConfig RunConfig::model_config() const {
    ModelConfig cfg;
    cfg.d_in = get_int("model.d_in");
    cfg.d_att = get_int("model.d_att");
    cfg.heads = get_int("model.heads");
    cfg.d_ff = get_int("model.d_ff");
    cfg.enc_layers = get_int("model.enc_layers");
    cfg.dec_layers = get_int("model.dec_layers");
    cfg.vocab = get_int("model.vocab");
    cfg.alpha = get_double("model.alpha");
    cfg.res_attn = get_bool("model.res_attn");
    cfg.ctx_res_attn = get_bool("model.ctx_res_attn");
    cfg.dec_context_n = get_int("model.dec_context_n");
    cfg.ctx_first_layer_only = get_bool("model.ctx_first_layer_only");
    cfg.policy = history_policy_from_string(get("model.policy"));
    cfg.dropout = get_double("model.dropout");
    cfg.two_pass_first_utterance = get_bool("model.two_pass_first_utterance");
    return cfg;
}

TaskSpec RunConfig::task_spec() const {
    TaskSpec spec;
    spec.vocab = get_int("task.vocab");
    spec.keywords = get_int("task.keywords");
    spec.utterances_per_conversation = get_int("task.utterances_per_conversation");
    spec.min_len = get_int("task.min_len");
    spec.max_len = get_int("task.max_len");
    spec.ambiguity_rate = get_double("task.ambiguity_rate");
    spec.noise_sigma = get_double("task.noise_sigma");
    spec.train_conversations = get_int("task.train_conversations");
    spec.eval_conversations = get_int("task.eval_conversations");
    spec.cross_speaker_only = get_bool("task.cross_speaker_only");
    spec.seed = get_u64("seed");
    return spec;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig cfg;
    cfg.epochs = get_int("train.epochs");
    cfg.batch_size = get_int("train.batch_size");
    cfg.lr_factor = get_double("train.lr_factor");
    cfg.warmup_steps = get_int("train.warmup_steps");
    cfg.beta1 = get_double("train.beta1");
    cfg.beta2 = get_double("train.beta2");
    cfg.adam_eps = get_double("train.adam_eps");
    cfg.label_smoothing = get_double("train.label_smoothing");
    cfg.seed = get_u64("seed");
    cfg.variant = get("train.variant");
    return cfg;
}

DecodeOptions RunConfig::decode_options() const {
    DecodeOptions opts;
    opts.beam = get_int("decode.beam");
    opts.max_len = get_int("decode.max_len");
    if (opts.beam < 1) {
        throw ConfigError("decode.beam must be >= 1");
    }
    return opts;
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    for (const auto& [key, value] : values_) {
        os << key << "=" << value << "\n";
    }
    return os.str();
}

void store_model_config(RunConfig& rc, const ModelConfig& cfg) {
    rc.set("model.d_in", std::to_string(cfg.d_in));
    rc.set("model.d_att", std::to_string(cfg.d_att));
    rc.set("model.heads", std::to_string(cfg.heads));
    rc.set("model.d_ff", std::to_string(cfg.d_ff));
    rc.set("model.enc_layers", std::to_string(cfg.enc_layers));
    rc.set("model.dec_layers", std::to_string(cfg.dec_layers));
    rc.set("model.vocab", std::to_string(cfg.vocab));
    std::ostringstream alpha;
    alpha.precision(17);
    alpha << cfg.alpha;
    rc.set("model.alpha", alpha.str());
    rc.set("model.res_attn", cfg.res_attn ? "1" : "0");
    rc.set("model.ctx_res_attn", cfg.ctx_res_attn ? "1" : "0");
    rc.set("model.dec_context_n", std::to_string(cfg.dec_context_n));
    rc.set("model.ctx_first_layer_only", cfg.ctx_first_layer_only ? "1" : "0");
    rc.set("model.policy", to_string(cfg.policy));
    std::ostringstream dropout;
    dropout.precision(17);
    dropout << cfg.dropout;
    rc.set("model.dropout", dropout.str());
    rc.set("model.two_pass_first_utterance", cfg.two_pass_first_utterance ? "1" : "0");
    rc.set("train.variant", "custom");
}

void resolve_model_against_dataset(ModelConfig& cfg, int feat_dim, int vocab) {
    if (cfg.d_in == 0) {
        cfg.d_in = feat_dim;
    } else if (cfg.d_in != feat_dim) {
        throw ConfigError("model.d_in=" + std::to_string(cfg.d_in) +
                          " does not match dataset feature dim " + std::to_string(feat_dim));
    }
    if (cfg.vocab == 0) {
        cfg.vocab = vocab;
    } else if (cfg.vocab != vocab) {
        throw ConfigError("model.vocab=" + std::to_string(cfg.vocab) +
                          " does not match dataset vocabulary " + std::to_string(vocab));
    }
    cfg.validate();
}

}  // namespace ctxf
