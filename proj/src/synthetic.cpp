#include "ctxf/synthetic.hpp"

#include <algorithm>

#include "ctxf/errors.hpp"
#include "ctxf/rng.hpp"

namespace ctxf {

void TaskSpec::validate() const {
    if (keywords < 2) {
        throw ConfigError("task.keywords must be >= 2");
    }
    if (keywords > vocab) {
        throw ConfigError("task.keywords (" + std::to_string(keywords) +
                          ") exceeds task.vocab (" + std::to_string(vocab) + ")");
    }
    if (first_filler_token() >= vocab) {
        throw ConfigError("task.vocab too small: needs SOS, EOS, " + std::to_string(keywords) +
                          " keywords and at least one filler token");
    }
    if (utterances_per_conversation < 2) {
        throw ConfigError("task.utterances_per_conversation must be >= 2");
    }
    if (min_len < 1 || max_len < min_len) {
        throw ConfigError("task length range invalid: [" + std::to_string(min_len) + "," +
                          std::to_string(max_len) + "]");
    }
    if (ambiguity_rate < 0.0 || ambiguity_rate >= 1.0) {
        throw ConfigError("task.ambiguity_rate must be in [0,1)");
    }
    if (noise_sigma < 0.0) {
        throw ConfigError("task.noise_sigma must be >= 0");
    }
    if (train_conversations < 0 || eval_conversations < 0) {
        throw ConfigError("conversation counts must be >= 0");
    }
}

namespace {

// fp32 round trip so the in-memory dataset is bit-identical to its file form.
double as_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Tensor render_features(const std::vector<int>& symbols, const TaskSpec& spec, Rng& rng) {
    const int frames = static_cast<int>(symbols.size()) * spec.frames_per_token();
    Tensor features = Tensor::zeros({frames, spec.feat_dim()});
    int row = 0;
    for (int symbol : symbols) {
        for (int f = 0; f < spec.frames_per_token(); ++f, ++row) {
            for (int d = 0; d < spec.feat_dim(); ++d) {
                const double base = d == symbol ? 1.0 : 0.0;
                features.at(row, d) =
                    as_f32(base + spec.noise_sigma * rng.normal());
            }
        }
    }
    return features;
}

Conversation generate_conversation(const TaskSpec& spec, std::uint64_t stream, int index,
                                   const Rng& root) {
    Rng rng = root.fork((stream << 32) ^ static_cast<std::uint64_t>(index));
    Conversation conv;
    conv.id = "conv" + std::to_string(stream) + "_" + std::to_string(index);
    const int keyword = spec.first_keyword_token() + rng.uniform_int(spec.keywords);
    const int filler_count = spec.vocab - spec.first_filler_token();

    for (int u = 0; u < spec.utterances_per_conversation; ++u) {
        Utterance utt;
        utt.conversation_id = conv.id;
        utt.utterance_id = conv.id + "_u" + std::to_string(u);
        utt.speaker_id = u % 2 == 0 ? "A" : "B";
        utt.time_index = u;
        const int len = spec.min_len + rng.uniform_int(spec.max_len - spec.min_len + 1);
        utt.transcript.resize(static_cast<std::size_t>(len));
        utt.ambiguous_mask.assign(static_cast<std::size_t>(len), 0);
        std::vector<int> symbols(static_cast<std::size_t>(len));

        // Cross-speaker mode puts every ambiguous position in speaker B's
        // first turn: its SI history is exactly the keyword statement while
        // its SD history is empty, so the policies separate cleanly. The
        // statement turn repeats the keyword at the ambiguity rate there,
        // keeping the copy signal comparably dense.
        const bool can_be_ambiguous =
            spec.cross_speaker_only ? u == 1 : u > 0;
        const bool repeat_statement = spec.cross_speaker_only && u == 0;
        const int keyword_pos = u == 0 ? rng.uniform_int(len) : -1;

        // Only the FIRST ambiguous position per utterance is scored: under
        // teacher forcing, every later one can read the keyword off the
        // already-resolved reference input, which would let a context-free
        // model beat the 1/k floor.
        bool scored_ambiguous = false;
        for (int pos = 0; pos < len; ++pos) {
            const auto ps = static_cast<std::size_t>(pos);
            if (pos == keyword_pos ||
                (repeat_statement && rng.uniform() < spec.ambiguity_rate)) {
                // The first utterance states the topic keyword observably.
                utt.transcript[ps] = keyword;
                symbols[ps] = keyword;
                continue;
            }
            if (can_be_ambiguous && rng.uniform() < spec.ambiguity_rate) {
                // Target is the keyword; the features only say "ambiguous".
                utt.transcript[ps] = keyword;
                if (!scored_ambiguous) {
                    utt.ambiguous_mask[ps] = 1;
                    scored_ambiguous = true;
                }
                symbols[ps] = spec.vocab;  // AMB symbol
                continue;
            }
            const int filler = spec.first_filler_token() + rng.uniform_int(filler_count);
            utt.transcript[ps] = filler;
            symbols[ps] = filler;
        }
        utt.features = render_features(symbols, spec, rng);
        conv.utterances.push_back(std::move(utt));
    }
    return conv;
}

}  // namespace

Dataset generate_conversations(const TaskSpec& spec, int count, std::uint64_t stream) {
    spec.validate();
    Dataset ds;
    ds.feat_dim = spec.feat_dim();
    ds.vocab = spec.vocab;
    ds.keywords = spec.keywords;
    const Rng root(spec.seed);
    ds.conversations.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        ds.conversations.push_back(generate_conversation(spec, stream, i, root));
    }
    return ds;
}

Dataset generate(const TaskSpec& spec) {
    return generate_conversations(spec, spec.train_conversations, 0);
}

Dataset generate_eval(const TaskSpec& spec) {
    return generate_conversations(spec, spec.eval_conversations, 1);
}

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<int> row(m + 1);
    for (std::size_t j = 0; j <= m; ++j) row[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        int diag = row[0];
        row[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            const int subst = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            diag = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, subst});
        }
    }
    return row[m];
}

ScoreReport score(const std::vector<std::vector<std::vector<int>>>& predictions,
                  const Dataset& ds, ScoreFraming framing) {
    if (predictions.size() != ds.conversations.size()) {
        throw ContractError("score: " + std::to_string(predictions.size()) +
                            " prediction conversations for " +
                            std::to_string(ds.conversations.size()) + " references");
    }
    ScoreReport report;
    long long token_hits = 0, token_total = 0;
    long long ambig_hits = 0, ambig_total = 0;
    long long edit_total = 0, ref_len_total = 0;

    for (std::size_t c = 0; c < ds.conversations.size(); ++c) {
        const Conversation& conv = ds.conversations[c];
        if (predictions[c].size() != conv.utterances.size()) {
            throw ContractError("score: conversation " + conv.id + " has " +
                                std::to_string(predictions[c].size()) + " predictions for " +
                                std::to_string(conv.utterances.size()) + " utterances");
        }
        long long c_token_hits = 0, c_token_total = 0;
        long long c_ambig_hits = 0, c_ambig_total = 0;
        long long c_edit = 0, c_ref_len = 0;
        for (std::size_t u = 0; u < conv.utterances.size(); ++u) {
            const Utterance& ref = conv.utterances[u];
            const std::vector<int>& hyp = predictions[c][u];
            c_edit += levenshtein(hyp, ref.transcript);
            c_ref_len += static_cast<long long>(ref.transcript.size());
            if (framing == ScoreFraming::aligned) {
                if (hyp.size() != ref.transcript.size()) {
                    throw ContractError("score: aligned framing requires equal lengths, got " +
                                        std::to_string(hyp.size()) + " vs " +
                                        std::to_string(ref.transcript.size()) + " in " +
                                        ref.utterance_id);
                }
                for (std::size_t p = 0; p < hyp.size(); ++p) {
                    const bool hit = hyp[p] == ref.transcript[p];
                    c_token_total++;
                    c_token_hits += hit;
                    if (!ref.ambiguous_mask.empty() && ref.ambiguous_mask[p]) {
                        c_ambig_total++;
                        c_ambig_hits += hit;
                    }
                }
            }
        }
        ConversationScore cs;
        cs.conversation_id = conv.id;
        cs.error_rate = c_ref_len > 0 ? static_cast<double>(c_edit) / c_ref_len : 0.0;
        if (framing == ScoreFraming::aligned) {
            if (c_token_total > 0) {
                cs.token_accuracy = static_cast<double>(c_token_hits) / c_token_total;
            }
            if (c_ambig_total > 0) {
                cs.ambiguous_accuracy = static_cast<double>(c_ambig_hits) / c_ambig_total;
            }
        }
        report.per_conversation.push_back(std::move(cs));
        token_hits += c_token_hits;
        token_total += c_token_total;
        ambig_hits += c_ambig_hits;
        ambig_total += c_ambig_total;
        edit_total += c_edit;
        ref_len_total += c_ref_len;
    }

    report.error_rate = ref_len_total > 0 ? static_cast<double>(edit_total) / ref_len_total : 0.0;
    if (framing == ScoreFraming::aligned) {
        if (token_total > 0) {
            report.token_accuracy = static_cast<double>(token_hits) / token_total;
        }
        if (ambig_total > 0) {
            report.ambiguous_accuracy = static_cast<double>(ambig_hits) / ambig_total;
        }
    }
    return report;
}

}  // namespace ctxf
