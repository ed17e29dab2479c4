#include "ctxf/pipeline.hpp"

#include <algorithm>

#include "ctxf/errors.hpp"

namespace ctxf {

namespace {

std::vector<int> nonempty_or_sos(std::vector<int> tokens) {
    if (tokens.empty()) {
        tokens.push_back(kSosId);
    }
    return tokens;
}

}  // namespace

ForwardArtifacts utterance_forward(const Model& m, const Conversation& conv, int utt_idx,
                                   const std::vector<int>& dec_history_refs, int enc_ctx_ref,
                                   BootstrapMode bootstrap, bool want_traces, Rng* dropout_rng) {
    const Utterance& u = conv.utterances.at(static_cast<std::size_t>(utt_idx));
    ForwardArtifacts art;

    // Cross-utterance score state: the previous utterance's features are
    // re-encoded statelessly with current parameters, no backpropagation.
    ScoreState prev_state;
    bool has_prev_state = false;
    if (m.cfg.ctx_res_attn && enc_ctx_ref >= 0) {
        NoTapeScope no_grad;
        prev_state = encode_utterance(
                         m, conv.utterances.at(static_cast<std::size_t>(enc_ctx_ref)).features,
                         nullptr)
                         .score_state;
        has_prev_state = true;
    }

    EncoderOutput enc =
        encode_utterance(m, u.features, has_prev_state ? &prev_state : nullptr,
                         want_traces ? &art.enc_trace : nullptr, dropout_rng);

    ContextMemory memory;
    bool has_memory = false;
    if (m.cfg.dec_context_n >= 1) {
        std::vector<std::vector<int>> history;
        std::vector<std::string> ids;
        for (int r : dec_history_refs) {
            const Utterance& h = conv.utterances.at(static_cast<std::size_t>(r));
            history.push_back(nonempty_or_sos(h.transcript));
            ids.push_back(h.utterance_id);
        }
        if (history.empty()) {
            history = bootstrap_history(u, m.cfg.dec_context_n, bootstrap);
            ids.assign(history.size(), u.utterance_id + "#bootstrap");
        }
        memory = context_fold(history, m, &ids);
        has_memory = true;
    }

    std::vector<int> targets_in{kSosId};
    targets_in.insert(targets_in.end(), u.transcript.begin(), u.transcript.end());
    art.labels = u.transcript;
    art.labels.push_back(kEosId);
    art.logits = decode_forward(targets_in, has_memory ? &memory : nullptr, enc, m,
                                want_traces ? &art.dec_trace : nullptr, dropout_rng);
    return art;
}

EvalResult evaluate_teacher_forced(const Model& m, const Dataset& ds, double label_smoothing) {
    const HistoryIndex index = HistoryIndex::build(ds, std::max(m.cfg.dec_context_n, 1));
    EvalResult result;
    std::vector<std::vector<std::vector<int>>> predictions;
    double loss_sum = 0.0;
    long long utterances = 0;

    for (int c = 0; c < static_cast<int>(ds.conversations.size()); ++c) {
        const Conversation& conv = ds.conversations[static_cast<std::size_t>(c)];
        std::vector<std::vector<int>> conv_predictions;
        for (int uidx = 0; uidx < static_cast<int>(conv.utterances.size()); ++uidx) {
            const Utterance& u = conv.utterances[static_cast<std::size_t>(uidx)];
            const auto enc_refs = select_history(u, conv, 1, m.cfg.policy);
            const int enc_ctx =
                enc_refs.empty()
                    ? -1
                    : static_cast<int>(enc_refs.front() - conv.utterances.data());
            ForwardArtifacts art = utterance_forward(
                m, conv, uidx, index.refs(c, uidx, m.cfg.policy), enc_ctx,
                BootstrapMode::decode_single_pass);
            loss_sum += cross_entropy_rows(art.logits, art.labels, label_smoothing).item();
            ++utterances;

            std::vector<int> argmax;
            for (int t = 0; t < static_cast<int>(u.transcript.size()); ++t) {
                int best = 0;
                for (int v = 1; v < m.cfg.vocab; ++v) {
                    if (art.logits.at(t, v) > art.logits.at(t, best)) best = v;
                }
                argmax.push_back(best);
            }
            conv_predictions.push_back(std::move(argmax));
        }
        predictions.push_back(std::move(conv_predictions));
    }

    result.loss = utterances > 0 ? loss_sum / static_cast<double>(utterances) : 0.0;
    result.report = score(predictions, ds, ScoreFraming::aligned);
    return result;
}

namespace {

std::vector<int> strip_eos(std::vector<int> tokens) {
    if (!tokens.empty() && tokens.back() == kEosId) {
        tokens.pop_back();
    }
    return tokens;
}

}  // namespace

std::vector<HypothesisRecord> decode_dataset(const Model& m, const Dataset& ds,
                                             const DecodeOptions& opts) {
    int max_len = opts.max_len;
    if (max_len <= 0) {
        int longest = 1;
        for (const Conversation& conv : ds.conversations) {
            for (const Utterance& u : conv.utterances) {
                longest = std::max(longest, static_cast<int>(u.transcript.size()));
            }
        }
        max_len = longest + 2;
    }

    std::vector<HypothesisRecord> records;
    for (const Conversation& conv : ds.conversations) {
        std::vector<std::vector<int>> hypothesis_transcripts(conv.utterances.size());
        for (int uidx = 0; uidx < static_cast<int>(conv.utterances.size()); ++uidx) {
            const Utterance& u = conv.utterances[static_cast<std::size_t>(uidx)];

            ScoreState prev_state;
            bool has_prev_state = false;
            if (m.cfg.ctx_res_attn) {
                const auto enc_refs = select_history(u, conv, 1, m.cfg.policy);
                if (!enc_refs.empty()) {
                    prev_state =
                        encode_utterance(m, enc_refs.front()->features, nullptr).score_state;
                    has_prev_state = true;
                }
            }
            EncoderOutput enc =
                encode_utterance(m, u.features, has_prev_state ? &prev_state : nullptr);

            Hypothesis hyp;
            if (m.cfg.dec_context_n >= 1) {
                std::vector<std::vector<int>> history;
                for (const Utterance* h : select_history(u, conv, m.cfg.dec_context_n,
                                                         m.cfg.policy)) {
                    const auto idx = static_cast<std::size_t>(h - conv.utterances.data());
                    history.push_back(nonempty_or_sos(hypothesis_transcripts[idx]));
                }
                if (!history.empty()) {
                    ContextMemory memory = context_fold(history, m);
                    hyp = beam_decode(enc, &memory, m, opts.beam, max_len);
                } else if (m.cfg.two_pass_first_utterance) {
                    // Pass 1 decodes on start-token history; pass 2 replaces it
                    // with the pass-1 hypothesis repeated n times.
                    ContextMemory sos_memory = context_fold(
                        std::vector<std::vector<int>>(
                            static_cast<std::size_t>(m.cfg.dec_context_n),
                            std::vector<int>{kSosId}),
                        m);
                    Hypothesis first_pass = beam_decode(enc, &sos_memory, m, opts.beam, max_len);
                    ContextMemory self_memory = context_fold(
                        std::vector<std::vector<int>>(
                            static_cast<std::size_t>(m.cfg.dec_context_n),
                            nonempty_or_sos(strip_eos(first_pass.tokens))),
                        m);
                    hyp = beam_decode(enc, &self_memory, m, opts.beam, max_len);
                } else {
                    ContextMemory sos_memory = context_fold(
                        std::vector<std::vector<int>>(
                            static_cast<std::size_t>(m.cfg.dec_context_n),
                            std::vector<int>{kSosId}),
                        m);
                    hyp = beam_decode(enc, &sos_memory, m, opts.beam, max_len);
                }
            } else {
                hyp = beam_decode(enc, nullptr, m, opts.beam, max_len);
            }

            hypothesis_transcripts[static_cast<std::size_t>(uidx)] = strip_eos(hyp.tokens);
            HypothesisRecord rec;
            rec.conversation_id = conv.id;
            rec.utterance_id = u.utterance_id;
            rec.utterance_index = uidx;
            rec.tokens = hypothesis_transcripts[static_cast<std::size_t>(uidx)];
            rec.log_prob = hyp.log_prob;
            rec.truncated = hyp.truncated;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

}  // namespace ctxf
