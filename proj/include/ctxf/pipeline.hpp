#pragma once

#include <vector>

#include "ctxf/config.hpp"
#include "ctxf/conversation.hpp"
#include "ctxf/dataset_io.hpp"
#include "ctxf/decoder.hpp"
#include "ctxf/synthetic.hpp"

namespace ctxf {

struct ForwardArtifacts {
    Tensor logits;            // [T_tgt x V]
    std::vector<int> labels;  // transcript + EOS
    EncoderTrace enc_trace;
    DecoderTrace dec_trace;
};

// Teacher-forced forward of one utterance. dec_history_refs / enc_ctx_ref are
// utterance indices within the conversation (enc_ctx_ref -1 = none). The
// history encode for the cross-utterance score state runs without gradient
// recording; an empty decoder history falls back to the bootstrap rule.
ForwardArtifacts utterance_forward(const Model& m, const Conversation& conv, int utt_idx,
                                   const std::vector<int>& dec_history_refs, int enc_ctx_ref,
                                   BootstrapMode bootstrap, bool want_traces = false,
                                   Rng* dropout_rng = nullptr);

struct EvalResult {
    double loss = 0.0;  // mean per-utterance label-smoothed CE
    ScoreReport report;
};

// Greedy teacher-forced scoring with reference-transcript history. The
// empty-history bootstrap uses start tokens so reference labels never leak
// into the context being scored.
EvalResult evaluate_teacher_forced(const Model& m, const Dataset& ds, double label_smoothing);

// Sequential conversation decoding: hypothesis m feeds utterance m+1's
// history. First-utterance handling follows cfg.two_pass_first_utterance.
std::vector<HypothesisRecord> decode_dataset(const Model& m, const Dataset& ds,
                                             const DecodeOptions& opts);

}  // namespace ctxf
