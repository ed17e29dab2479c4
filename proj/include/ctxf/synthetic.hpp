#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxf/conversation.hpp"

namespace ctxf {

// Synthetic conversational task. Each conversation draws one of k topic
// keywords; the first utterance states it feature-observably, later
// utterances contain "ambiguous" positions whose target IS the keyword while
// their feature frames encode only a keyword-independent AMB symbol plus
// noise. Cross-utterance context is therefore the only route to those
// targets.
struct TaskSpec {
    int vocab = 20;
    int keywords = 4;  // k
    int utterances_per_conversation = 4;
    int min_len = 6;
    int max_len = 12;
    double ambiguity_rate = 0.3;  // rho
    double noise_sigma = 0.1;     // sigma on feature frames
    int train_conversations = 2000;
    int eval_conversations = 200;
    // Keyword stated by speaker A, ambiguous positions only in speaker B's
    // utterances: speaker-dependent history can never see the statement.
    bool cross_speaker_only = false;
    std::uint64_t seed = 1;

    int feat_dim() const { return vocab + 1; }  // token symbols + the AMB symbol
    int frames_per_token() const { return 2; }
    int first_keyword_token() const { return 2; }         // after SOS/EOS
    int first_filler_token() const { return 2 + keywords; }
    void validate() const;
};

Dataset generate(const TaskSpec& spec);       // train split (stream 0)
Dataset generate_eval(const TaskSpec& spec);  // held-out split (stream 1)
Dataset generate_conversations(const TaskSpec& spec, int count, std::uint64_t stream);

int levenshtein(const std::vector<int>& a, const std::vector<int>& b);

enum class ScoreFraming {
    aligned,        // token classification: prediction lengths must match references
    edit_distance,  // beam-decoding outputs: error rate only
};

struct ConversationScore {
    std::string conversation_id;
    std::optional<double> token_accuracy;
    std::optional<double> ambiguous_accuracy;  // empty when no ambiguous positions
    double error_rate = 0.0;
};

struct ScoreReport {
    std::optional<double> token_accuracy;
    std::optional<double> ambiguous_accuracy;
    double error_rate = 0.0;  // sum(edit distance) / sum(reference length)
    std::vector<ConversationScore> per_conversation;
};

// predictions[conversation][utterance] -> predicted token sequence (no
// SOS/EOS). Shape must mirror the dataset.
ScoreReport score(const std::vector<std::vector<std::vector<int>>>& predictions,
                  const Dataset& ds, ScoreFraming framing);

}  // namespace ctxf
