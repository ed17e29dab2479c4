#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxf/model.hpp"
#include "ctxf/tensor.hpp"

namespace ctxf {

struct Utterance {
    std::string utterance_id;
    std::string conversation_id;
    std::string speaker_id;
    int time_index = 0;
    Tensor features;              // [T x d_in]
    std::vector<int> transcript;  // token ids, no SOS/EOS
    std::vector<std::uint8_t> ambiguous_mask;  // per transcript position; may be empty
};

struct Conversation {
    std::string id;
    std::vector<Utterance> utterances;  // ascending, unique time_index
};

struct Dataset {
    std::vector<Conversation> conversations;
    int feat_dim = 0;
    int vocab = 0;
    int keywords = 0;
};

// The last <= n utterances strictly before u by time_index, oldest first.
// SI admits any speaker, SD only u's own. Short lists near the conversation
// start are valid; the first utterance gets an empty list.
std::vector<const Utterance*> select_history(const Utterance& u, const Conversation& conv, int n,
                                             HistoryPolicy policy);

enum class BootstrapMode {
    training,            // repeat the utterance's own reference transcript
    decode_single_pass,  // start-token-only pseudo history
};

// Pseudo-history for an utterance whose policy selection came back empty.
std::vector<std::vector<int>> bootstrap_history(const Utterance& u, int n, BootstrapMode mode);

// Precomputed history references under both policies, so shuffled training
// visits carry time-correct context regardless of order.
struct HistoryIndex {
    int n = 0;
    // [conversation][utterance] -> utterance indices, oldest first
    std::vector<std::vector<std::vector<int>>> si;
    std::vector<std::vector<std::vector<int>>> sd;

    static HistoryIndex build(const Dataset& ds, int n);
    const std::vector<int>& refs(int conversation, int utterance, HistoryPolicy policy) const;
};

struct ScheduleItem {
    int conversation = 0;
    int utterance = 0;
    std::vector<int> decoder_history;  // utterance indices, oldest first
    int encoder_context = -1;          // single previous utterance, -1 if none
};

// Deterministic shuffled training order. Every item carries its precomputed
// bindings, so the multiset of (utterance, history) pairs equals the
// time-ordered enumeration's.
std::vector<ScheduleItem> shuffle_schedule(const Dataset& ds, const HistoryIndex& index,
                                           HistoryPolicy policy, std::uint64_t seed);

}  // namespace ctxf
