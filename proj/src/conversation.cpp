#include "ctxf/conversation.hpp"

#include <algorithm>

#include "ctxf/errors.hpp"
#include "ctxf/rng.hpp"

namespace ctxf {

std::vector<const Utterance*> select_history(const Utterance& u, const Conversation& conv, int n,
                                             HistoryPolicy policy) {
    if (n < 0) {
        throw ContractError("select_history: n must be >= 0");
    }
    bool found = false;
    for (const Utterance& other : conv.utterances) {
        if (other.time_index == u.time_index) {
            found = true;
            break;
        }
    }
    if (!found) {
        throw ContractError("select_history: utterance " + u.utterance_id +
                            " is not part of conversation " + conv.id);
    }
    std::vector<const Utterance*> earlier;
    for (const Utterance& other : conv.utterances) {
        if (other.time_index >= u.time_index) {
            continue;
        }
        if (policy == HistoryPolicy::speaker_dependent && other.speaker_id != u.speaker_id) {
            continue;
        }
        earlier.push_back(&other);
    }
    std::sort(earlier.begin(), earlier.end(),
              [](const Utterance* a, const Utterance* b) { return a->time_index < b->time_index; });
    if (static_cast<int>(earlier.size()) > n) {
        earlier.erase(earlier.begin(), earlier.end() - n);
    }
    return earlier;
}

std::vector<std::vector<int>> bootstrap_history(const Utterance& u, int n, BootstrapMode mode) {
    if (n < 1) {
        throw ContractError("bootstrap_history: n must be >= 1");
    }
    std::vector<int> entry;
    switch (mode) {
        case BootstrapMode::training:
            entry = u.transcript;
            break;
        case BootstrapMode::decode_single_pass:
            entry = {kSosId};
            break;
    }
    if (entry.empty()) {
        entry = {kSosId};  // empty reference transcript still needs a nonempty fold input
    }
    return std::vector<std::vector<int>>(static_cast<std::size_t>(n), entry);
}

HistoryIndex HistoryIndex::build(const Dataset& ds, int n) {
    HistoryIndex index;
    index.n = n;
    index.si.reserve(ds.conversations.size());
    index.sd.reserve(ds.conversations.size());
    for (const Conversation& conv : ds.conversations) {
        std::vector<std::vector<int>> conv_si, conv_sd;
        for (const Utterance& u : conv.utterances) {
            for (HistoryPolicy policy :
                 {HistoryPolicy::speaker_independent, HistoryPolicy::speaker_dependent}) {
                std::vector<int> refs;
                for (const Utterance* h : select_history(u, conv, n, policy)) {
                    refs.push_back(static_cast<int>(h - conv.utterances.data()));
                }
                (policy == HistoryPolicy::speaker_independent ? conv_si : conv_sd)
                    .push_back(std::move(refs));
            }
        }
        index.si.push_back(std::move(conv_si));
        index.sd.push_back(std::move(conv_sd));
    }
    return index;
}

const std::vector<int>& HistoryIndex::refs(int conversation, int utterance,
                                           HistoryPolicy policy) const {
    const auto& table = policy == HistoryPolicy::speaker_independent ? si : sd;
    return table[static_cast<std::size_t>(conversation)][static_cast<std::size_t>(utterance)];
}

std::vector<ScheduleItem> shuffle_schedule(const Dataset& ds, const HistoryIndex& index,
                                           HistoryPolicy policy, std::uint64_t seed) {
    std::vector<ScheduleItem> items;
    for (std::size_t c = 0; c < ds.conversations.size(); ++c) {
        const Conversation& conv = ds.conversations[c];
        for (std::size_t u = 0; u < conv.utterances.size(); ++u) {
            ScheduleItem item;
            item.conversation = static_cast<int>(c);
            item.utterance = static_cast<int>(u);
            item.decoder_history = index.refs(static_cast<int>(c), static_cast<int>(u), policy);
            // The encoder context is the single most recent utterance under the
            // same policy, independent of the decoder's n.
            const auto enc_refs = select_history(conv.utterances[u], conv, 1, policy);
            item.encoder_context =
                enc_refs.empty() ? -1
                                 : static_cast<int>(enc_refs.front() - conv.utterances.data());
            items.push_back(std::move(item));
        }
    }
    Rng rng(seed);
    rng.shuffle(items);
    return items;
}

}  // namespace ctxf
