#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxf/config.hpp"
#include "ctxf/conversation.hpp"

namespace ctxf {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Line-delimited records: one meta line, then one conversation per line.
// Features travel as base64 fp32 little-endian blobs.
void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

struct HypothesisRecord {
    std::string conversation_id;
    std::string utterance_id;
    int utterance_index = 0;
    std::vector<int> tokens;  // without the terminating EOS
    double log_prob = 0.0;
    bool truncated = false;
};

void write_hypotheses(const std::string& path, const std::vector<HypothesisRecord>& records);
std::vector<HypothesisRecord> read_hypotheses(const std::string& path);

struct AttentionGrid {
    std::string which;  // enc | dec_self | dec_cross
    int layer = 0;
    int head = 0;
    Tensor scores;
};

// Plain-text grid: one header line (which, layer, head, shape), then
// space-separated rows with full double precision.
void write_attention_grid(const std::string& path, const AttentionGrid& grid);
AttentionGrid read_attention_grid(const std::string& path);

void write_metrics(const std::string& path, const struct ScoreReport& report);

// Key=value manifest reusing the config syntax; run.* keys are reserved and
// skipped when a manifest is fed back through --config.
void write_manifest(const std::string& path, const RunConfig& config,
                    const std::string& command, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs);

}  // namespace ctxf
