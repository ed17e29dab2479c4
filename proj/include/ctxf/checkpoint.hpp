#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctxf/model.hpp"

namespace ctxf {

// Portable binary container: magic "CTXF", version u32, then per-tensor
// records (name length u32 + name bytes, rank u32, dims u64, fp64
// little-endian payload). Config snapshot, epoch and RNG state ride along as
// reserved-name records so the format stays uniform.
struct Checkpoint {
    std::string config_text;  // resolved key=value snapshot
    int epoch = 0;
    std::uint64_t rng_state = 0;
    std::vector<std::pair<std::string, Tensor>> tensors;  // detached values
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_from_model(const Model& m, const std::string& config_text, int epoch,
                                 std::uint64_t rng_state);

// Copies values into an already-initialized model; names and shapes must
// match the model's registry exactly.
void load_into_model(const Checkpoint& ckpt, Model& m);

}  // namespace ctxf
