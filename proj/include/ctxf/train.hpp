#pragma once

#include <string>
#include <vector>

#include "ctxf/checkpoint.hpp"
#include "ctxf/config.hpp"
#include "ctxf/pipeline.hpp"

namespace ctxf {

// Variant presets mirroring the ablation rows: baseline, +dec_n1, +dec_n2,
// +dec_n2+res, +dec_n2+ctx, plus the standalone res_attn used by the
// convergence comparison. "custom" leaves the config untouched.
void apply_variant(const std::string& variant, ModelConfig& cfg);
const std::vector<std::string>& ablation_variants();

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_token_accuracy = 0.0;
    double val_ambiguous_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    Model model;  // carries the best-validation weights
    Checkpoint best;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

// Teacher-forced training with the shuffled, history-bound schedule.
// Deterministic given (config, seed). Throws NumericError on divergence.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const Dataset& train_ds, const Dataset& val_ds,
                  const std::string& config_text);

// Line-delimited JSON epoch records.
void write_train_log(const std::string& path, const std::vector<EpochLog>& log);

// Arithmetic mean of every parameter tensor; configs must match.
Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts);

struct AblationRow {
    std::string variant;
    std::uint64_t seed = 0;
    double token_accuracy = 0.0;
    double ambiguous_accuracy = 0.0;
    // First epoch whose validation loss reaches the baseline's final loss on
    // the same seed; -1 if never reached.
    int epochs_to_threshold = -1;
};

std::vector<AblationRow> run_ablation(const TaskSpec& task, const ModelConfig& base_model,
                                      const TrainConfig& base_train,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::vector<std::string>& variants =
                                          ablation_variants());

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

}  // namespace ctxf
