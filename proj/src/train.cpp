#include "ctxf/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "ctxf/errors.hpp"

namespace ctxf {

void apply_variant(const std::string& variant, ModelConfig& cfg) {
    if (variant == "custom") {
        return;
    }
    cfg.res_attn = false;
    cfg.ctx_res_attn = false;
    cfg.dec_context_n = 0;
    if (variant == "baseline") {
        return;
    }
    if (variant == "dec_n1") {
        cfg.dec_context_n = 1;
        return;
    }
    if (variant == "dec_n2") {
        cfg.dec_context_n = 2;
        return;
    }
    if (variant == "dec_n2_res") {
        cfg.dec_context_n = 2;
        cfg.res_attn = true;
        return;
    }
    if (variant == "dec_n2_ctx") {
        cfg.dec_context_n = 2;
        cfg.res_attn = true;
        cfg.ctx_res_attn = true;
        return;
    }
    if (variant == "res_attn") {
        cfg.res_attn = true;
        return;
    }
    throw ConfigError("unknown variant '" + variant + "'");
}

const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> variants = {"baseline", "dec_n1", "dec_n2",
                                                      "dec_n2_res", "dec_n2_ctx"};
    return variants;
}

namespace {

// Adam with the inverse-square-root warmup schedule.
class Adam {
  public:
    Adam(std::vector<Tensor> params, const TrainConfig& cfg, int d_att)
        : params_(std::move(params)), cfg_(cfg), d_att_(d_att) {
        for (const Tensor& p : params_) {
            m_.emplace_back(p.numel(), 0.0);
            v_.emplace_back(p.numel(), 0.0);
        }
    }

    double learning_rate(long step) const {
        const double warmup = static_cast<double>(std::max(cfg_.warmup_steps, 1));
        return cfg_.lr_factor / std::sqrt(static_cast<double>(d_att_)) *
               std::min(1.0 / std::sqrt(static_cast<double>(step)),
                        static_cast<double>(step) / (warmup * std::sqrt(warmup)));
    }

    void step() {
        ++step_;
        const double lr = learning_rate(step_);
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t p = 0; p < params_.size(); ++p) {
            auto& data = params_[p].data();
            const auto& grad = params_[p].grad();
            auto& m = m_[p];
            auto& v = v_[p];
            for (std::size_t i = 0; i < data.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
                data[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.adam_eps);
            }
        }
    }

  private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    TrainConfig cfg_;
    int d_att_;
    long step_ = 0;
};

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const Dataset& train_ds, const Dataset& val_ds,
                  const std::string& config_text) {
    ModelConfig cfg = model_cfg;
    apply_variant(train_cfg.variant, cfg);
    cfg.validate();
    if (train_cfg.epochs < 0 || train_cfg.batch_size < 1) {
        throw ConfigError("train.epochs must be >= 0 and train.batch_size >= 1");
    }

    Rng master(train_cfg.seed);
    TrainResult result;
    result.model = Model::init(cfg, master);
    Model& model = result.model;

    result.best = checkpoint_from_model(model, config_text, 0, master.state());
    result.best_epoch = 0;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    if (train_cfg.epochs == 0) {
        return result;
    }

    const HistoryIndex index = HistoryIndex::build(train_ds, std::max(cfg.dec_context_n, 1));
    Adam optimizer(model.parameters(), train_cfg, cfg.d_att);

    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        std::vector<ScheduleItem> schedule = shuffle_schedule(
            train_ds, index, cfg.policy, master.fork(1000 + static_cast<std::uint64_t>(epoch)).state());

        // Group nearby items by transcript length; keeps step composition
        // deterministic while batching similar lengths together.
        const std::size_t window =
            static_cast<std::size_t>(train_cfg.batch_size) * 4;
        for (std::size_t start = 0; start < schedule.size(); start += window) {
            const auto end = std::min(schedule.size(), start + window);
            std::stable_sort(
                schedule.begin() + static_cast<std::ptrdiff_t>(start),
                schedule.begin() + static_cast<std::ptrdiff_t>(end),
                [&](const ScheduleItem& a, const ScheduleItem& b) {
                    return train_ds.conversations[static_cast<std::size_t>(a.conversation)]
                               .utterances[static_cast<std::size_t>(a.utterance)]
                               .transcript.size() <
                           train_ds.conversations[static_cast<std::size_t>(b.conversation)]
                               .utterances[static_cast<std::size_t>(b.utterance)]
                               .transcript.size();
                });
        }

        Rng dropout_rng = master.fork(2000 + static_cast<std::uint64_t>(epoch));
        Rng* dropout = cfg.dropout > 0.0 ? &dropout_rng : nullptr;

        double train_loss_sum = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < schedule.size();
             start += static_cast<std::size_t>(train_cfg.batch_size)) {
            const auto end = std::min(schedule.size(),
                                      start + static_cast<std::size_t>(train_cfg.batch_size));
            Tape tape;
            Tensor batch_loss;
            try {
                TapeScope scope(tape);
                Tensor sum;
                for (std::size_t i = start; i < end; ++i) {
                    const ScheduleItem& item = schedule[i];
                    const Conversation& conv =
                        train_ds.conversations[static_cast<std::size_t>(item.conversation)];
                    ForwardArtifacts art = utterance_forward(
                        model, conv, item.utterance, item.decoder_history, item.encoder_context,
                        BootstrapMode::training, false, dropout);
                    Tensor ce =
                        cross_entropy_rows(art.logits, art.labels, train_cfg.label_smoothing);
                    sum = sum.defined() ? add(sum, ce) : ce;
                }
                batch_loss = scale(sum, 1.0 / static_cast<double>(end - start));
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batches + 1) + ": " + e.what());
            }
            if (!std::isfinite(batch_loss.item())) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batches + 1) +
                                   ": loss=" + std::to_string(batch_loss.item()));
            }
            backward_all(batch_loss, tape);
            optimizer.step();
            model.zero_grad();
            train_loss_sum += batch_loss.item();
            ++batches;
        }

        EvalResult eval = evaluate_teacher_forced(model, val_ds, train_cfg.label_smoothing);
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = batches > 0 ? train_loss_sum / static_cast<double>(batches) : 0.0;
        entry.val_loss = eval.loss;
        entry.val_token_accuracy = eval.report.token_accuracy.value_or(0.0);
        entry.val_ambiguous_accuracy = eval.report.ambiguous_accuracy.value_or(0.0);
        result.log.push_back(entry);

        if (eval.loss < result.best_val_loss) {
            result.best_val_loss = eval.loss;
            result.best_epoch = epoch;
            result.best = checkpoint_from_model(model, config_text, epoch, master.state());
        }
    }

    load_into_model(result.best, model);
    return result;
}

void write_train_log(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) {
        throw ContractError("cannot write training log " + path);
    }
    for (const EpochLog& e : log) {
        nlohmann::json rec;
        rec["epoch"] = e.epoch;
        rec["train_loss"] = e.train_loss;
        rec["val_loss"] = e.val_loss;
        rec["val_token_accuracy"] = e.val_token_accuracy;
        rec["val_ambiguous_accuracy"] = e.val_ambiguous_accuracy;
        out << rec.dump() << "\n";
    }
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts) {
    if (ckpts.empty()) {
        throw ContractError("average_checkpoints: empty list");
    }
    Checkpoint out = ckpts.front();
    for (auto& [name, tensor] : out.tensors) {
        (void)name;
        tensor = tensor.detached_copy();
    }
    for (std::size_t k = 1; k < ckpts.size(); ++k) {
        const Checkpoint& c = ckpts[k];
        if (c.config_text != out.config_text) {
            throw ContractError("average_checkpoints: config mismatch between checkpoints");
        }
        if (c.tensors.size() != out.tensors.size()) {
            throw ContractError("average_checkpoints: parameter count mismatch");
        }
        for (std::size_t t = 0; t < out.tensors.size(); ++t) {
            if (c.tensors[t].first != out.tensors[t].first ||
                c.tensors[t].second.shape() != out.tensors[t].second.shape()) {
                throw ContractError("average_checkpoints: parameter '" + c.tensors[t].first +
                                    "' does not line up");
            }
            auto& acc = out.tensors[t].second.data();
            const auto& add = c.tensors[t].second.data();
            for (std::size_t i = 0; i < acc.size(); ++i) {
                acc[i] += add[i];
            }
        }
        out.epoch = std::max(out.epoch, c.epoch);
    }
    const double inv = 1.0 / static_cast<double>(ckpts.size());
    for (auto& [name, tensor] : out.tensors) {
        (void)name;
        for (double& v : tensor.data()) {
            v *= inv;
        }
    }
    return out;
}

std::vector<AblationRow> run_ablation(const TaskSpec& task, const ModelConfig& base_model,
                                      const TrainConfig& base_train,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::vector<std::string>& variants) {
    if (seeds.empty()) {
        throw ContractError("run_ablation: at least one seed required");
    }
    std::vector<AblationRow> rows;
    for (std::uint64_t seed : seeds) {
        TaskSpec seeded_task = task;
        seeded_task.seed = seed;
        const Dataset train_ds = generate(seeded_task);
        const Dataset val_ds = generate_eval(seeded_task);

        // The baseline's final validation loss defines this seed's threshold.
        double threshold = std::numeric_limits<double>::quiet_NaN();
        for (const std::string& variant : variants) {
            ModelConfig cfg = base_model;
            apply_variant(variant, cfg);
            resolve_model_against_dataset(cfg, train_ds.feat_dim, train_ds.vocab);
            TrainConfig tc = base_train;
            tc.seed = seed;
            tc.variant = "custom";  // flags already applied
            TrainResult res = train(cfg, tc, train_ds, val_ds, "");

            AblationRow row;
            row.variant = variant;
            row.seed = seed;
            if (!res.log.empty()) {
                const EpochLog& best = res.log.at(static_cast<std::size_t>(
                    std::max(res.best_epoch, 1) - 1));
                row.token_accuracy = best.val_token_accuracy;
                row.ambiguous_accuracy = best.val_ambiguous_accuracy;
                if (variant == "baseline") {
                    threshold = res.log.back().val_loss;
                }
                if (!std::isnan(threshold)) {
                    for (const EpochLog& e : res.log) {
                        if (e.val_loss <= threshold) {
                            row.epochs_to_threshold = e.epoch;
                            break;
                        }
                    }
                }
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream out(path);
    if (!out) {
        throw ContractError("cannot write ablation table " + path);
    }
    out << "variant,seed,token_accuracy,ambiguous_accuracy,epochs_to_threshold\n";
    out.precision(10);
    for (const AblationRow& row : rows) {
        out << row.variant << "," << row.seed << "," << row.token_accuracy << ","
            << row.ambiguous_accuracy << "," << row.epochs_to_threshold << "\n";
    }
}

}  // namespace ctxf
