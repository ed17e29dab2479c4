#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctxf/checkpoint.hpp"
#include "ctxf/config.hpp"
#include "ctxf/dataset_io.hpp"
#include "ctxf/errors.hpp"
#include "ctxf/pipeline.hpp"
#include "ctxf/train.hpp"

namespace fs = std::filesystem;
using namespace ctxf;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string seed;  // unparsed; empty = not given
};

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = RunConfig::defaults();
    if (const char* env_seed = std::getenv("CTXF_SEED")) {
        cfg.set("seed", env_seed);
    }
    if (!args.config_path.empty()) {
        cfg.apply_file(args.config_path);
    }
    if (!args.seed.empty()) {
        cfg.set("seed", args.seed);
    }
    return cfg;
}

std::string command_line(int argc, char** argv) {
    std::ostringstream os;
    for (int i = 0; i < argc; ++i) {
        os << (i ? " " : "") << argv[i];
    }
    return os.str();
}

Model model_from_checkpoint_file(const std::string& path, Checkpoint& ckpt_out,
                                 RunConfig& cfg_out) {
    ckpt_out = load_checkpoint(path);
    cfg_out = RunConfig::defaults();
    cfg_out.apply_text(ckpt_out.config_text, path + "#config");
    ModelConfig mc = cfg_out.model_config();
    mc.validate();
    Rng rng(cfg_out.get_u64("seed"));
    Model model = Model::init(mc, rng);
    load_into_model(ckpt_out, model);
    return model;
}

int run_gen(const CommonArgs& common, const std::string& out_dir, const std::string& cmd) {
    RunConfig cfg = load_config(common);
    const TaskSpec spec = cfg.task_spec();
    fs::create_directories(out_dir);
    const std::string train_path = out_dir + "/train.jsonl";
    const std::string eval_path = out_dir + "/eval.jsonl";
    write_dataset(train_path, generate(spec));
    write_dataset(eval_path, generate_eval(spec));
    write_manifest(out_dir + "/run.manifest", cfg, cmd, {}, {train_path, eval_path});
    std::cout << "wrote " << train_path << " and " << eval_path << "\n";
    return 0;
}

int run_train(const CommonArgs& common, const std::string& data_path,
              const std::string& val_path, const std::string& out_dir,
              const std::string& variant, const std::string& cmd) {
    RunConfig cfg = load_config(common);
    if (!variant.empty()) {
        cfg.set("train.variant", variant);
    }
    const Dataset train_ds = read_dataset(data_path);
    const Dataset val_ds = read_dataset(val_path);

    ModelConfig mc = cfg.model_config();
    TrainConfig tc = cfg.train_config();
    apply_variant(tc.variant, mc);
    tc.variant = "custom";
    resolve_model_against_dataset(mc, train_ds.feat_dim, train_ds.vocab);
    store_model_config(cfg, mc);

    TrainResult result = train(mc, tc, train_ds, val_ds, cfg.serialize());

    fs::create_directories(out_dir);
    const std::string ckpt_path = out_dir + "/best.ckpt";
    const std::string log_path = out_dir + "/train_log.jsonl";
    save_checkpoint(ckpt_path, result.best);
    write_train_log(log_path, result.log);
    write_manifest(out_dir + "/run.manifest", cfg, cmd, {data_path, val_path},
                   {ckpt_path, log_path});
    if (result.log.empty()) {
        std::cout << "saved initialization checkpoint to " << ckpt_path << "\n";
    } else {
        std::cout << "best epoch " << result.best_epoch << " val_loss " << result.best_val_loss
                  << " ambiguous_accuracy "
                  << result.log[static_cast<std::size_t>(result.best_epoch - 1)]
                         .val_ambiguous_accuracy
                  << "\n";
    }
    return 0;
}

int run_decode(const CommonArgs& common, const std::string& ckpt_path,
               const std::string& data_path, const std::string& out_dir, int beam, int max_len,
               const std::string& cmd) {
    Checkpoint ckpt;
    RunConfig cfg;
    Model model = model_from_checkpoint_file(ckpt_path, ckpt, cfg);
    if (!common.seed.empty()) {
        cfg.set("seed", common.seed);
    }
    if (beam > 0) {
        cfg.set("decode.beam", std::to_string(beam));
    }
    if (max_len > 0) {
        cfg.set("decode.max_len", std::to_string(max_len));
    }
    const Dataset ds = read_dataset(data_path);
    resolve_model_against_dataset(model.cfg, ds.feat_dim, ds.vocab);

    const std::vector<HypothesisRecord> records =
        decode_dataset(model, ds, cfg.decode_options());
    fs::create_directories(out_dir);
    const std::string hyp_path = out_dir + "/hypotheses.jsonl";
    write_hypotheses(hyp_path, records);
    write_manifest(out_dir + "/run.manifest", cfg, cmd, {ckpt_path, data_path}, {hyp_path});
    std::cout << "wrote " << records.size() << " hypotheses to " << hyp_path << "\n";
    return 0;
}

int run_eval(const CommonArgs& common, const std::string& data_path, const std::string& hyp_path,
             const std::string& framing, const std::string& out_dir, const std::string& cmd) {
    RunConfig cfg = load_config(common);
    const Dataset ds = read_dataset(data_path);
    const std::vector<HypothesisRecord> records = read_hypotheses(hyp_path);

    // Rebuild the [conversation][utterance] prediction grid.
    std::vector<std::vector<std::vector<int>>> predictions(ds.conversations.size());
    for (std::size_t c = 0; c < ds.conversations.size(); ++c) {
        predictions[c].resize(ds.conversations[c].utterances.size());
    }
    for (const HypothesisRecord& rec : records) {
        bool placed = false;
        for (std::size_t c = 0; c < ds.conversations.size(); ++c) {
            if (ds.conversations[c].id != rec.conversation_id) {
                continue;
            }
            if (rec.utterance_index < 0 ||
                rec.utterance_index >= static_cast<int>(predictions[c].size())) {
                throw ContractError("hypothesis for " + rec.utterance_id +
                                    " has utterance index " +
                                    std::to_string(rec.utterance_index) + " out of range");
            }
            predictions[c][static_cast<std::size_t>(rec.utterance_index)] = rec.tokens;
            placed = true;
            break;
        }
        if (!placed) {
            throw ContractError("hypothesis references unknown conversation " +
                                rec.conversation_id);
        }
    }

    const ScoreFraming f = framing == "aligned" ? ScoreFraming::aligned
                                                : ScoreFraming::edit_distance;
    if (framing != "aligned" && framing != "edit") {
        throw ConfigError("--framing must be aligned or edit, got '" + framing + "'");
    }
    const ScoreReport report = score(predictions, ds, f);
    fs::create_directories(out_dir);
    const std::string metrics_path = out_dir + "/metrics.json";
    write_metrics(metrics_path, report);
    write_manifest(out_dir + "/run.manifest", cfg, cmd, {data_path, hyp_path}, {metrics_path});
    std::cout << "error_rate " << report.error_rate;
    if (report.token_accuracy) {
        std::cout << " token_accuracy " << *report.token_accuracy;
    }
    if (report.ambiguous_accuracy) {
        std::cout << " ambiguous_accuracy " << *report.ambiguous_accuracy;
    }
    std::cout << "\n";
    return 0;
}

int run_gradcheck(const CommonArgs& common) {
    RunConfig cfg = load_config(common);
    TaskSpec spec = cfg.task_spec();
    spec.train_conversations = 1;
    const Dataset ds = generate(spec);

    ModelConfig mc = cfg.model_config();
    TrainConfig tc = cfg.train_config();
    apply_variant(tc.variant, mc);
    resolve_model_against_dataset(mc, ds.feat_dim, ds.vocab);

    Rng rng(cfg.get_u64("seed"));
    Model model = Model::init(mc, rng);
    const Conversation& conv = ds.conversations.front();
    const int last = static_cast<int>(conv.utterances.size()) - 1;
    const HistoryIndex index = HistoryIndex::build(ds, std::max(mc.dec_context_n, 1));
    const Utterance& target = conv.utterances[static_cast<std::size_t>(last)];

    // The history score cache is a stop-gradient constant during training, so
    // the oracle's objective must hold it frozen too (otherwise the central
    // difference measures the total derivative the tape deliberately omits).
    ScoreState frozen_state;
    bool has_state = false;
    if (mc.ctx_res_attn && last > 0) {
        frozen_state = encode_utterance(
                           model, conv.utterances[static_cast<std::size_t>(last - 1)].features,
                           nullptr)
                           .score_state;
        has_state = true;
    }
    std::vector<std::vector<int>> history;
    for (int r : index.refs(0, last, mc.policy)) {
        history.push_back(conv.utterances[static_cast<std::size_t>(r)].transcript);
    }
    if (history.empty() && mc.dec_context_n >= 1) {
        history = bootstrap_history(target, mc.dec_context_n, BootstrapMode::training);
    }
    std::vector<int> targets_in{kSosId};
    targets_in.insert(targets_in.end(), target.transcript.begin(), target.transcript.end());
    std::vector<int> labels = target.transcript;
    labels.push_back(kEosId);

    // Scaled objective keeps structurally-zero coordinates (the score-mix
    // biases) below the oracle's clamped denominator; see finite_diff_check.
    auto forward = [&] {
        EncoderOutput enc =
            encode_utterance(model, target.features, has_state ? &frozen_state : nullptr);
        ContextMemory memory;
        bool has_memory = false;
        if (mc.dec_context_n >= 1 && !history.empty()) {
            memory = context_fold(history, model);
            has_memory = true;
        }
        Tensor logits = decode_forward(targets_in, has_memory ? &memory : nullptr, enc, model);
        return scale(cross_entropy_rows(logits, labels, tc.label_smoothing), 1e-5);
    };
    Tape tape;
    {
        TapeScope scope(tape);
        backward_all(forward(), tape);
    }
    std::vector<Tensor> params = model.parameters();
    const double err = finite_diff_check([&] { return forward().item(); }, params, 1e-6);
    std::cout << "max relative gradient error: " << err << " over "
              << model.parameter_count() << " parameters\n";
    return err < 1e-4 ? 0 : 4;
}

int run_ablate(const CommonArgs& common, const std::string& out_dir,
               const std::string& seeds_csv, const std::string& cmd) {
    RunConfig cfg = load_config(common);
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(seeds_csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) {
            seeds.push_back(std::stoull(token));
        }
    }
    if (seeds.empty()) {
        seeds.push_back(cfg.get_u64("seed"));
    }
    const std::vector<AblationRow> rows =
        run_ablation(cfg.task_spec(), cfg.model_config(), cfg.train_config(), seeds);
    fs::create_directories(out_dir);
    const std::string table_path = out_dir + "/ablation.csv";
    write_ablation_csv(table_path, rows);
    write_manifest(out_dir + "/run.manifest", cfg, cmd, {}, {table_path});
    std::cout << "wrote " << rows.size() << " rows to " << table_path << "\n";
    return 0;
}

int run_dump_attention(const std::string& ckpt_path, const std::string& data_path,
                       int conversation, int utterance, const std::string& which, int layer,
                       int head, const std::string& out_path, const std::string& cmd) {
    Checkpoint ckpt;
    RunConfig cfg;
    Model model = model_from_checkpoint_file(ckpt_path, ckpt, cfg);
    const Dataset ds = read_dataset(data_path);
    resolve_model_against_dataset(model.cfg, ds.feat_dim, ds.vocab);
    if (conversation < 0 || conversation >= static_cast<int>(ds.conversations.size())) {
        throw ConfigError("--conversation out of range");
    }
    const Conversation& conv = ds.conversations[static_cast<std::size_t>(conversation)];
    if (utterance < 0 || utterance >= static_cast<int>(conv.utterances.size())) {
        throw ConfigError("--utterance out of range");
    }
    const HistoryIndex index = HistoryIndex::build(ds, std::max(model.cfg.dec_context_n, 1));
    const auto enc_refs = select_history(conv.utterances[static_cast<std::size_t>(utterance)],
                                         conv, 1, model.cfg.policy);
    const int enc_ctx =
        enc_refs.empty() ? -1 : static_cast<int>(enc_refs.front() - conv.utterances.data());
    ForwardArtifacts art =
        utterance_forward(model, conv, utterance, index.refs(conversation, utterance,
                                                             model.cfg.policy),
                          enc_ctx, BootstrapMode::decode_single_pass, true);

    const std::vector<std::vector<Tensor>>* table = nullptr;
    if (which == "enc") {
        table = &art.enc_trace.layer_scores;
    } else if (which == "dec_self") {
        table = &art.dec_trace.self_scores;
    } else if (which == "dec_cross") {
        table = &art.dec_trace.cross_scores;
    } else {
        throw ConfigError("--which must be enc, dec_self or dec_cross, got '" + which + "'");
    }
    if (layer < 0 || layer >= static_cast<int>(table->size())) {
        throw ConfigError("--layer out of range for " + which);
    }
    const auto& heads = (*table)[static_cast<std::size_t>(layer)];
    if (head < 0 || head >= static_cast<int>(heads.size())) {
        throw ConfigError("--head out of range");
    }
    AttentionGrid grid{which, layer, head, heads[static_cast<std::size_t>(head)].detached_copy()};
    write_attention_grid(out_path, grid);
    write_manifest(out_path + ".manifest", cfg, cmd, {ckpt_path, data_path}, {out_path});
    std::cout << "wrote " << grid.scores.rows() << "x" << grid.scores.cols() << " grid to "
              << out_path << "\n";
    return 0;
}

int run_average(const std::vector<std::string>& inputs, const std::string& out_path,
                const std::string& cmd) {
    if (inputs.empty()) {
        throw ConfigError("average: at least one input checkpoint required");
    }
    std::vector<Checkpoint> ckpts;
    for (const std::string& path : inputs) {
        ckpts.push_back(load_checkpoint(path));
    }
    const Checkpoint averaged = average_checkpoints(ckpts);
    save_checkpoint(out_path, averaged);
    RunConfig cfg = RunConfig::defaults();
    cfg.apply_text(averaged.config_text, out_path + "#config");
    write_manifest(out_path + ".manifest", cfg, cmd, inputs, {out_path});
    std::cout << "averaged " << ckpts.size() << " checkpoints into " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctxf: conversational-context transformer workbench"};
    app.require_subcommand(1);

    CommonArgs common;
    app.add_option("--config", common.config_path, "key=value config file")
        ->expected(1);
    app.add_option("--seed", common.seed, "master seed (overrides config and CTXF_SEED)");

    std::string out_dir = "out";
    std::string data_path, val_path, hyp_path, ckpt_path, out_path;
    std::string variant, which = "dec_self", framing = "edit", seeds_csv;
    int beam = 0, max_len = 0, conversation = 0, utterance = 0, layer = 0, head = 0;
    std::vector<std::string> average_inputs;

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dialogue dataset");
    gen->add_option("--out", out_dir, "output directory")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--data", data_path, "training dataset")->required();
    train_cmd->add_option("--val", val_path, "validation dataset")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    train_cmd->add_option("--variant", variant, "variant preset override");

    CLI::App* decode = app.add_subcommand("decode", "beam-decode a dataset");
    decode->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    decode->add_option("--data", data_path, "dataset to decode")->required();
    decode->add_option("--out", out_dir, "output directory")->required();
    decode->add_option("--beam", beam, "beam width override");
    decode->add_option("--max-len", max_len, "decode length cap override");

    CLI::App* eval_cmd = app.add_subcommand("eval", "score hypotheses against references");
    eval_cmd->add_option("--data", data_path, "reference dataset")->required();
    eval_cmd->add_option("--hyp", hyp_path, "hypotheses file")->required();
    eval_cmd->add_option("--framing", framing, "aligned | edit");
    eval_cmd->add_option("--out", out_dir, "output directory")->required();

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient oracle");

    CLI::App* ablate = app.add_subcommand("ablate", "train every variant preset");
    ablate->add_option("--out", out_dir, "output directory")->required();
    ablate->add_option("--seeds", seeds_csv, "comma-separated seeds");

    CLI::App* dump = app.add_subcommand("dump-attention", "export attention scores as a grid");
    dump->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    dump->add_option("--data", data_path, "dataset")->required();
    dump->add_option("--conversation", conversation, "conversation index");
    dump->add_option("--utterance", utterance, "utterance index");
    dump->add_option("--which", which, "enc | dec_self | dec_cross");
    dump->add_option("--layer", layer, "layer index");
    dump->add_option("--head", head, "head index");
    dump->add_option("--out", out_path, "output grid file")->required();

    CLI::App* average = app.add_subcommand("average", "average parameter checkpoints");
    average->add_option("--out", out_path, "output checkpoint")->required();
    average->add_option("inputs", average_inputs, "input checkpoints")->required();

    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    const std::string cmd = command_line(argc, argv);
    try {
        if (gen->parsed()) return run_gen(common, out_dir, cmd);
        if (train_cmd->parsed())
            return run_train(common, data_path, val_path, out_dir, variant, cmd);
        if (decode->parsed())
            return run_decode(common, ckpt_path, data_path, out_dir, beam, max_len, cmd);
        if (eval_cmd->parsed())
            return run_eval(common, data_path, hyp_path, framing, out_dir, cmd);
        if (gradcheck->parsed()) return run_gradcheck(common);
        if (ablate->parsed()) return run_ablate(common, out_dir, seeds_csv, cmd);
        if (dump->parsed())
            return run_dump_attention(ckpt_path, data_path, conversation, utterance, which,
                                      layer, head, out_path, cmd);
        if (average->parsed()) return run_average(average_inputs, out_path, cmd);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
