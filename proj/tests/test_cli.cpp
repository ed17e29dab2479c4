#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kTool = CTXF_TOOL_PATH;

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "ctxf_cli_test";
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = kTool + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_tiny_config(const fs::path& path) {
    std::ofstream out(path);
    out << "task.train_conversations=16\n"
        << "task.eval_conversations=4\n"
        << "task.min_len=3\n"
        << "task.max_len=5\n"
        << "train.epochs=2\n"
        << "train.warmup_steps=10\n"
        << "model.d_att=16\n"
        << "model.d_ff=16\n"
        << "model.enc_layers=1\n"
        << "model.dec_layers=1\n"
        << "train.variant=dec_n2_ctx\n";
}

}  // namespace

TEST_CASE("cli pipeline: gen, train, decode, eval, dump, average") {
    const fs::path dir = work_dir();
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "tiny.cfg";
    write_tiny_config(cfg);
    const std::string base = "--config " + cfg.string();

    REQUIRE(run("gen " + base + " --out " + (dir / "data").string()) == 0);
    CHECK(fs::exists(dir / "data" / "train.jsonl"));
    CHECK(fs::exists(dir / "data" / "run.manifest"));

    REQUIRE(run("train " + base + " --data " + (dir / "data/train.jsonl").string() + " --val " +
                (dir / "data/eval.jsonl").string() + " --out " + (dir / "run").string()) == 0);
    CHECK(fs::exists(dir / "run" / "best.ckpt"));
    CHECK(fs::exists(dir / "run" / "train_log.jsonl"));

    // Identical decode invocations produce byte-identical hypothesis files.
    const std::string decode_args = "decode --checkpoint " + (dir / "run/best.ckpt").string() +
                                    " --data " + (dir / "data/eval.jsonl").string() + " --beam 1";
    REQUIRE(run(decode_args + " --out " + (dir / "dec_a").string()) == 0);
    REQUIRE(run(decode_args + " --out " + (dir / "dec_b").string()) == 0);
    CHECK(slurp(dir / "dec_a/hypotheses.jsonl") == slurp(dir / "dec_b/hypotheses.jsonl"));

    REQUIRE(run("eval --data " + (dir / "data/eval.jsonl").string() + " --hyp " +
                (dir / "dec_a/hypotheses.jsonl").string() + " --out " +
                (dir / "ev").string()) == 0);
    CHECK(fs::exists(dir / "ev" / "metrics.json"));

    REQUIRE(run("dump-attention --checkpoint " + (dir / "run/best.ckpt").string() + " --data " +
                (dir / "data/eval.jsonl").string() +
                " --conversation 0 --utterance 1 --which dec_self --layer 0 --head 0 --out " +
                (dir / "attn.grid").string()) == 0);
    CHECK(fs::exists(dir / "attn.grid"));
    CHECK(fs::exists(dir / "attn.grid.manifest"));

    REQUIRE(run("average --out " + (dir / "avg.ckpt").string() + " " +
                (dir / "run/best.ckpt").string() + " " + (dir / "run/best.ckpt").string()) == 0);
    CHECK(slurp(dir / "avg.ckpt") == slurp(dir / "run/best.ckpt"));
}

TEST_CASE("eval on references reports zero error rate") {
    const fs::path dir = work_dir() / "refeval";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "tiny.cfg";
    write_tiny_config(cfg);
    REQUIRE(run("gen --config " + cfg.string() + " --out " + (dir / "data").string()) == 0);

    // Build a hypotheses file from the reference transcripts themselves.
    std::ifstream in(dir / "data/eval.jsonl");
    std::ofstream out(dir / "refs.jsonl");
    std::string line;
    std::getline(in, line);  // meta
    while (std::getline(in, line)) {
        const auto id_pos = line.find("\"id\":\"");
        std::string conv_id = line.substr(id_pos + 6);
        conv_id = conv_id.substr(0, conv_id.find('"'));
        int index = 0;
        std::size_t search = 0;
        while ((search = line.find("\"tokens\":[", search)) != std::string::npos) {
            const auto end = line.find(']', search);
            const std::string tokens = line.substr(search + 9, end - search - 8);
            out << "{\"conversation\":\"" << conv_id << "\",\"utterance\":\"" << conv_id << "_u"
                << index << "\",\"index\":" << index << ",\"tokens\":" << tokens
                << ",\"log_prob\":0.0,\"truncated\":false}\n";
            search = end;
            ++index;
        }
    }
    out.close();
    REQUIRE(run("eval --data " + (dir / "data/eval.jsonl").string() + " --hyp " +
                (dir / "refs.jsonl").string() + " --framing aligned --out " +
                (dir / "ev").string()) == 0);
    const std::string metrics = slurp(dir / "ev/metrics.json");
    CHECK(metrics.find("\"error_rate\": 0.0") != std::string::npos);
    CHECK(metrics.find("\"token_accuracy\": 1.0") != std::string::npos);
}

TEST_CASE("gradcheck passes on a tiny config") {
    const fs::path dir = work_dir() / "gc";
    fs::create_directories(dir);
    const fs::path cfg = dir / "tiny.cfg";
    write_tiny_config(cfg);
    CHECK(run("gradcheck --config " + cfg.string()) == 0);
}

TEST_CASE("usage and config errors map to the documented exit codes") {
    const fs::path dir = work_dir() / "errs";
    fs::create_directories(dir);
    CHECK(run("--definitely-not-a-flag") == 2);
    CHECK(run("gen") == 2);  // missing required --out
    {
        std::ofstream out(dir / "bad.cfg");
        out << "no.such.key=1\n";
    }
    CHECK(run("gen --config " + (dir / "bad.cfg").string() + " --out " +
              (dir / "x").string()) == 3);
}

TEST_CASE("numeric failures exit with code 4") {
    const fs::path dir = work_dir() / "numfail";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "bomb.cfg";
    write_tiny_config(cfg);
    {
        std::ofstream out(cfg, std::ios::app);
        out << "train.lr_factor=1e156\ntrain.warmup_steps=1\n";
    }
    REQUIRE(run("gen --config " + cfg.string() + " --out " + (dir / "data").string()) == 0);
    CHECK(run("train --config " + cfg.string() + " --data " +
              (dir / "data/train.jsonl").string() + " --val " +
              (dir / "data/eval.jsonl").string() + " --out " + (dir / "run").string()) == 4);
}

TEST_CASE("CTXF_SEED is a seed fallback") {
    const fs::path dir = work_dir() / "envseed";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "tiny.cfg";
    write_tiny_config(cfg);
    const std::string gen = "gen --config " + cfg.string();

    setenv("CTXF_SEED", "7", 1);
    REQUIRE(run(gen + " --out " + (dir / "a").string()) == 0);
    unsetenv("CTXF_SEED");
    REQUIRE(run(gen + " --seed 7 --out " + (dir / "b").string()) == 0);
    REQUIRE(run(gen + " --out " + (dir / "c").string()) == 0);  // default seed 1
    CHECK(slurp(dir / "a/train.jsonl") == slurp(dir / "b/train.jsonl"));
    CHECK(slurp(dir / "a/train.jsonl") != slurp(dir / "c/train.jsonl"));
}
