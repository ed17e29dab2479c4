#include "ctxf/dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ctxf/errors.hpp"
#include "ctxf/synthetic.hpp"

namespace ctxf {

using nlohmann::json;

namespace {

const char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
        if (i + 1 < bytes.size()) chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
        if (i + 2 < bytes.size()) chunk |= bytes[i + 2];
        out.push_back(kB64Alphabet[(chunk >> 18) & 0x3F]);
        out.push_back(kB64Alphabet[(chunk >> 12) & 0x3F]);
        out.push_back(i + 1 < bytes.size() ? kB64Alphabet[(chunk >> 6) & 0x3F] : '=');
        out.push_back(i + 2 < bytes.size() ? kB64Alphabet[chunk & 0x3F] : '=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) {
        throw ContractError("base64: length must be a multiple of 4");
    }
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4] = {0, 0, 0, 0};
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + static_cast<std::size_t>(j)];
            if (c == '=') {
                ++pad;
                continue;
            }
            vals[j] = b64_value(c);
            if (vals[j] < 0 || pad > 0) {
                throw ContractError("base64: invalid character '" + std::string(1, c) + "'");
            }
        }
        const std::uint32_t chunk = (static_cast<std::uint32_t>(vals[0]) << 18) |
                                    (static_cast<std::uint32_t>(vals[1]) << 12) |
                                    (static_cast<std::uint32_t>(vals[2]) << 6) |
                                    static_cast<std::uint32_t>(vals[3]);
        out.push_back(static_cast<std::uint8_t>((chunk >> 16) & 0xFF));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((chunk >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(chunk & 0xFF));
    }
    return out;
}

namespace {

std::string encode_features(const Tensor& features) {
    std::vector<std::uint8_t> bytes(features.numel() * sizeof(float));
    for (std::size_t i = 0; i < features.numel(); ++i) {
        const float f = static_cast<float>(features.data()[i]);
        std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
    }
    return base64_encode(bytes);
}

Tensor decode_features(const std::string& blob, int frames, int dim) {
    const std::vector<std::uint8_t> bytes = base64_decode(blob);
    const std::size_t expected =
        static_cast<std::size_t>(frames) * static_cast<std::size_t>(dim) * sizeof(float);
    if (bytes.size() != expected) {
        throw ContractError("feature blob has " + std::to_string(bytes.size()) +
                            " bytes, expected " + std::to_string(expected));
    }
    Tensor t = Tensor::zeros({frames, dim});
    for (std::size_t i = 0; i < t.numel(); ++i) {
        float f;
        std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
        t.data()[i] = static_cast<double>(f);
    }
    return t;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) {
        throw ContractError("cannot write dataset file " + path);
    }
    json meta;
    meta["meta"] = {{"feat_dim", ds.feat_dim}, {"vocab", ds.vocab}, {"keywords", ds.keywords}};
    out << meta.dump() << "\n";
    for (const Conversation& conv : ds.conversations) {
        json rec;
        rec["id"] = conv.id;
        json utts = json::array();
        for (const Utterance& u : conv.utterances) {
            json ju;
            ju["id"] = u.utterance_id;
            ju["speaker"] = u.speaker_id;
            ju["time"] = u.time_index;
            ju["tokens"] = u.transcript;
            ju["ambiguous"] = u.ambiguous_mask;
            ju["frames"] = u.features.rows();
            ju["features"] = encode_features(u.features);
            utts.push_back(std::move(ju));
        }
        rec["utterances"] = std::move(utts);
        out << rec.dump() << "\n";
    }
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ContractError("cannot open dataset file " + path);
    }
    Dataset ds;
    std::string line;
    bool meta_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        if (!meta_seen) {
            if (!rec.contains("meta")) {
                throw ContractError("dataset file " + path + " is missing the meta record");
            }
            ds.feat_dim = rec["meta"]["feat_dim"].get<int>();
            ds.vocab = rec["meta"]["vocab"].get<int>();
            ds.keywords = rec["meta"].value("keywords", 0);
            meta_seen = true;
            continue;
        }
        Conversation conv;
        conv.id = rec["id"].get<std::string>();
        for (const json& ju : rec["utterances"]) {
            Utterance u;
            u.conversation_id = conv.id;
            u.utterance_id = ju["id"].get<std::string>();
            u.speaker_id = ju["speaker"].get<std::string>();
            u.time_index = ju["time"].get<int>();
            u.transcript = ju["tokens"].get<std::vector<int>>();
            u.ambiguous_mask = ju["ambiguous"].get<std::vector<std::uint8_t>>();
            u.features =
                decode_features(ju["features"].get<std::string>(), ju["frames"].get<int>(),
                                ds.feat_dim);
            conv.utterances.push_back(std::move(u));
        }
        ds.conversations.push_back(std::move(conv));
    }
    if (!meta_seen) {
        throw ContractError("dataset file " + path + " is empty");
    }
    return ds;
}

void write_hypotheses(const std::string& path, const std::vector<HypothesisRecord>& records) {
    std::ofstream out(path);
    if (!out) {
        throw ContractError("cannot write hypotheses file " + path);
    }
    for (const HypothesisRecord& r : records) {
        json rec;
        rec["conversation"] = r.conversation_id;
        rec["utterance"] = r.utterance_id;
        rec["index"] = r.utterance_index;
        rec["tokens"] = r.tokens;
        rec["log_prob"] = r.log_prob;
        rec["truncated"] = r.truncated;
        out << rec.dump() << "\n";
    }
}

std::vector<HypothesisRecord> read_hypotheses(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ContractError("cannot open hypotheses file " + path);
    }
    std::vector<HypothesisRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        HypothesisRecord r;
        r.conversation_id = rec["conversation"].get<std::string>();
        r.utterance_id = rec["utterance"].get<std::string>();
        r.utterance_index = rec["index"].get<int>();
        r.tokens = rec["tokens"].get<std::vector<int>>();
        r.log_prob = rec["log_prob"].get<double>();
        r.truncated = rec["truncated"].get<bool>();
        records.push_back(std::move(r));
    }
    return records;
}

void write_attention_grid(const std::string& path, const AttentionGrid& grid) {
    std::ofstream out(path);
    if (!out) {
        throw ContractError("cannot write attention grid " + path);
    }
    out << "# which=" << grid.which << " layer=" << grid.layer << " head=" << grid.head
        << " rows=" << grid.scores.rows() << " cols=" << grid.scores.cols() << "\n";
    out.precision(17);
    for (int i = 0; i < grid.scores.rows(); ++i) {
        for (int j = 0; j < grid.scores.cols(); ++j) {
            out << (j ? " " : "") << grid.scores.at(i, j);
        }
        out << "\n";
    }
}

AttentionGrid read_attention_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ContractError("cannot open attention grid " + path);
    }
    std::string header;
    std::getline(in, header);
    AttentionGrid grid;
    int rows = 0, cols = 0;
    std::istringstream hs(header);
    std::string token;
    while (hs >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "which") grid.which = value;
        if (key == "layer") grid.layer = std::stoi(value);
        if (key == "head") grid.head = std::stoi(value);
        if (key == "rows") rows = std::stoi(value);
        if (key == "cols") cols = std::stoi(value);
    }
    if (rows < 1 || cols < 1) {
        throw ContractError("attention grid " + path + " has a malformed header: " + header);
    }
    grid.scores = Tensor::zeros({rows, cols});
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            if (!(in >> grid.scores.at(i, j))) {
                throw ContractError("attention grid " + path + " is truncated");
            }
        }
    }
    return grid;
}

void write_metrics(const std::string& path, const ScoreReport& report) {
    std::ofstream out(path);
    if (!out) {
        throw ContractError("cannot write metrics file " + path);
    }
    json rec;
    rec["error_rate"] = report.error_rate;
    if (report.token_accuracy) rec["token_accuracy"] = *report.token_accuracy;
    if (report.ambiguous_accuracy) rec["ambiguous_accuracy"] = *report.ambiguous_accuracy;
    json per = json::array();
    for (const ConversationScore& cs : report.per_conversation) {
        json jc;
        jc["conversation"] = cs.conversation_id;
        jc["error_rate"] = cs.error_rate;
        if (cs.token_accuracy) jc["token_accuracy"] = *cs.token_accuracy;
        if (cs.ambiguous_accuracy) jc["ambiguous_accuracy"] = *cs.ambiguous_accuracy;
        per.push_back(std::move(jc));
    }
    rec["per_conversation"] = std::move(per);
    out << rec.dump(2) << "\n";
}

void write_manifest(const std::string& path, const RunConfig& config,
                    const std::string& command, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    std::ofstream out(path);
    if (!out) {
        throw ContractError("cannot write manifest " + path);
    }
    out << "run.command=" << command << "\n";
    out << "run.tool_version=" << kToolVersion << "\n";
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        out << "run.input." << i << "=" << inputs[i] << "\n";
    }
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        out << "run.output." << i << "=" << outputs[i] << "\n";
    }
    out << config.serialize();
}

}  // namespace ctxf
