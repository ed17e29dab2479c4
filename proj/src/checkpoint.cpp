#include "ctxf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "ctxf/errors.hpp"

namespace ctxf {

namespace {

constexpr char kMagic[4] = {'C', 'T', 'X', 'F'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_record(std::ofstream& out, const std::string& name, const Tensor& t) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) {
        write_u64(out, static_cast<std::uint64_t>(t.dim(i)));
    }
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ContractError("cannot write checkpoint " + path);
    }
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);

    // Reserved records first.
    std::vector<double> config_chars(ckpt.config_text.begin(), ckpt.config_text.end());
    if (config_chars.empty()) {
        config_chars.push_back(0.0);
    }
    const int config_len = static_cast<int>(config_chars.size());
    write_record(out, "__config__", Tensor::from_data({config_len}, std::move(config_chars)));
    write_record(out, "__epoch__", Tensor::scalar(static_cast<double>(ckpt.epoch)));
    write_record(out, "__rng_state__",
                 Tensor::from_data({2}, {static_cast<double>(ckpt.rng_state >> 32),
                                         static_cast<double>(ckpt.rng_state & 0xFFFFFFFFULL)}));
    for (const auto& [name, tensor] : ckpt.tensors) {
        write_record(out, name, tensor);
    }
    if (!out) {
        throw ContractError("short write while saving checkpoint " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ContractError("cannot open checkpoint " + path);
    }
    char magic[4] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ContractError(path + " is not a CTXF checkpoint");
    }
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw ContractError("checkpoint " + path + " has unsupported version " +
                            std::to_string(version));
    }
    Checkpoint ckpt;
    while (true) {
        std::uint32_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (!in) {
            break;  // clean EOF
        }
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(in);
        std::vector<int> shape;
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint64_t d = read_u64(in);
            shape.push_back(static_cast<int>(d));
            numel *= static_cast<std::size_t>(d);
        }
        std::vector<double> data(numel);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(double)));
        if (!in) {
            throw ContractError("checkpoint " + path + " is truncated in record '" + name + "'");
        }
        if (name == "__config__") {
            ckpt.config_text.clear();
            for (double c : data) {
                if (c != 0.0) ckpt.config_text.push_back(static_cast<char>(c));
            }
        } else if (name == "__epoch__") {
            ckpt.epoch = static_cast<int>(data.at(0));
        } else if (name == "__rng_state__") {
            ckpt.rng_state = (static_cast<std::uint64_t>(data.at(0)) << 32) |
                             static_cast<std::uint64_t>(data.at(1));
        } else {
            ckpt.tensors.emplace_back(name, Tensor::from_data(std::move(shape), std::move(data)));
        }
    }
    return ckpt;
}

Checkpoint checkpoint_from_model(const Model& m, const std::string& config_text, int epoch,
                                 std::uint64_t rng_state) {
    Checkpoint ckpt;
    ckpt.config_text = config_text;
    ckpt.epoch = epoch;
    ckpt.rng_state = rng_state;
    for (const auto& [name, tensor] : m.named_parameters()) {
        ckpt.tensors.emplace_back(name, tensor.detached_copy());
    }
    return ckpt;
}

void load_into_model(const Checkpoint& ckpt, Model& m) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, tensor] : ckpt.tensors) {
        by_name[name] = &tensor;
    }
    for (auto& [name, tensor] : m.named_parameters()) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw ContractError("checkpoint is missing parameter '" + name + "'");
        }
        if (it->second->shape() != tensor.shape()) {
            throw ContractError("checkpoint parameter '" + name + "' has shape " +
                                shape_str(*it->second) + ", model expects " + shape_str(tensor));
        }
        tensor.data() = it->second->data();
        by_name.erase(it);
    }
    if (!by_name.empty()) {
        throw ContractError("checkpoint has " + std::to_string(by_name.size()) +
                            " parameters unknown to the model, first: '" +
                            by_name.begin()->first + "'");
    }
}

}  // namespace ctxf
