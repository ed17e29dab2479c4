#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctxf/model.hpp"
#include "ctxf/synthetic.hpp"

namespace ctxf {

inline constexpr const char* kToolVersion = "0.1.0";

struct TrainConfig {
    int epochs = 10;
    int batch_size = 8;
    double lr_factor = 1.0;
    int warmup_steps = 200;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double adam_eps = 1e-9;
    double label_smoothing = 0.1;
    std::uint64_t seed = 1;
    std::string variant = "custom";
};

struct DecodeOptions {
    int beam = 1;
    int max_len = 0;  // 0: longest reference transcript + 2
};

struct ConfigEntry {
    const char* key;
    const char* default_value;
    const char* help;
};

// The authoritative key table: every key has a documented default; anything
// else in a config file is a hard error (reserved run.* manifest keys aside).
const std::vector<ConfigEntry>& config_schema();

class RunConfig {
  public:
    static RunConfig defaults();
    static RunConfig from_file(const std::string& path);  // defaults + file

    void apply_file(const std::string& path);
    void apply_text(const std::string& text, const std::string& origin = "<text>");
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;

    ModelConfig model_config() const;  // d_in/vocab may still be 0 (auto)
    TaskSpec task_spec() const;
    TrainConfig train_config() const;
    DecodeOptions decode_options() const;

    // key=value lines, sorted by key; parseable by apply_file.
    std::string serialize() const;

  private:
    std::map<std::string, std::string> values_;
};

// Fills auto (0) model dims from dataset metadata and validates agreement.
void resolve_model_against_dataset(ModelConfig& cfg, int feat_dim, int vocab);

// Writes the resolved model flags back into the key=value view (with
// train.variant=custom, since the variant is baked into the flags). This is
// what checkpoints snapshot.
void store_model_config(RunConfig& rc, const ModelConfig& cfg);

}  // namespace ctxf
