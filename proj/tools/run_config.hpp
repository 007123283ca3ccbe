#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "endo/model.hpp"
#include "endo/synthetic.hpp"
#include "endo/training.hpp"

namespace endo::cli {

struct TokenizerSettings {
    int vocab_size = 512;
    bool lexicon = true;
};

struct GenerateSettings {
    int max_len = 127;
};

// Everything a config file may set. Absent sections keep their defaults; a
// "run" section (as echoed into effective_config.json) is ignored;
// unknown keys at any level are rejected.
struct RunConfig {
    CorpusConfig corpus;
    TokenizerSettings tokenizer;
    ModelConfig model;
    StageConfig stage1 = StageConfig::stage1_defaults();
    StageConfig stage2 = StageConfig::stage2_defaults();
    GenerateSettings generate;

    const StageConfig& stage(int s) const { return s == 1 ? stage1 : stage2; }
    StageConfig& stage(int s) { return s == 1 ? stage1 : stage2; }
};

// Thrown for malformed or unknown configuration; the CLI maps it to exit 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::optional<std::filesystem::path>& path);

// Stable, pretty-printed serialization with command-specific fields merged
// in at the top level under "run".
std::string run_config_json(const RunConfig& cfg, std::string_view run_fields_json = "{}");

}  // namespace endo::cli
