#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace endo::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

template <typename V>
void read_opt(const json& j, const char* key, V& out) {
    if (auto it = j.find(key); it != j.end()) out = it->template get<V>();
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
    RunConfig cfg;
    try {
        const auto j = json::parse(json_text);
        // "run" is what effective_config.json records about the command; it is informational only.
        reject_unknown(j, {"run", "corpus", "tokenizer", "model", "stage1", "stage2", "generate"}, "config");
        if (j.contains("corpus")) cfg.corpus = corpus_config_from_json(j["corpus"].dump(), cfg.corpus);
        if (j.contains("tokenizer")) {
            const auto& t = j["tokenizer"];
            reject_unknown(t, {"vocab_size", "lexicon"}, "tokenizer");
            read_opt(t, "vocab_size", cfg.tokenizer.vocab_size);
            read_opt(t, "lexicon", cfg.tokenizer.lexicon);
            if (cfg.tokenizer.vocab_size < 259) throw ConfigError("tokenizer.vocab_size must be at least 259");
        }
        if (j.contains("model")) cfg.model = model_config_from_json(j["model"].dump());
        if (j.contains("stage1")) cfg.stage1 = stage_config_from_json(j["stage1"].dump(), cfg.stage1);
        if (j.contains("stage2")) cfg.stage2 = stage_config_from_json(j["stage2"].dump(), cfg.stage2);
        if (j.contains("generate")) {
            const auto& g = j["generate"];
            reject_unknown(g, {"max_len"}, "generate");
            read_opt(g, "max_len", cfg.generate.max_len);
            if (cfg.generate.max_len < 1) throw ConfigError("generate.max_len must be positive");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (cfg.stage1.stage != 1 || cfg.stage2.stage != 2) throw ConfigError("stage1/stage2 sections must keep their stage");
    return cfg;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path) {
    if (!path) return {};
    std::ifstream f(*path);
    if (!f) throw ConfigError("cannot read config file " + path->string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

std::string run_config_json(const RunConfig& cfg, std::string_view run_fields_json) {
    ordered_json j;
    j["run"] = ordered_json::parse(run_fields_json);
    j["corpus"] = ordered_json::parse(corpus_config_to_json(cfg.corpus));
    j["tokenizer"] = {{"vocab_size", cfg.tokenizer.vocab_size}, {"lexicon", cfg.tokenizer.lexicon}};
    j["model"] = ordered_json::parse(model_config_to_json(cfg.model));
    j["stage1"] = ordered_json::parse(stage_config_to_json(cfg.stage1));
    j["stage2"] = ordered_json::parse(stage_config_to_json(cfg.stage2));
    j["generate"] = {{"max_len", cfg.generate.max_len}};
    return j.dump(2) + "\n";
}

}  // namespace endo::cli
