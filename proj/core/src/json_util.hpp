#pragma once

#include <stdexcept>
#include <string>

#include "endo/model.hpp"
#include "json.hpp"

namespace endo::detail {

using nlohmann::json;

// Reads `key` into `out` when present. Callers then call reject_unknown.
template <typename V>
void read_opt(const json& j, const char* key, V& out) {
    auto it = j.find(key);
    if (it != j.end()) out = it->template get<V>();
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
    }
}

json to_json(const EncoderConfig& c);
json to_json(const DecoderConfig& c);
json to_json(const ModelConfig& c);
void from_json_checked(const json& j, EncoderConfig& c);
void from_json_checked(const json& j, DecoderConfig& c);
void from_json_checked(const json& j, ModelConfig& c);

}  // namespace endo::detail
