#include "endo/storage.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "json_util.hpp"

namespace endo {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

using ojson = nlohmann::ordered_json;

std::string_view split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot move " + tmp.string() + " into place");
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------- manifests

std::string manifest_line(const ManifestRecord& r) {
    ojson j;
    j["record_id"] = r.record_id;
    j["patient_id"] = r.patient_id;
    j["procedure_id"] = r.procedure_id;
    j["stage"] = r.stage;
    j["split"] = std::string(split_name(r.split));
    j["images"] = r.image_paths;
    j["text"] = r.text;
    if (!r.boxes.empty()) {
        ojson boxes = ojson::array();
        for (const auto& b : r.boxes) {
            boxes.push_back(b ? ojson::array({b->x0, b->y0, b->x1, b->y1}) : ojson(nullptr));
        }
        j["boxes"] = std::move(boxes);
    }
    return j.dump();
}

ManifestRecord parse_manifest_line(std::string_view line, std::size_t line_no) {
    auto fail = [&](const std::string& why) -> ManifestError {
        return ManifestError("manifest line " + std::to_string(line_no) + ": " + why, line_no);
    };
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const std::exception& e) {
        throw fail(std::string("malformed JSON (") + e.what() + ")");
    }
    if (!j.is_object()) throw fail("expected an object");
    static const std::set<std::string> known = {"record_id", "patient_id", "procedure_id", "stage",
                                                "split",     "images",     "text",         "boxes"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw fail("unknown key '" + it.key() + "'");
    }
    ManifestRecord r;
    try {
        r.record_id = j.at("record_id").get<std::string>();
        r.patient_id = j.at("patient_id").get<std::string>();
        r.procedure_id = j.at("procedure_id").get<std::string>();
        r.stage = j.at("stage").get<int>();
        r.split = parse_split(j.at("split").get<std::string>());
        r.image_paths = j.at("images").get<std::vector<std::string>>();
        r.text = j.at("text").get<std::string>();
        if (j.contains("boxes")) {
            for (const auto& b : j.at("boxes")) {
                if (b.is_null()) {
                    r.boxes.emplace_back();
                } else {
                    const auto v = b.get<std::vector<int>>();
                    if (v.size() != 4) throw std::invalid_argument("box needs 4 coordinates");
                    r.boxes.emplace_back(PixelBox{v[0], v[1], v[2], v[3]});
                }
            }
        }
    } catch (const ManifestError&) {
        throw;
    } catch (const std::exception& e) {
        throw fail(e.what());
    }
    if (r.record_id.empty()) throw fail("empty record_id");
    if (r.stage != 1 && r.stage != 2) throw fail("stage must be 1 or 2");
    if (!r.boxes.empty() && r.boxes.size() != r.image_paths.size()) throw fail("boxes must match images");
    return r;
}

ManifestReport read_manifest(const std::filesystem::path& path, int stage, bool check_files, int max_images) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest " + path.string());
    ManifestReport rep;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    const auto base = path.parent_path();
    while (std::getline(f, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto r = parse_manifest_line(line, line_no);
        if (r.stage != stage) {
            throw ManifestError("manifest line " + std::to_string(line_no) + ": stage " + std::to_string(r.stage) +
                                    " record in a stage " + std::to_string(stage) + " manifest",
                                line_no);
        }
        if (!seen.insert(r.record_id).second) {
            throw ManifestError("manifest line " + std::to_string(line_no) + ": duplicate record_id '" +
                                    r.record_id + "'",
                                line_no);
        }
        if (stage == 1 && r.image_paths.size() != 1) {
            throw ManifestError("manifest line " + std::to_string(line_no) + ": stage 1 needs exactly one image",
                                line_no);
        }
        if (r.image_paths.empty()) {
            throw ManifestError("manifest line " + std::to_string(line_no) + ": no images", line_no);
        }
        if (stage == 2 && max_image_filter(r.image_paths.size(), max_images) == FilterDecision::drop) {
            ++rep.excluded;
            rep.excluded_ids.push_back(r.record_id);
            continue;
        }
        if (check_files) {
            for (const auto& p : r.image_paths) {
                std::ifstream img(base / p, std::ios::binary);
                if (!img) {
                    throw ManifestError("manifest line " + std::to_string(line_no) + ": unreadable image " + p,
                                        line_no);
                }
            }
        }
        rep.records.push_back(std::move(r));
    }
    if (line_no == 0 || (rep.records.empty() && rep.excluded == 0)) {
        throw std::runtime_error("manifest " + path.string() + " is empty");
    }
    return rep;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records) {
    std::string body;
    for (const auto& r : records) body += manifest_line(r) + "\n";
    write_file_atomic(path, body);
}

std::vector<SplitViolation> validate_splits(std::span<const ManifestRecord> records) {
    std::map<std::string, std::set<Split>> patients, procedures;
    for (const auto& r : records) {
        patients[r.patient_id].insert(r.split);
        procedures[r.procedure_id].insert(r.split);
    }
    std::vector<SplitViolation> out;
    auto collect = [&](const char* kind, const std::map<std::string, std::set<Split>>& m) {
        for (const auto& [id, splits] : m) {
            if (splits.size() > 1) out.push_back({kind, id, {splits.begin(), splits.end()}});
        }
    };
    collect("patient", patients);
    collect("procedure", procedures);
    return out;
}

// -------------------------------------------------------------- checkpoints

std::string_view checkpoint_errc_name(CheckpointErrc c) {
    switch (c) {
        case CheckpointErrc::bad_magic: return "bad magic";
        case CheckpointErrc::bad_version: return "bad version";
        case CheckpointErrc::truncated: return "truncated";
        case CheckpointErrc::checksum_mismatch: return "checksum mismatch";
        case CheckpointErrc::shape_mismatch: return "shape mismatch";
        case CheckpointErrc::tokenizer_mismatch: return "tokenizer mismatch";
        case CheckpointErrc::io: return "i/o error";
        case CheckpointErrc::format: return "format error";
    }
    return "?";
}

namespace {

constexpr std::size_t kPrefixBytes = 40;

template <typename U>
void put(std::vector<std::uint8_t>& out, std::size_t at, U v) {
    std::memcpy(out.data() + at, &v, sizeof v);
}

template <typename U>
U get(std::span<const std::uint8_t> in, std::size_t at) {
    U v;
    std::memcpy(&v, in.data() + at, sizeof v);
    return v;
}

template <typename T>
void append_tensor(ojson& table, std::vector<std::uint8_t>& payload, const std::string& name, const Tensor<T>& t) {
    const std::size_t nbytes = t.size() * sizeof(T);
    table.push_back({{"name", name},
                     {"dtype", std::string(dtype_name(dtype_of<T>::value))},
                     {"shape", t.shape()},
                     {"offset", payload.size()},
                     {"nbytes", nbytes}});
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
    payload.insert(payload.end(), p, p + nbytes);
}

ojson header_json(const CheckpointInfo& info) {
    ojson h;
    h["format"] = "endoreport-checkpoint";
    h["model"] = ojson::parse(model_config_to_json(info.model));
    h["tokenizer_hash"] = info.tokenizer_hash;
    h["stage"] = info.stage;
    h["progress"] = {{"epochs_done", info.progress.epochs_done},
                     {"updates_done", info.progress.updates_done},
                     {"best_epoch", info.progress.best_epoch},
                     {"best_val", info.progress.best_val}};
    h["stage_config"] = info.stage_config.empty() ? ojson(nullptr) : ojson::parse(info.stage_config);
    return h;
}

struct Parsed {
    ojson header;
    std::span<const std::uint8_t> payload;
};

Parsed split_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
        throw CheckpointError(CheckpointErrc::bad_magic, "not an endoreport checkpoint");
    }
    if (bytes.size() < kPrefixBytes) throw CheckpointError(CheckpointErrc::truncated, "file shorter than its prefix");
    const auto version = get<std::uint32_t>(bytes, 8);
    if (version != kCheckpointVersion) {
        throw CheckpointError(CheckpointErrc::bad_version, "version " + std::to_string(version) + " (expected " +
                                                               std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_bytes = get<std::uint64_t>(bytes, 16);
    const auto payload_bytes = get<std::uint64_t>(bytes, 24);
    const auto crc = get<std::uint32_t>(bytes, 32);
    if (header_bytes > bytes.size() || payload_bytes > bytes.size() ||
        kPrefixBytes + header_bytes + payload_bytes > bytes.size()) {
        throw CheckpointError(CheckpointErrc::truncated, "declares " + std::to_string(header_bytes + payload_bytes) +
                                                             " body bytes, file has " +
                                                             std::to_string(bytes.size() - kPrefixBytes));
    }
    const auto body = bytes.subspan(kPrefixBytes, header_bytes + payload_bytes);
    uLong actual = crc32(0L, Z_NULL, 0);
    actual = crc32(actual, body.data(), static_cast<uInt>(body.size()));
    if (static_cast<std::uint32_t>(actual) != crc) {
        throw CheckpointError(CheckpointErrc::checksum_mismatch, "stored crc32 does not match contents");
    }
    Parsed p;
    try {
        p.header = ojson::parse(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(header_bytes));
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointErrc::format, std::string("header: ") + e.what());
    }
    p.payload = body.subspan(header_bytes);
    return p;
}

CheckpointInfo info_from_header(const ojson& h) {
    CheckpointInfo info;
    try {
        info.model = model_config_from_json(h.at("model").dump());
        info.tokenizer_hash = h.at("tokenizer_hash").get<std::string>();
        info.stage = h.at("stage").get<int>();
        const auto& pr = h.at("progress");
        info.progress.epochs_done = pr.at("epochs_done").get<int>();
        info.progress.updates_done = pr.at("updates_done").get<long>();
        info.progress.best_epoch = pr.at("best_epoch").get<int>();
        info.progress.best_val = pr.at("best_val").get<double>();
        if (!h.at("stage_config").is_null()) info.stage_config = h.at("stage_config").dump();
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointErrc::format, std::string("header: ") + e.what());
    }
    return info;
}

template <typename T, typename S>
void copy_converted(const std::uint8_t* src, std::size_t n, Tensor<T>& dst) {
    if constexpr (std::is_same_v<T, S>) {
        std::memcpy(dst.data(), src, n * sizeof(T));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            S v;
            std::memcpy(&v, src + i * sizeof(S), sizeof(S));
            dst[i] = static_cast<T>(v);
        }
    }
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> checkpoint_bytes(const Model<T>& model, const CheckpointInfo& info, const AdamState<T>* adam) {
    model.check();
    ojson h = header_json(info);
    ojson table = ojson::array();
    std::vector<std::uint8_t> payload;
    for (const auto& [name, p] : model.params.entries()) append_tensor(table, payload, "param/" + name, p.value);
    if (adam && !adam->m.empty()) {
        for (const auto& [name, t] : adam->m) append_tensor(table, payload, "adam.m/" + name, t);
        for (const auto& [name, t] : adam->v) append_tensor(table, payload, "adam.v/" + name, t);
        h["optimizer"] = {{"step", adam->step}};
    } else {
        h["optimizer"] = nullptr;
    }
    h["tensors"] = std::move(table);
    const std::string header = h.dump();

    std::vector<std::uint8_t> out(kPrefixBytes + header.size() + payload.size(), 0);
    std::memcpy(out.data(), kCheckpointMagic, 8);
    put<std::uint32_t>(out, 8, kCheckpointVersion);
    put<std::uint32_t>(out, 12, adam && !adam->m.empty() ? 1u : 0u);
    put<std::uint64_t>(out, 16, header.size());
    put<std::uint64_t>(out, 24, payload.size());
    std::memcpy(out.data() + kPrefixBytes, header.data(), header.size());
    if (!payload.empty()) std::memcpy(out.data() + kPrefixBytes + header.size(), payload.data(), payload.size());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + kPrefixBytes, static_cast<uInt>(header.size() + payload.size()));
    put<std::uint32_t>(out, 32, static_cast<std::uint32_t>(crc));
    return out;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model, const CheckpointInfo& info,
                     const AdamState<T>* adam) {
    const auto bytes = checkpoint_bytes(model, info, adam);
    try {
        write_file_atomic(path, bytes);
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointErrc::io, e.what());
    }
}

template <typename T>
LoadedCheckpoint<T> parse_checkpoint(std::span<const std::uint8_t> bytes, const std::string* tokenizer_hash,
                                     const ModelConfig* expected) {
    const auto parsed = split_checkpoint(bytes);
    const auto& h = parsed.header;
    LoadedCheckpoint<T> out;
    out.info = info_from_header(h);
    if (tokenizer_hash && *tokenizer_hash != out.info.tokenizer_hash) {
        throw CheckpointError(CheckpointErrc::tokenizer_mismatch, "checkpoint was trained with tokenizer " +
                                                                      out.info.tokenizer_hash + ", got " +
                                                                      *tokenizer_hash);
    }
    out.model = Model<T>::shell(out.info.model);
    std::optional<Model<T>> want;
    if (expected) want = Model<T>::shell(*expected);

    const bool has_opt = h.contains("optimizer") && !h.at("optimizer").is_null();
    if (has_opt) {
        out.adam.emplace(AdamState<T>::zeros_like(out.model.params));
        out.adam->step = h.at("optimizer").at("step").get<long>();
    }
    std::set<std::string> loaded;
    bool dtype_seen = false;
    for (const auto& e : h.at("tensors")) {
        const auto full = e.at("name").get<std::string>();
        const auto shape = e.at("shape").get<Shape>();
        const auto dtype = parse_dtype(e.at("dtype").get<std::string>());
        const auto offset = e.at("offset").get<std::uint64_t>();
        const auto nbytes = e.at("nbytes").get<std::uint64_t>();
        if (!dtype_seen) out.stored_dtype = dtype;
        dtype_seen = true;
        const auto slash = full.find('/');
        if (slash == std::string::npos) throw CheckpointError(CheckpointErrc::format, "bad tensor name " + full);
        const auto section = full.substr(0, slash), name = full.substr(slash + 1);
        Tensor<T>* dst = nullptr;
        if (section == "param") {
            if (!out.model.params.contains(name)) {
                throw CheckpointError(CheckpointErrc::shape_mismatch, "tensor '" + name + "' is not in the model");
            }
            dst = &out.model.params.at(name).value;
            if (want) {
                if (!want->params.contains(name)) {
                    throw CheckpointError(CheckpointErrc::shape_mismatch,
                                          "tensor '" + name + "' does not exist in the requested config");
                }
                const auto& ws = want->params.at(name).value.shape();
                if (ws != shape) {
                    throw CheckpointError(CheckpointErrc::shape_mismatch, "tensor '" + name + "' stored as " +
                                                                              shape_str(shape) + ", config expects " +
                                                                              shape_str(ws));
                }
            }
        } else if ((section == "adam.m" || section == "adam.v") && out.adam) {
            auto& m = section == "adam.m" ? out.adam->m : out.adam->v;
            auto it = m.find(name);
            if (it == m.end()) throw CheckpointError(CheckpointErrc::shape_mismatch, "optimizer tensor '" + name + "'");
            dst = &it->second;
        } else {
            throw CheckpointError(CheckpointErrc::format, "unexpected tensor " + full);
        }
        if (dst->shape() != shape) {
            throw CheckpointError(CheckpointErrc::shape_mismatch, "tensor '" + full + "' stored as " +
                                                                      shape_str(shape) + ", config implies " +
                                                                      shape_str(dst->shape()));
        }
        if (nbytes != shape_numel(shape) * dtype_size(dtype) || offset + nbytes > parsed.payload.size()) {
            throw CheckpointError(CheckpointErrc::truncated, "tensor '" + full + "' extends past the payload");
        }
        const auto* src = parsed.payload.data() + offset;
        if (dtype == DType::f32) {
            copy_converted<T, float>(src, dst->size(), *dst);
        } else {
            copy_converted<T, double>(src, dst->size(), *dst);
        }
        loaded.insert(full);
    }
    for (const auto& [name, p] : out.model.params.entries()) {
        if (!loaded.count("param/" + name)) {
            throw CheckpointError(CheckpointErrc::shape_mismatch, "tensor '" + name + "' missing from checkpoint");
        }
    }
    if (want) {
        for (const auto& [name, p] : want->params.entries()) {
            if (!out.model.params.contains(name)) {
                throw CheckpointError(CheckpointErrc::shape_mismatch, "tensor '" + name + "' missing from checkpoint");
            }
        }
    }
    return out;
}

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError(CheckpointErrc::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path, const std::string* tokenizer_hash,
                                    const ModelConfig* expected) {
    const auto bytes = read_all(path);
    return parse_checkpoint<T>(bytes, tokenizer_hash, expected);
}

CheckpointInfo peek_checkpoint(const std::filesystem::path& path, DType* stored_dtype) {
    const auto bytes = read_all(path);
    const auto parsed = split_checkpoint(bytes);
    if (stored_dtype) {
        const auto& t = parsed.header.at("tensors");
        *stored_dtype = t.empty() ? DType::f32 : parse_dtype(t.at(0).at("dtype").get<std::string>());
    }
    return info_from_header(parsed.header);
}

#define ENDO_INSTANTIATE(T)                                                                                          \
    template std::vector<std::uint8_t> checkpoint_bytes(const Model<T>&, const CheckpointInfo&, const AdamState<T>*); \
    template void save_checkpoint(const std::filesystem::path&, const Model<T>&, const CheckpointInfo&,             \
                                  const AdamState<T>*);                                                              \
    template LoadedCheckpoint<T> parse_checkpoint(std::span<const std::uint8_t>, const std::string*,                \
                                                  const ModelConfig*);                                               \
    template LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path&, const std::string*, const ModelConfig*);
ENDO_INSTANTIATE(float)
ENDO_INSTANTIATE(double)
#undef ENDO_INSTANTIATE

}  // namespace endo
