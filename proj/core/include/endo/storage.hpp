#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "endo/image.hpp"
#include "endo/model.hpp"
#include "endo/training.hpp"

namespace endo {

enum class Split { train, val, test };
std::string_view split_name(Split s);
Split parse_split(std::string_view s);

// One manifest line. Stage 1: one image and its caption. Stage 2: the
// procedure's images in capture order and the findings text.
struct ManifestRecord {
    std::string record_id;
    std::string patient_id;
    std::string procedure_id;
    int stage = 1;
    std::vector<std::string> image_paths;  // relative to the manifest's directory
    std::string text;
    Split split = Split::train;
    // Per image: ground-truth lesion box, absent for lesion-free images.
    std::vector<std::optional<PixelBox>> boxes;

    bool operator==(const ManifestRecord&) const = default;
};

struct ManifestReport {
    std::vector<ManifestRecord> records;
    // Stage-2 records dropped for exceeding the image limit.
    std::size_t excluded = 0;
    std::vector<std::string> excluded_ids;
};

class ManifestError : public std::runtime_error {
public:
    ManifestError(const std::string& msg, std::size_t line) : std::runtime_error(msg), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

std::string manifest_line(const ManifestRecord& r);
ManifestRecord parse_manifest_line(std::string_view line, std::size_t line_no = 0);

// Reads a JSONL manifest. Records must all be of `stage`. Stage-2 records with
// more than max_images images are excluded and counted. With check_files,
// every image path must resolve to a readable file.
ManifestReport read_manifest(const std::filesystem::path& path, int stage, bool check_files = true,
                             int max_images = kMaxImages);
// Writes via a temporary file and rename.
void write_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records);

struct SplitViolation {
    std::string kind;  // "patient" or "procedure"
    std::string id;
    std::vector<Split> splits;
};

std::vector<SplitViolation> validate_splits(std::span<const ManifestRecord> records);

enum class CheckpointErrc { bad_magic, bad_version, truncated, checksum_mismatch, shape_mismatch, tokenizer_mismatch, io, format };
std::string_view checkpoint_errc_name(CheckpointErrc c);

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(CheckpointErrc code, const std::string& msg)
        : std::runtime_error(std::string(checkpoint_errc_name(code)) + ": " + msg), code_(code) {}
    CheckpointErrc code() const { return code_; }

private:
    CheckpointErrc code_;
};

inline constexpr char kCheckpointMagic[8] = {'E', 'N', 'D', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
    ModelConfig model;
    std::string tokenizer_hash;
    int stage = 0;
    TrainProgress progress;
    std::string stage_config;  // JSON text of the StageConfig that produced it, may be empty
};

template <typename T>
struct LoadedCheckpoint {
    Model<T> model;
    CheckpointInfo info;
    std::optional<AdamState<T>> adam;
    DType stored_dtype = DType::f32;
};

template <typename T>
std::vector<std::uint8_t> checkpoint_bytes(const Model<T>& model, const CheckpointInfo& info,
                                           const AdamState<T>* adam = nullptr);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model, const CheckpointInfo& info,
                     const AdamState<T>* adam = nullptr);

// Validates magic, version, length and checksum before decoding, then the
// tensor table against the stored config (and `expected` when given).
// Tensors stored in another dtype are converted.
template <typename T>
LoadedCheckpoint<T> parse_checkpoint(std::span<const std::uint8_t> bytes, const std::string* tokenizer_hash = nullptr,
                                     const ModelConfig* expected = nullptr);

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path, const std::string* tokenizer_hash = nullptr,
                                    const ModelConfig* expected = nullptr);

// Reads only the header; cheap way to learn the stored dtype and configs.
CheckpointInfo peek_checkpoint(const std::filesystem::path& path, DType* stored_dtype = nullptr);

// Writes `bytes` to `<path>.tmp` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace endo
