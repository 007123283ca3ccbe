#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "endo/image.hpp"
#include "endo/storage.hpp"

namespace endo {

enum class Site { esophagus, stomach, duodenum, cecum, colon, rectum };
enum class Finding { polyp, ulcer, erosion, normal };
enum class SizeClass { small, large };

std::string_view site_name(Site s);
std::string_view finding_name(Finding f);
std::string_view size_name(SizeClass s);
Site parse_site(std::string_view s);
Finding parse_finding(std::string_view s);

struct GridCell {
    int row = 0;
    int col = 0;
    bool operator==(const GridCell&) const = default;
};

struct SceneSpec {
    Site site = Site::stomach;
    Finding finding = Finding::normal;
    SizeClass size = SizeClass::small;
    GridCell position;
    std::uint64_t rng_seed = 0;
    bool operator==(const SceneSpec&) const = default;
};

struct RenderedScene {
    Raster image;
    PixelBox box;  // empty for normal scenes
};

// The lesion is drawn inside the 16x16-pixel-equivalent cell at
// spec.position of a `grid` x `grid` layout, so its box never crosses cells.
RenderedScene render_scene(const SceneSpec& spec, int image_size, int grid = 4);

// "[large ]<finding> <site>"
std::string make_caption(const SceneSpec& spec);
// One sentence per scene in capture order.
std::string make_findings(std::span<const SceneSpec> scenes);

struct ParsedFinding {
    Finding finding = Finding::normal;
    Site site = Site::stomach;
    SizeClass size = SizeClass::small;
    bool operator==(const ParsedFinding&) const = default;
};
// Inverse of make_findings. Throws on text outside the grammar.
std::vector<ParsedFinding> parse_findings(std::string_view text);

// Finding and site words; the domain lexicon for the tokenizer.
std::vector<std::string> domain_terms();

struct CorpusConfig {
    int n_patients = 600;
    int min_procedures = 1;
    int max_procedures = 2;
    int min_scenes = 1;
    int max_scenes = 12;
    int image_size = 64;
    int grid = 4;
    double normal_fraction = 0.35;
    std::array<double, 3> split_fractions{0.8, 0.1, 0.1};
    std::uint64_t master_seed = 1;

    void validate() const;
    bool operator==(const CorpusConfig&) const = default;
};

std::string corpus_config_to_json(const CorpusConfig& c);
CorpusConfig corpus_config_from_json(std::string_view text, CorpusConfig defaults = {});

struct ProcedureSample {
    std::string procedure_id;
    std::string patient_id;
    std::vector<SceneSpec> scenes;
    std::string findings_text;
    Split split = Split::train;
};

// Pure planning step: every procedure with its scenes and split.
std::vector<ProcedureSample> plan_corpus(const CorpusConfig& cfg);

std::string image_name(const ProcedureSample& p, std::size_t scene_index);

struct CorpusSummary {
    std::size_t patients = 0;
    std::size_t procedures = 0;
    std::size_t images = 0;
    std::array<std::size_t, 3> procedures_per_split{};
    std::array<std::size_t, 3> images_per_split{};
    std::filesystem::path stage1_manifest;
    std::filesystem::path stage2_manifest;
};

// Renders every scene into <out>/images and writes <out>/stage1.jsonl and
// <out>/stage2.jsonl. Manifests are written last, so a failed run never
// leaves a manifest behind.
CorpusSummary generate_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace endo
