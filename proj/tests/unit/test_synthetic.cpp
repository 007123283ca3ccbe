#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "endo/synthetic.hpp"

using namespace endo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

CorpusConfig small_corpus() {
    CorpusConfig c;
    c.n_patients = 20;
    c.max_scenes = 4;
    c.image_size = 32;
    c.master_seed = 5;
    return c;
}

std::array<double, 3> mean_colour(const Raster& r) {
    std::array<double, 3> m{};
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            for (int c = 0; c < 3; ++c) m[std::size_t(c)] += r.at(x, y, c);
    for (auto& v : m) v /= double(r.width) * r.height;
    return m;
}

}  // namespace

TEST(Render, Deterministic) {
    const SceneSpec spec{Site::colon, Finding::polyp, SizeClass::large, {1, 2}, 42};
    const auto a = render_scene(spec, 64);
    const auto b = render_scene(spec, 64);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.box, b.box);
    auto other = spec;
    other.rng_seed = 43;
    EXPECT_NE(render_scene(other, 64).image, a.image);
}

TEST(Render, NormalSceneHasEmptyBox) {
    const SceneSpec spec{Site::stomach, Finding::normal, SizeClass::small, {0, 0}, 1};
    EXPECT_TRUE(render_scene(spec, 64).box.empty());
}

TEST(Render, LesionBoxStaysInsideItsCell) {
    for (auto f : {Finding::polyp, Finding::ulcer, Finding::erosion}) {
        for (int seed = 0; seed < 20; ++seed) {
            const GridCell cell{seed % 4, (seed / 4) % 4};
            const SceneSpec spec{Site::rectum, f, seed % 2 ? SizeClass::large : SizeClass::small, cell,
                                 std::uint64_t(seed)};
            const auto box = render_scene(spec, 64).box;
            ASSERT_FALSE(box.empty());
            EXPECT_GE(box.x0, cell.col * 16);
            EXPECT_LE(box.x1, (cell.col + 1) * 16);
            EXPECT_GE(box.y0, cell.row * 16);
            EXPECT_LE(box.y1, (cell.row + 1) * 16);
        }
    }
}

TEST(Render, LargeLesionsCoverMore) {
    const SceneSpec small{Site::colon, Finding::polyp, SizeClass::small, {1, 1}, 3};
    auto large = small;
    large.size = SizeClass::large;
    EXPECT_GT(render_scene(large, 64).box.area(), render_scene(small, 64).box.area());
}

TEST(Render, SitesHaveDistinctColours) {
    std::vector<std::array<double, 3>> means;
    for (int s = 0; s < 6; ++s) {
        const SceneSpec spec{static_cast<Site>(s), Finding::normal, SizeClass::small, {0, 0}, 9};
        means.push_back(mean_colour(render_scene(spec, 64).image));
    }
    for (std::size_t i = 0; i < means.size(); ++i)
        for (std::size_t j = i + 1; j < means.size(); ++j) {
            double d = 0;
            for (int c = 0; c < 3; ++c) d += std::abs(means[i][std::size_t(c)] - means[j][std::size_t(c)]);
            EXPECT_GT(d, 10.0) << site_name(static_cast<Site>(i)) << " vs " << site_name(static_cast<Site>(j));
        }
}

TEST(Text, CaptionTemplates) {
    EXPECT_EQ(make_caption({Site::colon, Finding::polyp, SizeClass::small, {}, 0}), "polyp colon");
    EXPECT_EQ(make_caption({Site::rectum, Finding::ulcer, SizeClass::large, {}, 0}), "large ulcer rectum");
    EXPECT_EQ(make_caption({Site::stomach, Finding::normal, SizeClass::large, {}, 0}), "normal stomach");
}

TEST(Text, FindingsTemplatesAndParse) {
    const std::vector<SceneSpec> scenes{{Site::cecum, Finding::normal, SizeClass::small, {}, 0},
                                        {Site::colon, Finding::erosion, SizeClass::large, {}, 0}};
    const auto text = make_findings(scenes);
    EXPECT_EQ(text, "The cecum was normal. A large erosion was found in the colon.");
    const auto parsed = parse_findings(text);
    ASSERT_EQ(parsed.size(), 2u);
    EXPECT_EQ(parsed[0].finding, Finding::normal);
    EXPECT_EQ(parsed[0].site, Site::cecum);
    EXPECT_EQ(parsed[1], (ParsedFinding{Finding::erosion, Site::colon, SizeClass::large}));
    EXPECT_THROW(parse_findings("The colon was purple."), std::exception);
    EXPECT_THROW(make_findings(std::span<const SceneSpec>{}), std::invalid_argument);
}

TEST(Text, Names) {
    for (int s = 0; s < 6; ++s) EXPECT_EQ(parse_site(site_name(static_cast<Site>(s))), static_cast<Site>(s));
    for (int f = 0; f < 4; ++f)
        EXPECT_EQ(parse_finding(finding_name(static_cast<Finding>(f))), static_cast<Finding>(f));
    const auto terms = domain_terms();
    EXPECT_NE(std::find(terms.begin(), terms.end(), "polyp"), terms.end());
}

TEST(Plan, SplitsAreDisjointByPatient) {
    CorpusConfig c = small_corpus();
    c.n_patients = 200;
    const auto plan = plan_corpus(c);
    std::map<std::string, Split> by_patient;
    std::set<std::string> procs;
    std::array<int, 3> counts{};
    for (const auto& p : plan) {
        auto [it, fresh] = by_patient.emplace(p.patient_id, p.split);
        if (!fresh) EXPECT_EQ(it->second, p.split) << p.patient_id;
        EXPECT_TRUE(procs.insert(p.procedure_id).second);
        EXPECT_GE(p.scenes.size(), 1u);
        EXPECT_LE(p.scenes.size(), 4u);
        EXPECT_EQ(p.findings_text, make_findings(p.scenes));
        ++counts[static_cast<std::size_t>(p.split)];
    }
    EXPECT_EQ(by_patient.size(), 200u);
    for (int k = 0; k < 3; ++k) EXPECT_GT(counts[std::size_t(k)], 0);
    EXPECT_GT(counts[0], counts[1] + counts[2]);
}

TEST(Plan, SeedControlsContent) {
    auto c = small_corpus();
    const auto a = plan_corpus(c);
    EXPECT_EQ(a.size(), plan_corpus(c).size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].scenes, plan_corpus(c)[i].scenes);
    c.master_seed = 6;
    const auto b = plan_corpus(c);
    bool differs = a.size() != b.size();
    for (std::size_t i = 0; !differs && i < a.size(); ++i) differs = a[i].findings_text != b[i].findings_text;
    EXPECT_TRUE(differs);
}

TEST(Config, JsonRoundTripAndValidation) {
    auto c = small_corpus();
    c.normal_fraction = 0.5;
    EXPECT_EQ(corpus_config_from_json(corpus_config_to_json(c)), c);
    EXPECT_THROW(corpus_config_from_json(R"({"patients": 3})"), std::exception);
    c.image_size = 30;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Generate, ByteIdenticalAcrossRunsAndConsistent) {
    const auto root = fs::temp_directory_path() / "endo_synth_test";
    fs::remove_all(root);
    const auto c = small_corpus();
    const auto s1 = generate_corpus(c, root / "a");
    const auto s2 = generate_corpus(c, root / "b");
    EXPECT_EQ(slurp(s1.stage1_manifest), slurp(s2.stage1_manifest));
    EXPECT_EQ(slurp(s1.stage2_manifest), slurp(s2.stage2_manifest));
    EXPECT_EQ(s1.patients, 20u);

    const auto m1 = read_manifest(s1.stage1_manifest, 1);
    const auto m2 = read_manifest(s1.stage2_manifest, 2);
    EXPECT_EQ(m1.records.size(), s1.images);
    EXPECT_EQ(m2.records.size(), s1.procedures);
    EXPECT_TRUE(validate_splits(m1.records).empty());
    EXPECT_TRUE(validate_splits(m2.records).empty());

    std::map<std::string, Split> stage1_images;
    for (const auto& r : m1.records) stage1_images[r.image_paths[0]] = r.split;
    for (const auto& r : m2.records) {
        ASSERT_EQ(r.boxes.size(), r.image_paths.size());
        for (const auto& p : r.image_paths) {
            ASSERT_TRUE(stage1_images.count(p)) << p;
            EXPECT_EQ(stage1_images[p], r.split);
            EXPECT_EQ(slurp(root / "a" / p), slurp(root / "b" / p));
        }
        const auto parsed = parse_findings(r.text);
        ASSERT_EQ(parsed.size(), r.image_paths.size());
        for (std::size_t k = 0; k < parsed.size(); ++k)
            EXPECT_EQ(parsed[k].finding == Finding::normal, !r.boxes[k].has_value()) << r.record_id;
    }
    fs::remove_all(root);
}
