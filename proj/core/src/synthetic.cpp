#include "endo/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "endo/rng.hpp"
#include "json_util.hpp"

namespace endo {

namespace {

constexpr std::array<std::string_view, 6> kSiteNames = {"esophagus", "stomach", "duodenum", "cecum", "colon", "rectum"};
constexpr std::array<std::string_view, 4> kFindingNames = {"polyp", "ulcer", "erosion", "normal"};

// Mucosa tone per site; far enough apart to be told apart under the noise.
constexpr std::array<std::array<int, 3>, 6> kSiteColor = {{
    {206, 160, 150},  // esophagus: pale
    {214, 112, 102},  // stomach: deep pink
    {200, 168, 112},  // duodenum: yellowish
    {170, 128, 160},  // cecum: violet
    {226, 140, 124},  // colon: salmon
    {160, 96, 92},    // rectum: dark
}};

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

std::string_view site_name(Site s) { return kSiteNames[static_cast<int>(s)]; }
std::string_view finding_name(Finding f) { return kFindingNames[static_cast<int>(f)]; }
std::string_view size_name(SizeClass s) { return s == SizeClass::large ? "large" : "small"; }

Site parse_site(std::string_view s) {
    for (std::size_t i = 0; i < kSiteNames.size(); ++i)
        if (kSiteNames[i] == s) return static_cast<Site>(i);
    throw std::invalid_argument("unknown site '" + std::string(s) + "'");
}

Finding parse_finding(std::string_view s) {
    for (std::size_t i = 0; i < kFindingNames.size(); ++i)
        if (kFindingNames[i] == s) return static_cast<Finding>(i);
    throw std::invalid_argument("unknown finding '" + std::string(s) + "'");
}

RenderedScene render_scene(const SceneSpec& spec, int image_size, int grid) {
    if (image_size < 16 || grid < 1 || image_size % grid != 0) throw std::invalid_argument("render_scene: bad geometry");
    if (spec.position.row < 0 || spec.position.row >= grid || spec.position.col < 0 || spec.position.col >= grid) {
        throw std::invalid_argument("render_scene: position outside the grid");
    }
    Rng rng(spec.rng_seed);
    const int n = image_size;
    const double s = n / 64.0;
    RenderedScene out{Raster(n, n, 3), {}};
    const auto& base = kSiteColor[static_cast<int>(spec.site)];
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double freq = rng.uniform(1.0, 2.0);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double u = (x + 0.5) / n - 0.5, v = (y + 0.5) / n - 0.5;
            const double vignette = 1.0 - 0.5 * (u * u + v * v);
            const double fold = 8.0 * std::sin(2.0 * M_PI * freq * (u + 0.6 * v) + phase);
            for (int c = 0; c < 3; ++c) {
                out.image.at(x, y, c) = clamp_byte(base[c] * vignette + fold + rng.uniform(-10.0, 10.0));
            }
        }
    }
    if (spec.finding == Finding::normal) return out;

    const int cell = n / grid;
    const double r = (spec.size == SizeClass::large ? 6.5 : 4.0) * s;
    const int jitter = std::max(0, static_cast<int>(std::floor(cell / 2.0 - r - 1.0)));
    const double cx = spec.position.col * cell + cell / 2.0 + (jitter ? rng.range(-jitter, jitter) : 0);
    const double cy = spec.position.row * cell + cell / 2.0 + (jitter ? rng.range(-jitter, jitter) : 0);

    int x0 = n, y0 = n, x1 = -1, y1 = -1;
    auto paint = [&](int x, int y, double cr, double cg, double cb) {
        out.image.at(x, y, 0) = clamp_byte(cr);
        out.image.at(x, y, 1) = clamp_byte(cg);
        out.image.at(x, y, 2) = clamp_byte(cb);
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
    };
    const int lo_x = std::max(0, static_cast<int>(std::floor(cx - r - 1))), hi_x = std::min(n - 1, static_cast<int>(cx + r + 1));
    const int lo_y = std::max(0, static_cast<int>(std::floor(cy - r - 1))), hi_y = std::min(n - 1, static_cast<int>(cy + r + 1));
    for (int y = lo_y; y <= hi_y; ++y) {
        for (int x = lo_x; x <= hi_x; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d > r) continue;
            switch (spec.finding) {
                case Finding::polyp: {
                    // raised disc with a specular highlight toward the upper left
                    const double hx = dx + r / 3.0, hy = dy + r / 3.0;
                    const double glow = std::max(0.0, 1.0 - std::sqrt(hx * hx + hy * hy) / (r / 2.0));
                    paint(x, y, 150 + 90 * glow, 50 + 140 * glow, 58 + 130 * glow);
                    break;
                }
                case Finding::ulcer: {
                    const double ox = dx - 0.55 * r, oy = dy + 0.25 * r;
                    if (std::sqrt(ox * ox + oy * oy) < 0.8 * r) break;
                    paint(x, y, 242, 236, 196);
                    break;
                }
                case Finding::erosion:
                    if (rng.bernoulli(0.5)) paint(x, y, 252, 58, 48);
                    break;
                case Finding::normal:
                    break;
            }
        }
    }
    if (x1 >= 0) out.box = {x0, y0, x1 + 1, y1 + 1};
    return out;
}

std::string make_caption(const SceneSpec& spec) {
    std::string s;
    if (spec.finding != Finding::normal && spec.size == SizeClass::large) s += "large ";
    s += finding_name(spec.finding);
    s += ' ';
    s += site_name(spec.site);
    return s;
}

std::string make_findings(std::span<const SceneSpec> scenes) {
    if (scenes.empty()) throw std::invalid_argument("make_findings: no scenes");
    std::string out;
    for (const auto& sc : scenes) {
        if (!out.empty()) out += ' ';
        if (sc.finding == Finding::normal) {
            out += "The " + std::string(site_name(sc.site)) + " was normal.";
        } else {
            out += "A " + std::string(size_name(sc.size)) + " " + std::string(finding_name(sc.finding)) +
                   " was found in the " + std::string(site_name(sc.site)) + ".";
        }
    }
    return out;
}

std::vector<ParsedFinding> parse_findings(std::string_view text) {
    std::vector<ParsedFinding> out;
    std::istringstream in{std::string(text)};
    std::vector<std::string> sentence;
    std::string word;
    auto fail = [&](const std::string& why) { return std::invalid_argument("parse_findings: " + why); };
    auto flush = [&] {
        const auto& w = sentence;
        ParsedFinding f;
        if (w.size() == 4 && w[0] == "The" && w[2] == "was" && w[3] == "normal") {
            f.site = parse_site(w[1]);
        } else if (w.size() == 8 && w[0] == "A" && w[3] == "was" && w[4] == "found" && w[5] == "in" &&
                   w[6] == "the") {
            if (w[1] != "small" && w[1] != "large") throw fail("bad size '" + w[1] + "'");
            f.size = w[1] == "large" ? SizeClass::large : SizeClass::small;
            f.finding = parse_finding(w[2]);
            if (f.finding == Finding::normal) throw fail("'normal' used as a lesion");
            f.site = parse_site(w[7]);
        } else {
            throw fail("sentence outside the report grammar");
        }
        out.push_back(f);
        sentence.clear();
    };
    while (in >> word) {
        const bool end = word.back() == '.';
        if (end) word.pop_back();
        sentence.push_back(word);
        if (end) flush();
    }
    if (!sentence.empty()) throw fail("unterminated sentence");
    return out;
}

std::vector<std::string> domain_terms() {
    std::vector<std::string> t;
    for (auto f : kFindingNames) t.emplace_back(f);
    for (auto s : kSiteNames) t.emplace_back(s);
    t.emplace_back("large");
    t.emplace_back("small");
    return t;
}

void CorpusConfig::validate() const {
    if (n_patients < 1) throw std::invalid_argument("corpus: n_patients must be positive");
    if (min_procedures < 1 || max_procedures < min_procedures) throw std::invalid_argument("corpus: bad procedure range");
    if (min_scenes < 1 || max_scenes < min_scenes) throw std::invalid_argument("corpus: bad scene range");
    if (image_size < 16 || grid < 1 || image_size % grid != 0) throw std::invalid_argument("corpus: bad image geometry");
    if (!(normal_fraction >= 0 && normal_fraction <= 1)) throw std::invalid_argument("corpus: normal_fraction in [0, 1]");
    double sum = 0;
    for (double f : split_fractions) {
        if (f < 0) throw std::invalid_argument("corpus: negative split fraction");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("corpus: split fractions must sum to 1");
}

std::string corpus_config_to_json(const CorpusConfig& c) {
    const detail::json j = {{"n_patients", c.n_patients},     {"min_procedures", c.min_procedures},
                            {"max_procedures", c.max_procedures}, {"min_scenes", c.min_scenes},
                            {"max_scenes", c.max_scenes},     {"image_size", c.image_size},
                            {"grid", c.grid},                 {"normal_fraction", c.normal_fraction},
                            {"split_fractions", c.split_fractions}, {"master_seed", c.master_seed}};
    return j.dump();
}

CorpusConfig corpus_config_from_json(std::string_view text, CorpusConfig c) {
    const auto j = detail::json::parse(text);
    detail::reject_unknown(j,
                           {"n_patients", "min_procedures", "max_procedures", "min_scenes", "max_scenes", "image_size",
                            "grid", "normal_fraction", "split_fractions", "master_seed"},
                           "corpus");
    detail::read_opt(j, "n_patients", c.n_patients);
    detail::read_opt(j, "min_procedures", c.min_procedures);
    detail::read_opt(j, "max_procedures", c.max_procedures);
    detail::read_opt(j, "min_scenes", c.min_scenes);
    detail::read_opt(j, "max_scenes", c.max_scenes);
    detail::read_opt(j, "image_size", c.image_size);
    detail::read_opt(j, "grid", c.grid);
    detail::read_opt(j, "normal_fraction", c.normal_fraction);
    detail::read_opt(j, "split_fractions", c.split_fractions);
    detail::read_opt(j, "master_seed", c.master_seed);
    c.validate();
    return c;
}

std::vector<ProcedureSample> plan_corpus(const CorpusConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(cfg.n_patients);
    Rng split_rng(derive_seed(cfg.master_seed, std::string_view("split")));
    const auto perm = split_rng.permutation(n);
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.split_fractions[0] * static_cast<double>(n)));
    const auto n_val = std::min(n - std::min(n, n_train),
                                static_cast<std::size_t>(std::llround(cfg.split_fractions[1] * static_cast<double>(n))));
    std::vector<Split> patient_split(n, Split::test);
    for (std::size_t i = 0; i < n; ++i) {
        patient_split[perm[i]] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
    }

    const auto patients_seed = derive_seed(cfg.master_seed, std::string_view("patients"));
    std::vector<ProcedureSample> out;
    char buf[64];
    for (std::size_t p = 0; p < n; ++p) {
        const auto pseed = derive_seed(patients_seed, p);
        Rng prng(pseed);
        const int n_proc = prng.range(cfg.min_procedures, cfg.max_procedures);
        std::snprintf(buf, sizeof buf, "p%04zu", p);
        const std::string patient = buf;
        for (int r = 0; r < n_proc; ++r) {
            const auto rseed = derive_seed(pseed, static_cast<std::uint64_t>(r));
            Rng rr(rseed);
            ProcedureSample proc;
            proc.patient_id = patient;
            proc.procedure_id = patient + "_r" + std::to_string(r);
            proc.split = patient_split[p];
            const bool upper = rr.bernoulli(0.5);
            const int n_scenes = rr.range(cfg.min_scenes, cfg.max_scenes);
            for (int s = 0; s < n_scenes; ++s) {
                SceneSpec sc;
                sc.site = static_cast<Site>((upper ? 0 : 3) + rr.range(0, 2));
                if (!rr.bernoulli(cfg.normal_fraction)) {
                    sc.finding = static_cast<Finding>(rr.range(0, 2));
                    sc.size = rr.bernoulli(0.5) ? SizeClass::large : SizeClass::small;
                    sc.position = {rr.range(0, cfg.grid - 1), rr.range(0, cfg.grid - 1)};
                }
                sc.rng_seed = derive_seed(rseed, static_cast<std::uint64_t>(1000 + s));
                proc.scenes.push_back(sc);
            }
            // capture order follows the scope's path through the anatomy
            std::stable_sort(proc.scenes.begin(), proc.scenes.end(),
                             [](const SceneSpec& a, const SceneSpec& b) { return a.site < b.site; });
            proc.findings_text = make_findings(proc.scenes);
            out.push_back(std::move(proc));
        }
    }
    return out;
}

std::string image_name(const ProcedureSample& p, std::size_t scene_index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_s%02zu", scene_index);
    return p.procedure_id + buf + ".png";
}

CorpusSummary generate_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir) {
    const auto plan = plan_corpus(cfg);
    std::filesystem::create_directories(out_dir / "images");
    std::vector<ManifestRecord> stage1, stage2;
    CorpusSummary sum;
    std::string last_patient;
    for (const auto& proc : plan) {
        if (proc.patient_id != last_patient) ++sum.patients;
        last_patient = proc.patient_id;
        ManifestRecord r2;
        r2.record_id = proc.procedure_id;
        r2.patient_id = proc.patient_id;
        r2.procedure_id = proc.procedure_id;
        r2.stage = 2;
        r2.split = proc.split;
        r2.text = proc.findings_text;
        for (std::size_t s = 0; s < proc.scenes.size(); ++s) {
            const auto& sc = proc.scenes[s];
            const auto scene = render_scene(sc, cfg.image_size, cfg.grid);
            const auto name = image_name(proc, s);
            write_png(out_dir / "images" / name, scene.image);
            const std::string rel = "images/" + name;
            std::optional<PixelBox> box;
            if (!scene.box.empty()) box = scene.box;

            ManifestRecord r1;
            r1.record_id = name.substr(0, name.size() - 4);
            r1.patient_id = proc.patient_id;
            r1.procedure_id = proc.procedure_id;
            r1.stage = 1;
            r1.split = proc.split;
            r1.image_paths = {rel};
            r1.text = make_caption(sc);
            r1.boxes = {box};
            stage1.push_back(std::move(r1));

            r2.image_paths.push_back(rel);
            r2.boxes.push_back(box);
            ++sum.images;
            ++sum.images_per_split[static_cast<int>(proc.split)];
        }
        stage2.push_back(std::move(r2));
        ++sum.procedures;
        ++sum.procedures_per_split[static_cast<int>(proc.split)];
    }
    sum.stage1_manifest = out_dir / "stage1.jsonl";
    sum.stage2_manifest = out_dir / "stage2.jsonl";
    write_manifest(sum.stage1_manifest, stage1);
    write_manifest(sum.stage2_manifest, stage2);
    return sum;
}

}  // namespace endo
